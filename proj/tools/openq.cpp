// openq: run, list and validate the registered scenarios.
//   openq run <config-file | scenario> [--set key=value]... [--seed N] [--out DIR]
//   openq list
//   openq validate <config-file>

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "openq/cli.hpp"

namespace oc = openq::cli;

namespace {

oc::ScenarioConfig build_config(const std::string& target, const std::vector<std::string>& sets, const std::string& seed,
                                const std::string& out) {
    oc::ScenarioConfig cfg;
    if (oc::find_scenario(target)) {
        cfg.name = target;
    } else if (std::filesystem::is_regular_file(target)) {
        cfg = oc::load_config(target);
    } else {
        throw oc::usage_error("'" + target + "' is neither a registered scenario nor a readable config file");
    }
    for (const auto& kv : sets) oc::apply_assignment(cfg, kv);
    if (!seed.empty()) cfg.seed = oc::parse_seed(seed);
    if (!out.empty()) cfg.out = out;
    return cfg;
}

// Maps the library's exception types onto the documented exit codes.
template <class F>
int guarded(F&& body) {
    try {
        return body();
    } catch (const oc::usage_error& e) {
        std::cerr << "openq: " << e.what() << '\n';
        return oc::exit_usage;
    } catch (const openq::validation_error& e) {
        std::cerr << "openq: invalid configuration: " << e.what() << '\n';
        return oc::exit_validation;
    } catch (const openq::domain_error& e) {
        std::cerr << "openq: invalid configuration: " << e.what() << '\n';
        return oc::exit_validation;
    } catch (const openq::rate_divergence_error& e) {
        std::cerr << "openq: numerical failure: " << e.what() << " (t = " << oc::fmt17(e.time) << ")\n";
        return oc::exit_numerical;
    } catch (const openq::error& e) {
        std::cerr << "openq: numerical failure: " << e.what() << '\n';
        return oc::exit_numerical;
    } catch (const std::exception& e) {
        std::cerr << "openq: numerical failure: " << e.what() << '\n';
        return oc::exit_numerical;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"openq: open quantum system scenario runner"};
    app.require_subcommand(1);

    std::string target, seed, out, config_path;
    std::vector<std::string> sets;
    auto* run = app.add_subcommand("run", "Run a scenario from a config file or by name");
    run->add_option("target", target, "config file (JSON or key=value) or scenario name")->required();
    run->add_option("--set", sets, "override a parameter, key=value (repeatable)");
    run->add_option("--seed", seed, "random seed");
    run->add_option("--out", out, "output directory");

    auto* list = app.add_subcommand("list", "List registered scenarios");
    auto* validate = app.add_subcommand("validate", "Check a config file without running it");
    validate->add_option("config", config_path, "config file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return oc::exit_usage;
    }

    if (list->parsed()) {
        std::cout << oc::list_text();
        return oc::exit_ok;
    }
    if (validate->parsed()) {
        return guarded([&] {
            const oc::ScenarioConfig cfg = oc::load_config(config_path);
            oc::validate_config(cfg);
            std::cout << "ok: " << cfg.name << '\n';
            return int(oc::exit_ok);
        });
    }
    return guarded([&] {
        const oc::ScenarioConfig cfg = build_config(target, sets, seed, out);
        const oc::RunOutput o = oc::run_scenario(cfg);
        std::cout << o.csv.string() << '\n' << o.summary.string() << '\n';
        return int(oc::exit_ok);
    });
}
