#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "openq/cli.hpp"

using namespace openq;
using namespace openq::cli;
namespace fs = std::filesystem;

namespace {

struct Proc {
    int code;
    std::string out, err;
};

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("openq_cli_test_" + std::to_string(::getpid())) / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

Proc openq_cmd(const std::string& args, const std::string& env = "") {
    const fs::path dir = scratch("proc");
    const std::string cmd = env + " \"" OPENQ_CLI_PATH "\" " + args + " >\"" + (dir / "out").string() + "\" 2>\"" + (dir / "err").string() + "\"";
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(dir / "out"), slurp(dir / "err")};
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream ls(line);
        std::string c;
        while (std::getline(ls, c, ',')) cells.push_back(c);
        rows.push_back(cells);
    }
    return rows;
}

ScenarioConfig named(const std::string& n) {
    ScenarioConfig c;
    c.name = n;
    return c;
}

}  // namespace

// ---- formatting -------------------------------------------------------------------------

TEST(Format, SeventeenDigitsRoundTrip) {
    for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0}) {
        const std::string s = fmt17(x);
        EXPECT_EQ(std::strtod(s.c_str(), nullptr), x) << s;
        EXPECT_EQ(s.find(','), std::string::npos);
    }
    EXPECT_EQ(fmt17(0.1), "0.10000000000000001");
}

TEST(Format, CsvRejectsNonFiniteOutsideDivergenceColumns) {
    Table t;
    t.columns = {"t", "rate"};
    t.add({1.0, std::nan("")});
    EXPECT_THROW(to_csv(t), numerical_error);
    t.divergence_columns.insert("rate");
    EXPECT_EQ(to_csv(t), "t,rate\n1,nan\n");
}

TEST(Format, RowWidthChecked) {
    Table t;
    t.columns = {"a", "b"};
    EXPECT_THROW(t.add({1.0}), numerical_error);
}

// ---- config parsing ---------------------------------------------------------------------

TEST(Config, JsonAndFlatAgree) {
    const ScenarioConfig j = parse_config(
        R"({"scenario": "jc-comparison", "seed": 5, "out": "o", "params": {"tau_M": 0.2, "tcl4_form": "printed"},
            "time": {"t_start": 0, "t_end": 3, "points": 7}})");
    const ScenarioConfig f = parse_config("# comment\nscenario = jc-comparison\nseed=5\nout = o\ntau_M = 0.2\ntcl4_form = printed\n"
                                          "t_start = 0\nt_end = 3\npoints = 7\n");
    for (const auto* c : {&j, &f}) {
        EXPECT_EQ(c->name, "jc-comparison");
        EXPECT_EQ(c->seed.value(), 5u);
        EXPECT_EQ(c->out, "o");
        EXPECT_DOUBLE_EQ(c->params.at("tau_M").get<double>(), 0.2);
        EXPECT_EQ(c->params.at("tcl4_form").get<std::string>(), "printed");
        EXPECT_EQ(c->points.value(), 7);
        EXPECT_DOUBLE_EQ(c->t_end.value(), 3);
    }
    EXPECT_EQ(to_csv(run_in_memory(j).table), to_csv(run_in_memory(f).table));
}

TEST(Config, MalformedInputsAreValidationErrors) {
    EXPECT_THROW(parse_config("{\"scenario\": "), validation_error);
    EXPECT_THROW(parse_config(R"({"scenario": "werner-ppt", "colour": 1})"), validation_error);
    EXPECT_THROW(parse_config(R"({"scenario": "werner-ppt", "params": {"seed": 1}})"), validation_error);
    EXPECT_THROW(parse_config(R"({"scenario": "werner-ppt", "time": {"dt": 1}})"), validation_error);
    EXPECT_THROW(parse_config("scenario werner-ppt"), validation_error);
    EXPECT_THROW(parse_config("seed = -3"), validation_error);
    EXPECT_THROW(parse_config("seed = 1.5"), validation_error);
    EXPECT_THROW(parse_config("points = 2.5"), validation_error);
    EXPECT_THROW(parse_config(R"({"params": {"x": [1, 2]}})"), validation_error);
}

TEST(Config, ScalarParsing) {
    EXPECT_TRUE(parse_scalar(" 2.5 ").is_number());
    EXPECT_TRUE(parse_scalar("1e-3").is_number());
    EXPECT_TRUE(parse_scalar("5,10").is_string());
    EXPECT_TRUE(parse_scalar("inf").is_string());
    EXPECT_EQ(parse_seed(json("18446744073709551615")), 18446744073709551615ull);
}

TEST(Config, TimeGridInvariants) {
    EXPECT_NO_THROW((TimeGrid{0, 1, 2}.validate()));
    EXPECT_THROW((TimeGrid{0, 1, 1}.validate()), validation_error);
    EXPECT_THROW((TimeGrid{1, 1, 5}.validate()), validation_error);
    EXPECT_THROW((TimeGrid{-1, 1, 5}.validate()), validation_error);
    const auto t = TimeGrid{0.5, 2.5, 5}.values();
    ASSERT_EQ(t.size(), 5u);
    EXPECT_EQ(t.front(), 0.5);
    EXPECT_EQ(t.back(), 2.5);
    EXPECT_DOUBLE_EQ(t[2], 1.5);
}

TEST(Config, ScenarioSchemaValidation) {
    ScenarioConfig c = named("werner-ppt");
    EXPECT_NO_THROW(validate_config(c));
    c.params["bogus"] = 1;
    EXPECT_THROW(validate_config(c), validation_error);
    c = named("werner-ppt");
    c.params["samples"] = 1;
    EXPECT_THROW(validate_config(c), validation_error);
    c = named("werner-ppt");
    c.t_end = 3;  // no time grid for a p sweep
    EXPECT_THROW(validate_config(c), validation_error);
    c = named("jc-comparison");
    c.params["tcl4_form"] = "other";
    EXPECT_THROW(validate_config(c), validation_error);
    c = named("jc-comparison");
    c.params["tau_M"] = "five";
    EXPECT_THROW(validate_config(c), validation_error);
    c = named("jc-comparison");
    c.params["tau_M"] = 0;
    EXPECT_THROW(validate_config(c), validation_error);
    c = named("trajectories-vs-lindblad");
    EXPECT_THROW(validate_config(c), validation_error);  // stochastic, no seed
    c.seed = 1;
    EXPECT_NO_THROW(validate_config(c));
    EXPECT_THROW(validate_config(named("no-such-scenario")), usage_error);
    EXPECT_THROW(validate_config(named("")), usage_error);
}

// ---- registry -------------------------------------------------------------------------------

TEST(Registry, MinimumSetAlphabetical) {
    const std::vector<std::string> expected = {
        "bloch-channel-geometry", "cg-vs-exact-dephasing",      "collective-dephasing-scaling", "davies-wcl-vs-scl",
        "jc-comparison",          "lindblad-amplitude-damping", "lindblad-phase-damping",       "ohmic-spectrum",
        "pauli-detailed-balance", "pmme-cp-boundary",           "pmme-phase-damping",           "stochastic-schrodinger",
        "trajectories-vs-lindblad", "werner-ppt",               "zz-dephasing-purity"};
    std::vector<std::string> names;
    for (const auto& s : registry()) names.push_back(s.name);
    EXPECT_EQ(names, expected);
}

TEST(Registry, ListingNamesDescriptionsAndParameters) {
    const std::string l = list_text();
    EXPECT_NE(l.find("werner-ppt"), std::string::npos);
    EXPECT_NE(l.find("cg-vs-exact-dephasing"), std::string::npos);
    EXPECT_NE(l.find("required: seed"), std::string::npos);
    EXPECT_NE(l.find("tau_M=5"), std::string::npos);
    EXPECT_LT(l.find("bloch-channel-geometry"), l.find("werner-ppt"));
}

// ---- scenario content -------------------------------------------------------------------

TEST(Scenario, WernerSignChangeAtOneThird) {
    const ScenarioResult r = run_in_memory(named("werner-ppt"));
    ASSERT_EQ(r.table.columns, (std::vector<std::string>{"p", "min_pt_eig"}));
    double last_nonneg = -1, first_neg = 2;
    for (const auto& row : r.table.rows) {
        const double p = std::get<double>(row[0]), m = std::get<double>(row[1]);
        if (m >= 0) last_nonneg = std::max(last_nonneg, p);
        else first_neg = std::min(first_neg, p);
    }
    EXPECT_LT(last_nonneg, first_neg);
    EXPECT_NEAR(first_neg, 1.0 / 3.0, 1e-3);
    EXPECT_NEAR(last_nonneg, 1.0 / 3.0, 1e-3);
}

TEST(Scenario, JcComparisonColumns) {
    ScenarioConfig c = named("jc-comparison");
    c.params["tau_M"] = 5.0;
    const ScenarioResult r = run_in_memory(c);
    EXPECT_EQ(r.table.columns, (std::vector<std::string>{"t", "exact", "markov", "tcl2", "tcl4", "nz2"}));
    const auto& first = r.table.rows.front();
    for (std::size_t i = 1; i < first.size(); ++i) EXPECT_DOUBLE_EQ(std::get<double>(first[i]), 1.0);
    // every approximation decays from the same initial population; exact matches jc_c1 directly
    const JCParams p{1.0, 5.0};
    for (const auto& row : r.table.rows) EXPECT_NEAR(std::get<double>(row[1]), std::norm(jc_c1(p, std::get<double>(row[0]))), 1e-14);
}

TEST(Scenario, TrajectoriesWithinFiveStandardErrors) {
    for (const char* ch : {"amplitude", "phase"}) {
        ScenarioConfig c = named("trajectories-vs-lindblad");
        c.seed = 20240611;
        c.params["channel"] = ch;
        const ScenarioResult r = run_in_memory(c);
        const auto& cols = r.table.columns;
        const auto td = std::find(cols.begin(), cols.end(), "trace_distance") - cols.begin();
        const auto se = std::find(cols.begin(), cols.end(), "stderr") - cols.begin();
        for (const auto& row : r.table.rows) EXPECT_LE(std::get<double>(row[td]), 5 * std::get<double>(row[se]) + 1e-12) << ch;
    }
}

TEST(Scenario, HeadlineNumbers) {
    auto summary = [](const std::string& name) {
        std::map<std::string, std::string> m;
        for (const auto& [k, v] : run_in_memory(named(name)).summary.lines) m[k] = v;
        return m;
    };
    EXPECT_NEAR(std::stod(summary("werner-ppt")["p_crossing"]), 1.0 / 3.0, 1e-10);
    EXPECT_NEAR(std::stod(summary("davies-wcl-vs-scl")["wcl.T2_over_T1"]), 2.0, 1e-9);
    EXPECT_NEAR(std::stod(summary("pmme-cp-boundary")["xi_at_boundary"]), -1.0, 1e-6);
    EXPECT_LE(std::stod(summary("pauli-detailed-balance")["max_detailed_balance_residual"]), 1e-8);
    EXPECT_NEAR(std::stod(summary("collective-dephasing-scaling")["collective_exponent"]), 2.0, 1e-12);
    EXPECT_LE(std::stod(summary("cg-vs-exact-dephasing")["tau_20.relative_offset"]), 0.01);
}

TEST(Scenario, PmmeLaplaceReachFailureIsNumerical) {
    ScenarioConfig c = named("pmme-phase-damping");
    c.params["A"] = 1e5;
    EXPECT_THROW(run_in_memory(c), numerical_error);
}

// ---- executable -------------------------------------------------------------------------

TEST(Binary, ListIsSortedAndComplete) {
    const Proc p = openq_cmd("list");
    EXPECT_EQ(p.code, 0);
    std::vector<std::string> names;
    std::istringstream in(p.out);
    std::string line;
    while (std::getline(in, line))
        if (!line.empty() && line[0] != ' ') names.push_back(line);
    EXPECT_EQ(names.size(), 15u);
    EXPECT_TRUE(std::is_sorted(names.begin(), names.end()));
}

TEST(Binary, ExitCodes) {
    EXPECT_EQ(openq_cmd("").code, 2);
    EXPECT_EQ(openq_cmd("frobnicate").code, 2);
    EXPECT_EQ(openq_cmd("run no-such-scenario").code, 2);
    const fs::path d = scratch("codes");
    EXPECT_EQ(openq_cmd("run werner-ppt --set samples=1 --out " + d.string()).code, 3);
    EXPECT_EQ(openq_cmd("run werner-ppt --set nonsense --out " + d.string()).code, 3);
    EXPECT_EQ(openq_cmd("run trajectories-vs-lindblad --out " + d.string()).code, 3);
    EXPECT_EQ(openq_cmd("run jc-comparison --set t_end=0 --out " + d.string()).code, 3);
    const Proc num = openq_cmd("run pmme-phase-damping --set A=1e5 --out " + d.string());
    EXPECT_EQ(num.code, 4);
    EXPECT_NE(num.err.find("numerical failure"), std::string::npos);
    EXPECT_FALSE(fs::exists(d / "pmme-phase-damping.csv"));

    std::ofstream(d / "bad.json") << R"({"scenario": "werner-ppt", "params": {"samples": "many"}})";
    EXPECT_EQ(openq_cmd("validate " + (d / "bad.json").string()).code, 3);
    std::ofstream(d / "unknown.json") << R"({"scenario": "warp-drive"})";
    EXPECT_EQ(openq_cmd("validate " + (d / "unknown.json").string()).code, 2);
    std::ofstream(d / "good.txt") << "scenario = werner-ppt\nsamples = 11\n";
    const Proc ok = openq_cmd("validate " + (d / "good.txt").string());
    EXPECT_EQ(ok.code, 0);
    EXPECT_EQ(ok.out, "ok: werner-ppt\n");
}

TEST(Binary, EveryScenarioWritesDocumentedCsv) {
    const fs::path d = scratch("all");
    for (const auto& s : registry()) {
        const Proc p = openq_cmd("run " + s.name + " --seed 3 --set K=500 --out " + d.string());
        if (s.name != "trajectories-vs-lindblad" && s.name != "stochastic-schrodinger") {
            // K is only a parameter of the stochastic scenarios
            EXPECT_EQ(p.code, 3) << s.name;
            const Proc q = openq_cmd("run " + s.name + " --out " + d.string());
            ASSERT_EQ(q.code, 0) << s.name << ": " << q.err;
        } else {
            ASSERT_EQ(p.code, 0) << s.name << ": " << p.err;
        }
        const std::string csv = slurp(d / (s.name + ".csv"));
        EXPECT_EQ(csv.find('\r'), std::string::npos);
        EXPECT_EQ(csv.find("nan"), std::string::npos) << s.name;
        const auto rows = parse_csv(csv);
        ASSERT_GE(rows.size(), 2u) << s.name;
        for (const auto& r : rows) EXPECT_EQ(r.size(), rows[0].size()) << s.name;
        const std::string summary = slurp(d / (s.name + ".summary.txt"));
        EXPECT_EQ(summary.rfind("scenario = " + s.name + "\n", 0), 0u) << s.name;
    }
}

TEST(Binary, ConfigFileAndCommandLineAgree) {
    const fs::path d = scratch("agree");
    std::ofstream(d / "jc.json") << R"({"scenario": "jc-comparison", "out": ")" + (d / "a").string() +
                                        R"(", "params": {"tau_M": 0.2}, "time": {"t_end": 4, "points": 41}})";
    ASSERT_EQ(openq_cmd("run " + (d / "jc.json").string()).code, 0);
    ASSERT_EQ(openq_cmd("run jc-comparison --set tau_M=0.2 --set t_end=4 --set points=41 --out " + (d / "b").string()).code, 0);
    const std::string a = slurp(d / "a" / "jc-comparison.csv");
    EXPECT_EQ(a, slurp(d / "b" / "jc-comparison.csv"));
    EXPECT_EQ(a.substr(0, a.find('\n')), "t,exact,markov,tcl2,tcl4,nz2");
    EXPECT_EQ(parse_csv(a).size(), 42u);
}

TEST(Binary, ByteReproducibleAcrossRunsAndThreadCounts) {
    const fs::path d = scratch("repro");
    const std::string args = "run trajectories-vs-lindblad --seed 99 --set K=2000 --out ";
    ASSERT_EQ(openq_cmd(args + (d / "a").string(), "OPENQ_THREADS=1").code, 0);
    ASSERT_EQ(openq_cmd(args + (d / "b").string(), "OPENQ_THREADS=4").code, 0);
    ASSERT_EQ(openq_cmd(args + (d / "c").string()).code, 0);
    const std::string a = slurp(d / "a" / "trajectories-vs-lindblad.csv");
    EXPECT_FALSE(a.empty());
    EXPECT_EQ(a, slurp(d / "b" / "trajectories-vs-lindblad.csv"));
    EXPECT_EQ(a, slurp(d / "c" / "trajectories-vs-lindblad.csv"));
    EXPECT_EQ(slurp(d / "a" / "trajectories-vs-lindblad.summary.txt"), slurp(d / "c" / "trajectories-vs-lindblad.summary.txt"));
    ASSERT_EQ(openq_cmd("run trajectories-vs-lindblad --seed 100 --set K=2000 --out " + (d / "e").string()).code, 0);
    EXPECT_NE(a, slurp(d / "e" / "trajectories-vs-lindblad.csv"));
}
