#pragma once
// Scenario runner behind the `openq` executable: config parsing and validation,
// the scenario registry, and deterministic CSV / summary output.
// Needs the vendored nlohmann json.hpp on the include path.

#include <algorithm>
#include <charconv>
#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "json.hpp"
#include "openq/channels.hpp"
#include "openq/davies.hpp"
#include "openq/errors.hpp"
#include "openq/exactmodels.hpp"
#include "openq/lindblad.hpp"
#include "openq/numkit.hpp"
#include "openq/parallel.hpp"
#include "openq/pmme.hpp"
#include "openq/states.hpp"
#include "openq/trajectories.hpp"

namespace openq::cli {

using json = nlohmann::json;

// Unknown scenario or malformed command line: exit code 2.
struct usage_error : error {
    using error::error;
};

enum ExitCode { exit_ok = 0, exit_usage = 2, exit_validation = 3, exit_numerical = 4 };

// ---- formatting ------------------------------------------------------------------------

// %.17g never consults the locale's decimal point for the "C" locale, which is all we ever run under.
inline std::string fmt17(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

using Cell = std::variant<double, std::string>;

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;
    std::set<std::string> divergence_columns;  // columns allowed to carry nan/inf

    void add(std::vector<Cell> row) {
        if (row.size() != columns.size()) throw numerical_error("scenario produced a row of the wrong width");
        rows.push_back(std::move(row));
    }
};

inline std::string to_csv(const Table& t) {
    std::string out;
    for (std::size_t i = 0; i < t.columns.size(); ++i) out += (i ? "," : "") + t.columns[i];
    out += '\n';
    for (const auto& row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out += ',';
            if (const double* d = std::get_if<double>(&row[i])) {
                if (!std::isfinite(*d) && !t.divergence_columns.count(t.columns[i]))
                    throw numerical_error("non-finite value in column '" + t.columns[i] + "'");
                out += fmt17(*d);
            } else {
                out += std::get<std::string>(row[i]);
            }
        }
        out += '\n';
    }
    return out;
}

struct Summary {
    std::vector<std::pair<std::string, std::string>> lines;
    void add(const std::string& k, double v) { lines.emplace_back(k, fmt17(v)); }
    void add(const std::string& k, const std::string& v) { lines.emplace_back(k, v); }
    std::string text() const {
        std::string out;
        for (const auto& [k, v] : lines) out += k + " = " + v + '\n';
        return out;
    }
};

struct ScenarioResult {
    Table table;
    Summary summary;
};

// ---- configuration ---------------------------------------------------------------------

struct TimeGrid {
    double t_start = 0;
    double t_end = 1;
    int points = 101;

    void validate() const {
        if (!std::isfinite(t_start) || !std::isfinite(t_end)) throw validation_error("time grid: bounds must be finite");
        if (!(t_start >= 0)) throw validation_error("time grid: t_start must be >= 0");
        if (!(t_end > t_start)) throw validation_error("time grid: t_end must exceed t_start");
        if (points < 2) throw validation_error("time grid: points must be >= 2");
    }
    std::vector<double> values() const {
        std::vector<double> t(static_cast<std::size_t>(points));
        for (int i = 0; i < points; ++i) t[i] = t_start + (t_end - t_start) * i / (points - 1);
        t.back() = t_end;
        return t;
    }
};

struct ScenarioConfig {
    std::string name;
    json params = json::object();  // numbers and strings only
    std::optional<std::uint64_t> seed;
    std::string out = ".";
    std::optional<double> t_start, t_end;
    std::optional<int> points;
};

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

// "1.5" -> number, anything else stays a string.
inline json parse_scalar(const std::string& text) {
    const std::string s = trim(text);
    if (!s.empty()) {
        char* end = nullptr;
        errno = 0;
        const double v = std::strtod(s.c_str(), &end);
        if (end == s.c_str() + s.size() && errno == 0 && std::isfinite(v)) return v;
    }
    return s;
}

inline std::uint64_t parse_seed(const json& v) {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<long long>() >= 0) return static_cast<std::uint64_t>(v.get<long long>());
    if (v.is_number_float()) {
        const double d = v.get<double>();
        if (d >= 0 && d == std::floor(d) && d < 1.8e19) return static_cast<std::uint64_t>(d);
    }
    if (v.is_string()) {
        const std::string s = trim(v.get<std::string>());
        if (!s.empty() && s.find_first_not_of("0123456789") == std::string::npos) {
            errno = 0;
            const unsigned long long x = std::strtoull(s.c_str(), nullptr, 10);
            if (errno == 0) return x;
        }
    }
    throw validation_error("seed must be a non-negative integer");
}

inline double as_number(const json& v, const std::string& key) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
        const json p = parse_scalar(v.get<std::string>());
        if (p.is_number()) return p.get<double>();
    }
    throw validation_error("'" + key + "' must be a number");
}

inline int as_int(const json& v, const std::string& key) {
    const double d = as_number(v, key);
    if (d != std::floor(d) || std::abs(d) > 2e9) throw validation_error("'" + key + "' must be an integer");
    return static_cast<int>(d);
}

// Reserved keys shared by the flat format and --set.
inline void assign_key(ScenarioConfig& c, const std::string& key, const json& value) {
    if (key.empty()) throw validation_error("empty key");
    if (key == "scenario") {
        if (!value.is_string()) throw validation_error("'scenario' must be a string");
        c.name = value.get<std::string>();
    } else if (key == "seed") {
        c.seed = parse_seed(value);
    } else if (key == "out") {
        c.out = value.is_string() ? value.get<std::string>() : value.dump();
    } else if (key == "t_start") {
        c.t_start = as_number(value, key);
    } else if (key == "t_end") {
        c.t_end = as_number(value, key);
    } else if (key == "points") {
        c.points = as_int(value, key);
    } else {
        if (!value.is_number() && !value.is_string()) throw validation_error("parameter '" + key + "' must be a number or string");
        c.params[key] = value;
    }
}

inline void apply_assignment(ScenarioConfig& c, const std::string& kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw validation_error("expected key=value, got '" + kv + "'");
    assign_key(c, trim(kv.substr(0, eq)), parse_scalar(kv.substr(eq + 1)));
}

// JSON: {"scenario": ..., "seed": ..., "out": ..., "params": {...}, "time": {"t_start", "t_end", "points"}}.
inline ScenarioConfig parse_json_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw validation_error(std::string("config: invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw validation_error("config: top level must be an object");
    ScenarioConfig c;
    for (const auto& [key, value] : j.items()) {
        if (key == "params") {
            if (!value.is_object()) throw validation_error("config: 'params' must be an object");
            for (const auto& [pk, pv] : value.items()) {
                if (pk == "scenario" || pk == "seed" || pk == "out" || pk == "t_start" || pk == "t_end" || pk == "points")
                    throw validation_error("config: '" + pk + "' is not a scenario parameter");
                assign_key(c, pk, pv);
            }
        } else if (key == "time") {
            if (!value.is_object()) throw validation_error("config: 'time' must be an object");
            for (const auto& [tk, tv] : value.items()) {
                if (tk != "t_start" && tk != "t_end" && tk != "points") throw validation_error("config: unknown time key '" + tk + "'");
                assign_key(c, tk, tv);
            }
        } else if (key == "scenario" || key == "seed" || key == "out") {
            assign_key(c, key, value);
        } else {
            throw validation_error("config: unknown top-level key '" + key + "'");
        }
    }
    return c;
}

// Flat: one key=value per line; '#' starts a comment.
inline ScenarioConfig parse_flat_config(const std::string& text) {
    ScenarioConfig c;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        apply_assignment(c, line);
    }
    return c;
}

inline ScenarioConfig parse_config(const std::string& text) {
    const std::string t = trim(text);
    return (!t.empty() && t[0] == '{') ? parse_json_config(t) : parse_flat_config(t);
}

inline ScenarioConfig load_config(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw usage_error("cannot read config file '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str());
}

// ---- scenario schema -------------------------------------------------------------------

struct ParamSpec {
    enum class Kind { number, integer, text };
    std::string name;
    Kind kind = Kind::number;
    json def;
    std::string help;
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    bool lo_open = false;  // lo itself excluded
    std::vector<std::string> choices;
};

inline ParamSpec num(std::string n, double def, std::string help, double lo = -std::numeric_limits<double>::infinity(),
                     double hi = std::numeric_limits<double>::infinity(), bool lo_open = false) {
    ParamSpec p;
    p.name = std::move(n);
    p.def = def;
    p.help = std::move(help);
    p.lo = lo;
    p.hi = hi;
    p.lo_open = lo_open;
    return p;
}
inline ParamSpec positive(std::string n, double def, std::string help) {
    return num(std::move(n), def, std::move(help), 0.0, std::numeric_limits<double>::infinity(), true);
}
inline ParamSpec integer(std::string n, int def, std::string help, int lo, int hi) {
    ParamSpec p = num(std::move(n), def, std::move(help), lo, hi);
    p.kind = ParamSpec::Kind::integer;
    return p;
}
inline ParamSpec text(std::string n, std::string def, std::string help, std::vector<std::string> choices = {}) {
    ParamSpec p;
    p.name = std::move(n);
    p.kind = ParamSpec::Kind::text;
    p.def = std::move(def);
    p.help = std::move(help);
    p.choices = std::move(choices);
    return p;
}

class Context;

struct Scenario {
    std::string name;
    std::string description;
    std::vector<ParamSpec> params;
    bool stochastic = false;                  // requires a seed
    std::optional<TimeGrid> grid;             // default time grid, if the scenario uses one
    std::function<ScenarioResult(const Context&)> run;
};

// Validated view of a config for one scenario.
class Context {
public:
    Context(const Scenario& s, const ScenarioConfig& c) : scenario_(s), config_(c) {
        for (const auto& [k, v] : c.params.items()) {
            (void)v;
            const bool known = std::any_of(s.params.begin(), s.params.end(), [&](const ParamSpec& p) { return p.name == k; });
            if (!known) throw validation_error(s.name + ": unknown parameter '" + k + "'");
        }
        for (const auto& p : s.params) {
            const json v = c.params.contains(p.name) ? c.params.at(p.name) : p.def;
            if (p.kind == ParamSpec::Kind::text) {
                if (!v.is_string()) throw validation_error(s.name + ": '" + p.name + "' must be a string");
                const std::string sv = v.get<std::string>();
                if (!p.choices.empty() && std::find(p.choices.begin(), p.choices.end(), sv) == p.choices.end())
                    throw validation_error(s.name + ": '" + p.name + "' must be one of the listed choices");
                values_[p.name] = sv;
                continue;
            }
            const double d = p.kind == ParamSpec::Kind::integer ? as_int(v, p.name) : as_number(v, p.name);
            if (!std::isfinite(d) || d < p.lo || d > p.hi || (p.lo_open && d == p.lo))
                throw validation_error(s.name + ": '" + p.name + "' is out of range");
            values_[p.name] = d;
        }
        if (s.stochastic && !c.seed) throw validation_error(s.name + ": a seed is required for this stochastic scenario");
        if (s.grid) {
            grid_ = *s.grid;
            if (c.t_start) grid_.t_start = *c.t_start;
            if (c.t_end) grid_.t_end = *c.t_end;
            if (c.points) grid_.points = *c.points;
            grid_.validate();
        } else if (c.t_start || c.t_end || c.points) {
            throw validation_error(s.name + ": this scenario has no time grid");
        }
    }

    double number(const std::string& k) const { return values_.at(k).get<double>(); }
    int integer(const std::string& k) const { return static_cast<int>(values_.at(k).get<double>()); }
    long long big(const std::string& k) const { return static_cast<long long>(values_.at(k).get<double>()); }
    std::string text(const std::string& k) const { return values_.at(k).get<std::string>(); }
    std::uint64_t seed() const { return config_.seed.value_or(0); }
    const TimeGrid& grid() const { return grid_; }
    std::vector<double> times() const { return grid_.values(); }

private:
    const Scenario& scenario_;
    const ScenarioConfig& config_;
    std::map<std::string, json> values_;
    TimeGrid grid_;
};

// ---- scenarios -------------------------------------------------------------------------

namespace scenarios {

inline ComplexVector plus_state() { return (ket(2, 0) + ket(2, 1)) / std::sqrt(2.0); }

inline std::vector<double> parse_list(const std::string& s, const std::string& key) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const json v = parse_scalar(item);
        if (!v.is_number()) throw validation_error("'" + key + "' must be a comma-separated list of numbers");
        out.push_back(v.get<double>());
    }
    if (out.empty()) throw validation_error("'" + key + "' must not be empty");
    return out;
}

inline ScenarioResult werner_ppt(const Context& c) {
    const int n = c.integer("samples");
    ScenarioResult r;
    r.table.columns = {"p", "min_pt_eig"};
    double first_negative = std::numeric_limits<double>::quiet_NaN();
    for (int i = 0; i < n; ++i) {
        const double p = double(i) / (n - 1);
        const double m = ppt_min_eig(werner_state(p), 2, 2);
        if (m < 0 && std::isnan(first_negative)) first_negative = p;
        r.table.add({p, m});
    }
    const double crossing = brent_root([](double p) { return ppt_min_eig(werner_state(p), 2, 2); }, 0.0, 1.0, 1e-14);
    r.summary.add("p_crossing", crossing);
    r.summary.add("p_crossing_expected", 1.0 / 3.0);
    r.summary.add("first_negative_grid_p", first_negative);
    r.summary.add("bell_pt_min_eig", ppt_min_eig(bell_phi_plus(), 2, 2));
    return r;
}

inline ScenarioResult bloch_channel_geometry(const Context& c) {
    const double p = c.number("p"), q = c.number("q");
    const std::vector<std::pair<std::string, KrausMap>> chans = {
        {"phase_damping", phase_damping(p)},         {"bit_flip", bit_flip(p)},
        {"bit_phase_flip", bit_phase_flip(p)},       {"depolarizing", depolarizing(p)},
        {"amplitude_damping", amplitude_damping(p)}, {"generalized_amplitude_damping", generalized_amplitude_damping(p, q)}};
    ScenarioResult r;
    r.table.columns = {"channel", "M_xx", "M_xy", "M_xz", "M_yx", "M_yy", "M_yz", "M_zx", "M_zy", "M_zz", "c_x", "c_y", "c_z", "choi_min_eig"};
    for (const auto& [name, map] : chans) {
        const AffineBlochMap a = bloch_affine(map);
        std::vector<Cell> row{name};
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) row.push_back(a.M(i, j));
        for (int i = 0; i < 3; ++i) row.push_back(a.c(i));
        row.push_back(choi_min_eig(choi_matrix(map)));
        r.table.add(std::move(row));
        const Eigen::Vector3d ax = Eigen::JacobiSVD<Eigen::Matrix3d>(a.M).singularValues();
        r.summary.add(name + ".semi_axes", fmt17(ax(0)) + " " + fmt17(ax(1)) + " " + fmt17(ax(2)));
        r.summary.add(name + ".centre_z", a.c(2));
    }
    return r;
}

inline ScenarioResult zz_dephasing_purity(const Context& c) {
    const double lambda = c.number("lambda"), p0 = c.number("bath_p0");
    const ComplexMatrix b = c.text("coupling") == "zz" ? pauli_z() : pauli_x();
    const ComplexMatrix hsb = lambda * tensor_product(pauli_z(), b);
    ComplexMatrix bath = zeros(2, 2);
    bath(0, 0) = p0;
    bath(1, 1) = 1 - p0;
    const DensityMatrix rho_b(bath);
    const DensityMatrix rho_s = DensityMatrix::pure(plus_state());
    ScenarioResult r;
    r.table.columns = {"t", "re_f", "im_f", "purity"};
    double min_purity = 2, t_min = 0;
    for (double t : c.times()) {
        const ComplexMatrix u = matrix_exp(ComplexMatrix(-I_unit * t * hsb));
        const ComplexMatrix rho = openq::apply(kraus_from_joint_unitary(u, rho_b), rho_s.matrix());
        const cplx f = 2.0 * rho(0, 1);
        const double pur = purity(rho);
        if (pur < min_purity) {
            min_purity = pur;
            t_min = t;
        }
        r.table.add({t, f.real(), f.imag(), pur});
    }
    r.summary.add("min_purity", min_purity);
    r.summary.add("t_at_min_purity", t_min);
    return r;
}

inline ScenarioResult lindblad_channel(const Context& c, bool amplitude) {
    const double g = c.number("gamma");
    const LindbladGenerator gen(zeros(2, 2), {{g, amplitude ? sigma_plus() : pauli_z()}});
    const DensityMatrix rho0 = DensityMatrix::pure(plus_state());
    ScenarioResult r;
    r.table.columns = {"t", "rho00", "rho11", "re_rho01", "purity", "kraus_p", "choi_distance"};
    double worst = 0;
    for (double t : c.times()) {
        const ComplexMatrix rho = evolve(gen, rho0, t).matrix();
        const double p = amplitude ? -std::expm1(-g * t) : 0.5 * (1 + std::exp(-2 * g * t));
        const KrausMap k = amplitude ? amplitude_damping(p) : phase_damping(p);
        const LinearMap phi = [&](const ComplexMatrix& x) { return evolve_operator(gen, x, t); };
        const double dist = max_abs_diff(choi_matrix(phi, 2), choi_matrix(k));
        worst = std::max(worst, dist);
        r.table.add({t, rho(0, 0).real(), rho(1, 1).real(), rho(0, 1).real(), purity(rho), p, dist});
    }
    r.summary.add("gamma", g);
    r.summary.add(amplitude ? "T1" : "T2", amplitude ? 1 / g : 1 / (2 * g));
    r.summary.add("max_choi_distance", worst);
    return r;
}

inline LindbladGenerator qubit_channel_generator(const std::string& channel, double g) {
    return LindbladGenerator(zeros(2, 2), {{g, channel == "amplitude" ? sigma_plus() : pauli_z()}});
}

inline ScenarioResult trajectories_vs_lindblad(const Context& c) {
    const LindbladGenerator gen = qubit_channel_generator(c.text("channel"), c.number("gamma"));
    const ComplexVector psi0 = plus_state();
    const auto times = c.times();
    const auto est = ensemble_series(gen, psi0, times, c.big("K"), c.seed());
    ScenarioResult r;
    r.table.columns = {"t", "lindblad_rho11", "traj_rho11", "lindblad_re_rho01", "traj_re_rho01", "trace_distance", "stderr"};
    double worst_ratio = 0, worst_gap = 0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        const ComplexMatrix exact = evolve(gen, DensityMatrix::pure(psi0), times[i]).matrix();
        const ComplexMatrix& m = est[i].mean.matrix();
        const double td = trace_distance(exact, m);
        const double se = std::hypot(est[i].std_error(0, 0), est[i].std_error(0, 1));
        worst_gap = std::max(worst_gap, td);
        if (se > 0) worst_ratio = std::max(worst_ratio, td / se);
        r.table.add({times[i], exact(1, 1).real(), m(1, 1).real(), exact(0, 1).real(), m(0, 1).real(), td, se});
    }
    r.summary.add("K", static_cast<double>(c.big("K")));
    r.summary.add("seed", std::to_string(c.seed()));
    r.summary.add("max_trace_distance", worst_gap);
    r.summary.add("max_gap_over_stderr", worst_ratio);
    r.summary.add("within_5_stderr", worst_ratio < 5 ? "yes" : "no");
    return r;
}

inline ScenarioResult stochastic_schrodinger(const Context& c) {
    const double g = c.number("gamma"), omega = c.number("omega"), dt = c.number("dt");
    const LindbladGenerator gen(0.5 * omega * pauli_z(), {{g, pauli_z()}});
    const ComplexVector psi0 = plus_state();
    const auto times = c.times();
    const long K = static_cast<long>(c.big("K"));
    std::vector<std::vector<ComplexVector>> samples(static_cast<std::size_t>(K));
    parallel_for(samples.size(), [&](std::size_t k) {
        Rng rng(c.seed(), k);
        ComplexVector psi = psi0;
        double t = 0;
        for (double target : times) {
            const double span = target - t;
            if (span > 0) {
                const long n = std::max<long>(1, static_cast<long>(std::ceil(span / dt - 1e-9)));
                for (long s = 0; s < n; ++s) psi = stochastic_schrodinger_step(gen, psi, span / n, rng);
                psi /= psi.norm();
            }
            t = target;
            samples[k].push_back(psi);
        }
    });
    ScenarioResult r;
    r.table.columns = {"t", "lindblad_re_rho01", "sse_re_rho01", "lindblad_im_rho01", "sse_im_rho01", "stderr"};
    double worst_ratio = 0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        std::vector<ComplexVector> at;
        at.reserve(samples.size());
        for (const auto& s : samples) at.push_back(s[i]);
        const EnsembleEstimate e = ensemble_from_states(at);
        const ComplexMatrix exact = evolve(gen, DensityMatrix::pure(psi0), times[i]).matrix();
        const double se = e.std_error(0, 1);
        const double gap = std::abs(exact(0, 1) - e.mean.matrix()(0, 1));
        if (se > 0) worst_ratio = std::max(worst_ratio, gap / se);
        r.table.add({times[i], exact(0, 1).real(), e.mean.matrix()(0, 1).real(), exact(0, 1).imag(), e.mean.matrix()(0, 1).imag(), se});
    }
    r.summary.add("K", static_cast<double>(K));
    r.summary.add("seed", std::to_string(c.seed()));
    r.summary.add("max_gap_over_stderr", worst_ratio);
    r.summary.add("within_5_stderr", worst_ratio < 5 ? "yes" : "no");
    return r;
}

inline std::string tau_label(double tau) {
    std::string s = fmt17(tau);
    std::replace(s.begin(), s.end(), '.', 'p');
    return s;
}

inline ScenarioResult cg_vs_exact_dephasing(const Context& c) {
    const DephasingWeight wt = debye_weight(c.number("C"), c.number("omega_c"));
    const auto taus = parse_list(c.text("taus"), "taus");
    for (double tau : taus)
        if (!(tau > 0)) throw validation_error("cg-vs-exact-dephasing: every tau must be positive");
    ScenarioResult r;
    r.table.columns = {"t", "exact"};
    for (double tau : taus) r.table.columns.push_back("markov_tau_" + tau_label(tau));
    std::vector<double> rates;
    for (double tau : taus) rates.push_back(cg_dephasing_gamma(tau, wt));
    for (double t : c.times()) {
        std::vector<Cell> row{t, gamma_exact_curve(t, wt)};
        for (double g : rates) row.push_back(2 * g * t);
        r.table.add(std::move(row));
    }
    for (std::size_t i = 0; i < taus.size(); ++i) {
        const double tc = cg_crossing_time(taus[i], wt);
        r.summary.add("tau_" + tau_label(taus[i]) + ".gamma", rates[i]);
        r.summary.add("tau_" + tau_label(taus[i]) + ".crossing_time", tc);
        r.summary.add("tau_" + tau_label(taus[i]) + ".relative_offset", std::abs(tc - taus[i]) / taus[i]);
    }
    return r;
}

inline ScenarioResult davies_wcl_vs_scl(const Context& c) {
    const double wx = c.number("omega_x"), g = c.number("g");
    const BathSpectrum spec = ohmic_spectrum(c.number("eta"), c.number("omega_c"), c.number("beta"), c.integer("lamb_shift") != 0);
    const ComplexMatrix hs = -0.5 * wx * pauli_x();
    DaviesOptions opt;
    opt.lamb_shift = c.integer("lamb_shift") != 0;
    const LindbladGenerator wcl = davies_generator(hs, pauli_z(), spec, g, opt);
    const LindbladGenerator scl = scl_generator(hs, pauli_z(), spec, g, opt.lamb_shift);
    const DensityMatrix rho0 = DensityMatrix::pure(ket(2, 0));
    ScenarioResult r;
    r.table.columns = {"t", "wcl_x", "wcl_z", "scl_x", "scl_z", "trace_distance"};
    for (double t : c.times()) {
        const DensityMatrix a = evolve(wcl, rho0, t), b = evolve(scl, rho0, t);
        const BlochVector va = bloch_decode(a), vb = bloch_decode(b);
        r.table.add({t, va(0), va(2), vb(0), vb(2), trace_distance(a, b)});
    }
    const QubitTimes q = qubit_relaxation_times(wcl, hs);
    r.summary.add("wcl.T1", q.T1);
    r.summary.add("wcl.T2", q.T2);
    r.summary.add("wcl.T2_over_T1", q.T2 / q.T1);
    const DensityMatrix gibbs = gibbs_state(hs, c.number("beta"));
    r.summary.add("wcl.gibbs_residual", max_abs(rhs(wcl, gibbs.matrix())));
    r.summary.add("scl.gibbs_residual", max_abs(rhs(scl, gibbs.matrix())));
    return r;
}

inline ScenarioResult ohmic_spectrum_scan(const Context& c) {
    const double eta = c.number("eta"), wc = c.number("omega_c"), beta = c.number("beta"), wmax = c.number("omega_max");
    const int n = c.integer("samples");
    const bool with_s = c.integer("lamb_shift") != 0;
    auto gam = [=](double w) { return ohmic_gamma(w, eta, wc, beta); };
    ScenarioResult r;
    r.table.columns = {"omega", "gamma", "kms_residual"};
    if (with_s) r.table.columns.push_back("S");
    double worst = 0;
    for (int i = 0; i < n; ++i) {
        const double w = -wmax + 2 * wmax * i / (n - 1);
        const double gw = gam(w);
        // relative KMS residual of gamma(-w) = e^{-beta w} gamma(w)
        const double res = std::abs(gam(-w) - std::exp(-beta * w) * gw) / std::max(gam(-w), 1e-300);
        worst = std::max(worst, res);
        std::vector<Cell> row{w, gw, res};
        if (with_s) row.push_back(lamb_shift_S(gam, w, wc));
        r.table.add(std::move(row));
    }
    r.summary.add("gamma_0", gam(0));
    r.summary.add("gamma_0_expected", 2 * pi * eta / beta);
    r.summary.add("max_kms_residual", worst);
    return r;
}

inline ScenarioResult collective_dephasing_scaling(const Context& c) {
    const int nmax = c.integer("n_max");
    const double g0 = c.number("gamma0");
    ScenarioResult r;
    r.table.columns = {"n", "independent_ghz_rate", "collective_ghz_rate", "ratio"};
    std::vector<double> ind, col;
    for (int n = 1; n <= nmax; ++n) {
        const int last = (1 << n) - 1;
        const double a = dephasing_scaling(n, DephasingMode::independent, g0)(0, last);
        const double b = dephasing_scaling(n, DephasingMode::collective, g0)(0, last);
        ind.push_back(a);
        col.push_back(b);
        r.table.add({double(n), a, b, b / a});
    }
    if (nmax >= 2) {
        const double ln = std::log(double(nmax));
        r.summary.add("independent_exponent", std::log(ind.back() / ind.front()) / ln);
        r.summary.add("collective_exponent", std::log(col.back() / col.front()) / ln);
    }
    return r;
}

inline ScenarioResult jc_comparison(const Context& c) {
    const JCParams p{c.number("tau_B"), c.number("tau_M")};
    const double rho0 = c.number("rho11_0");
    const Tcl4Form form = c.text("tcl4_form") == "printed" ? Tcl4Form::printed : Tcl4Form::series;
    const JcScheme schemes[] = {JcScheme::exact, JcScheme::markov, JcScheme::tcl2, JcScheme::tcl4, JcScheme::nz2};
    ScenarioResult r;
    r.table.columns = {"t"};
    for (JcScheme s : schemes) r.table.columns.push_back(jc_scheme_name(s));
    double dev[5] = {0, 0, 0, 0, 0};
    for (double t : c.times()) {
        std::vector<Cell> row{t};
        const double ex = jc_approx(p, t, JcScheme::exact, rho0, form);
        for (int k = 0; k < 5; ++k) {
            const double v = jc_approx(p, t, schemes[k], rho0, form);
            dev[k] = std::max(dev[k], std::abs(v - ex));
            row.push_back(v);
        }
        r.table.add(std::move(row));
    }
    r.summary.add("alpha2", p.alpha2());
    r.summary.add("regime", p.weak() ? "weak" : "strong");
    for (int k = 1; k < 5; ++k) r.summary.add(std::string(jc_scheme_name(schemes[k])) + ".max_deviation", dev[k]);
    const double t_end = c.grid().t_end;
    r.summary.add("exact.first_zero", jc_first_c1_zero(p, t_end));
    r.summary.add("nz2.first_negative", jc_nz2_first_negative(p, t_end));
    r.summary.add("tcl4_form", form == Tcl4Form::printed ? "printed" : "series");
    return r;
}

// Phase damping with coherence eigenvalue -gamma: rate gamma/2 on Z.
inline LindbladGenerator pmme_dephasing_generator(double gamma) { return LindbladGenerator(zeros(2, 2), {{gamma / 2, pauli_z()}}); }

inline ScenarioResult pmme_phase_damping(const Context& c) {
    const double g = c.number("gamma"), A = c.number("A"), a = c.number("a");
    const Kernel laplace_kernel = Kernel::from_laplace([A, a](cplx s) { return A / (s + a); });
    const Kernel kernel = Kernel::exponential(A, a);
    const LindbladGenerator gen = pmme_dephasing_generator(g);
    const DampingBasis basis = damping_basis(gen);
    const ComplexMatrix rho0 = projector(plus_state());
    ScenarioResult r;
    r.table.columns = {"t", "xi_closed", "xi_laplace", "bloch_x", "bloch_x_markov"};
    double worst = 0;
    for (double t : c.times()) {
        const double xc = pmme_xi_phase_damping(g, A, a, t);
        const double xl = pmme_xi(laplace_kernel, cplx(-g), t).real();
        worst = std::max(worst, std::abs(xc - xl));
        const ComplexMatrix rho = pmme_evolve_operator(basis, kernel, rho0, t);
        r.table.add({t, xc, xl, 2 * rho(0, 1).real(), std::exp(-g * t)});
    }
    if (worst > 1e-6)
        throw numerical_error("pmme-phase-damping: Laplace inversion misses the closed form by " + fmt17(worst) +
                              "; the kernel poles lie beyond the contour's reach");
    const double q = 4 * g * A - (g + a) * (g + a);
    r.summary.add("regime", q > 0 ? "oscillatory" : (q < 0 ? "monotone" : "critical"));
    r.summary.add("omega", q > 0 ? 0.5 * std::sqrt(q) : 0.0);
    r.summary.add("max_laplace_error", worst);
    return r;
}

inline ScenarioResult pmme_cp_boundary(const Context& c) {
    const double g = c.number("gamma"), A = c.number("A"), a = c.number("a");
    const Kernel kernel = Kernel::exponential(A, a);
    const DampingBasis basis = damping_basis(pmme_dephasing_generator(g));
    auto min_eig = [&](double t) { return pmme_cp_test(basis, pmme_xi_all(basis, kernel, t)).min_eig; };
    // the Choi matrix of a dephasing map always has a zero eigenvalue, so CP loss means strictly negative
    const double tol = 1e-12;
    auto violated = [&](double t) { return min_eig(t) < -tol; };
    ScenarioResult r;
    r.table.columns = {"t", "xi", "choi_min_eig", "cp"};
    double prev_t = 0;
    double boundary = std::numeric_limits<double>::quiet_NaN();
    bool first = true;
    for (double t : c.times()) {
        const double m = min_eig(t);
        if (!first && std::isnan(boundary) && m < -tol && !violated(prev_t)) {
            double lo = prev_t, hi = t;
            while (hi - lo > 1e-13 * std::max(1.0, hi)) {
                const double mid = 0.5 * (lo + hi);
                (violated(mid) ? hi : lo) = mid;
            }
            boundary = hi;
        }
        r.table.add({t, pmme_xi_phase_damping(g, A, a, t), m, m >= -tol ? 1.0 : 0.0});
        prev_t = t;
        first = false;
    }
    if (std::isnan(boundary)) {
        r.summary.add("cp_violation", "none on the grid");
    } else {
        r.summary.add("cp_violation", "yes");
        r.summary.add("boundary_time", boundary);
        r.summary.add("xi_at_boundary", pmme_xi_phase_damping(g, A, a, boundary));
        r.summary.add("choi_min_eig_at_boundary", min_eig(boundary));
    }
    return r;
}

inline ScenarioResult pauli_detailed_balance(const Context& c) {
    const auto e = parse_list(c.text("energies"), "energies");
    const int d = static_cast<int>(e.size());
    if (d < 2) throw validation_error("pauli-detailed-balance: at least two energies are required");
    ComplexMatrix hs = zeros(d, d), a = zeros(d, d);
    for (int i = 0; i < d; ++i) {
        hs(i, i) = e[i];
        for (int j = 0; j < d; ++j)
            if (i != j) a(i, j) = 1.0;
    }
    const double beta = c.number("beta");
    const BathSpectrum spec = ohmic_spectrum(c.number("eta"), c.number("omega_c"), beta, false);
    const LindbladGenerator gen = davies_generator(hs, a, spec, c.number("g"));
    const PauliMaster pm = pauli_master(hs, gen);
    ScenarioResult r;
    r.table.columns = {"a", "b", "energy_gap", "w_up", "w_down", "ratio", "boltzmann", "residual"};
    double worst = 0;
    for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j) {
            // pm levels are ascending, W(x, y) = rate y -> x
            const double gap = pm.energies(j) - pm.energies(i);
            const double up = pm.W(j, i), down = pm.W(i, j);
            const double ratio = up / down, boltz = std::exp(-beta * gap);
            worst = std::max(worst, std::abs(ratio - boltz));
            r.table.add({double(i), double(j), gap, up, down, ratio, boltz, std::abs(ratio - boltz)});
        }
    const RealVector ps = pm.stationary();
    RealVector gibbs(d);
    for (int i = 0; i < d; ++i) gibbs(i) = std::exp(-beta * (pm.energies(i) - pm.energies(0)));
    gibbs /= gibbs.sum();
    r.summary.add("max_detailed_balance_residual", worst);
    r.summary.add("stationary_vs_gibbs", (ps - gibbs).cwiseAbs().maxCoeff());
    return r;
}

}  // namespace scenarios

inline const std::vector<Scenario>& registry() {
    using namespace scenarios;
    static const std::vector<Scenario> reg = [] {
        std::vector<Scenario> v;
        v.push_back({"werner-ppt", "Partial-transpose minimum eigenvalue of the Werner state over p in [0, 1]",
                     {integer("samples", 1001, "sweep points", 2, 1000000)}, false, std::nullopt, werner_ppt});
        v.push_back({"bloch-channel-geometry", "Affine Bloch-sphere map (M, c) of the standard qubit channels",
                     {num("p", 0.3, "channel parameter", 0, 1), num("q", 0.5, "generalized AD ground weight", 0, 1)},
                     false, std::nullopt, bloch_channel_geometry});
        v.push_back({"zz-dephasing-purity", "Qubit coupled to a bath qubit: coherence factor f and purity over time",
                     {num("lambda", 1.0, "coupling strength"), num("bath_p0", 0.7, "bath ground population", 0, 1),
                      text("coupling", "zz", "bath operator in Z(x)B", {"zz", "zx"})},
                     false, TimeGrid{0, pi, 201}, zz_dephasing_purity});
        v.push_back({"lindblad-phase-damping", "Phase-damping Lindblad evolution against its Kraus form",
                     {num("gamma", 1.0, "rate on Z", 0)}, false, TimeGrid{0, 5, 101},
                     [](const Context& c) { return lindblad_channel(c, false); }});
        v.push_back({"lindblad-amplitude-damping", "Amplitude-damping Lindblad evolution against its Kraus form",
                     {num("gamma", 1.0, "decay rate", 0)}, false, TimeGrid{0, 5, 101},
                     [](const Context& c) { return lindblad_channel(c, true); }});
        v.push_back({"trajectories-vs-lindblad", "Quantum-jump ensemble against the master-equation solution",
                     {text("channel", "amplitude", "dissipator", {"amplitude", "phase"}), num("gamma", 1.0, "rate", 0),
                      integer("K", 10000, "trajectories", 1, 100000000)},
                     true, TimeGrid{0, 2, 11}, trajectories_vs_lindblad});
        v.push_back({"stochastic-schrodinger", "White-noise unraveling of dephasing against the master equation",
                     {num("gamma", 1.0, "rate on Z", 0), num("omega", 1.0, "qubit splitting"),
                      positive("dt", 0.01, "step size"), integer("K", 2000, "trajectories", 1, 100000000)},
                     true, TimeGrid{0, 2, 21}, stochastic_schrodinger});
        v.push_back({"cg-vs-exact-dephasing", "Coarse-grained Markovian exponents against the exact dephasing exponent",
                     {num("C", 0.05, "Debye strength", 0), positive("omega_c", 1.0, "bath cutoff"),
                      text("taus", "5,10,20", "coarse-graining times, comma separated")},
                     false, TimeGrid{0, 40, 161}, cg_vs_exact_dephasing});
        v.push_back({"davies-wcl-vs-scl", "Weak-coupling (Davies) against singular-coupling generator for H=-(w_x/2)X, A=Z",
                     {positive("omega_x", 1.0, "qubit splitting"), positive("eta", 0.05, "Ohmic strength"),
                      positive("omega_c", 5.0, "bath cutoff"), positive("beta", 1.0, "inverse temperature"),
                      num("g", 1.0, "coupling"), integer("lamb_shift", 1, "include the Lamb shift (0 or 1)", 0, 1)},
                     false, TimeGrid{0, 20, 101}, davies_wcl_vs_scl});
        v.push_back({"ohmic-spectrum", "Ohmic bath rate gamma(w), its KMS residual and optional Lamb shift S(w)",
                     {positive("eta", 0.1, "Ohmic strength"), positive("omega_c", 1.0, "bath cutoff"),
                      positive("beta", 1.0, "inverse temperature"), positive("omega_max", 5.0, "sweep half-width"),
                      integer("samples", 201, "sweep points", 2, 1000000), integer("lamb_shift", 0, "add the S column (0 or 1)", 0, 1)},
                     false, std::nullopt, ohmic_spectrum_scan});
        v.push_back({"collective-dephasing-scaling", "GHZ coherence decay rate for independent versus collective dephasing",
                     {integer("n_max", 8, "largest qubit count", 1, 10), positive("gamma0", 1.0, "single-qubit rate")},
                     false, std::nullopt, collective_dephasing_scaling});
        v.push_back({"jc-comparison", "Jaynes-Cummings excited population: exact, Markov, TCL2, TCL4 and NZ2",
                     {positive("tau_B", 1.0, "bath memory time"), positive("tau_M", 5.0, "Markovian decay time"),
                      num("rho11_0", 1.0, "initial excited population", 0, 1),
                      text("tcl4_form", "printed", "TCL4 rate form", {"printed", "series"})},
                     false, TimeGrid{0, 10, 201}, jc_comparison});
        v.push_back({"pmme-phase-damping", "Post-Markovian phase damping with an exponential kernel: closed form against Laplace inversion",
                     {positive("gamma", 1.0, "coherence decay rate"), num("A", 1.0, "kernel amplitude"), num("a", 0.5, "kernel decay")},
                     false, TimeGrid{0, 6, 121}, pmme_phase_damping});
        v.push_back({"pmme-cp-boundary", "Choi minimum eigenvalue of the post-Markovian map and the CP boundary",
                     {positive("gamma", 1.0, "coherence decay rate"), num("A", 1.0, "kernel amplitude"), num("a", -1.5, "kernel decay")},
                     false, TimeGrid{0, 6, 241}, pmme_cp_boundary});
        v.push_back({"pauli-detailed-balance", "Pauli rates of a Davies generator against the Boltzmann factor",
                     {text("energies", "0,1,2.5", "nondegenerate levels, comma separated"), positive("eta", 0.1, "Ohmic strength"),
                      positive("omega_c", 5.0, "bath cutoff"), positive("beta", 1.0, "inverse temperature"), num("g", 1.0, "coupling")},
                     false, std::nullopt, pauli_detailed_balance});
        std::sort(v.begin(), v.end(), [](const Scenario& x, const Scenario& y) { return x.name < y.name; });
        return v;
    }();
    return reg;
}

inline const Scenario* find_scenario(const std::string& name) {
    for (const auto& s : registry())
        if (s.name == name) return &s;
    return nullptr;
}

inline const Scenario& require_scenario(const std::string& name) {
    if (name.empty()) throw usage_error("config does not name a scenario");
    const Scenario* s = find_scenario(name);
    if (!s) throw usage_error("unknown scenario '" + name + "' (see `openq list`)");
    return *s;
}

// Shortest round-trip form; listings are for people, CSVs use fmt17.
inline std::string spec_default(const ParamSpec& p) {
    if (p.kind == ParamSpec::Kind::text) return p.def.get<std::string>();
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof buf, p.def.get<double>());
    return std::string(buf, res.ptr);
}

inline std::string list_text() {
    std::string out;
    for (const auto& s : registry()) {
        out += s.name + "\n    " + s.description + "\n    required: " + (s.stochastic ? "seed" : "none") + "\n    params:";
        if (s.params.empty()) out += " none";
        for (const auto& p : s.params) out += " " + p.name + "=" + spec_default(p);
        out += '\n';
        if (s.grid)
            out += "    time grid: t_start=" + fmt17(s.grid->t_start) + " t_end=" + fmt17(s.grid->t_end) +
                   " points=" + std::to_string(s.grid->points) + '\n';
    }
    return out;
}

// Validates without running; throws usage_error / validation_error.
inline void validate_config(const ScenarioConfig& c) { Context(require_scenario(c.name), c); }

inline ScenarioResult run_in_memory(const ScenarioConfig& c) {
    const Scenario& s = require_scenario(c.name);
    const Context ctx(s, c);
    return s.run(ctx);
}

struct RunOutput {
    std::filesystem::path csv, summary;
};

// Files are rendered fully before anything is written.
inline RunOutput run_scenario(const ScenarioConfig& c) {
    const ScenarioResult r = run_in_memory(c);
    const std::string csv = to_csv(r.table);
    const std::string summary = "scenario = " + c.name + '\n' + r.summary.text();
    const std::filesystem::path dir(c.out.empty() ? "." : c.out);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw validation_error("cannot create output directory '" + dir.string() + "'");
    RunOutput o{dir / (c.name + ".csv"), dir / (c.name + ".summary.txt")};
    for (const auto& [path, body] : {std::pair{o.csv, csv}, std::pair{o.summary, summary}}) {
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        f << body;
        if (!f) throw validation_error("cannot write '" + path.string() + "'");
    }
    return o;
}

}  // namespace openq::cli
