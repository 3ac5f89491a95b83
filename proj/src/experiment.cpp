#include "wavelab/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "json.hpp"
#include "wavelab/mollify.hpp"
#include "wavelab/norms.hpp"
#include "wavelab/surface.hpp"

namespace wavelab {

using Json = nlohmann::ordered_json;

std::string to_string(ExperimentKind k) {
    switch (k) {
    case ExperimentKind::cauchy: return "cauchy";
    case ExperimentKind::goursat: return "goursat";
    case ExperimentKind::mollify_check: return "mollify-check";
    case ExperimentKind::convergence: return "convergence";
    case ExperimentKind::estimate_constants: return "estimate-constants";
    }
    return "unknown";
}

ExperimentKind parse_experiment(const std::string& name) {
    for (auto k : {ExperimentKind::cauchy, ExperimentKind::goursat, ExperimentKind::mollify_check,
                   ExperimentKind::convergence, ExperimentKind::estimate_constants}) {
        if (name == to_string(k)) return k;
    }
    throw WavelabError("unknown experiment '" + name + "'");
}

std::string to_string(RateFlag f) {
    switch (f) {
    case RateFlag::ok: return "ok";
    case RateFlag::unreliable: return "unreliable";
    case RateFlag::exact: return "exact";
    }
    return "unknown";
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
    const std::string t = trim(text);
    T value{};
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
    if (t.empty() || ec != std::errc{} || ptr != t.data() + t.size()) {
        throw WavelabError("config: bad value '" + text + "' for " + key);
    }
    return value;
}

template <class T>
std::vector<T> parse_list(const std::string& key, const std::string& text) {
    std::string s = text;
    std::replace(s.begin(), s.end(), ',', ' ');
    std::istringstream in(s);
    std::vector<T> out;
    std::string tok;
    while (in >> tok) out.push_back(parse_number<T>(key, tok));
    if (out.empty()) throw WavelabError("config: empty list for " + key);
    return out;
}

template <class T>
std::string join(const std::vector<T>& v) {
    std::ostringstream os;
    os << std::setprecision(17);
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
    return os.str();
}

bool contains(const std::vector<std::string>& names, const std::string& n) {
    return std::find(names.begin(), names.end(), n) != names.end();
}

std::string resolved_data(const ExperimentConfig& c) {
    if (c.data != "default") return c.data;
    if (c.experiment == ExperimentKind::goursat) {
        return c.catalog == "flat1d" && c.surface == "cone" ? "oracle" : "cos";
    }
    return "exact";
}

GridPtr make_grid(int dim, int n) { return PeriodicGrid::make(std::vector<int>(static_cast<std::size_t>(dim), n)); }

double surface_reach(const CharacteristicSurface& s) {
    return std::max(std::abs(s.phi.min()), std::abs(s.phi.max()));
}

}  // namespace

void apply_setting(ExperimentConfig& c, const std::string& raw_key, const std::string& value) {
    std::string key = trim(raw_key);
    std::replace(key.begin(), key.end(), '-', '_');
    const std::string v = trim(value);
    if (key == "experiment") c.experiment = parse_experiment(v);
    else if (key == "catalog") c.catalog = v;
    else if (key == "surface") c.surface = v;
    else if (key == "grid") c.grid = parse_list<int>(key, v);
    else if (key == "T") c.T = parse_number<double>(key, v);
    else if (key == "lambda_schedule") c.lambda_schedule = parse_list<double>(key, v);
    else if (key == "gap_tolerance") c.gap_tolerance = parse_number<double>(key, v);
    else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, v);
    else if (key == "out" || key == "output_dir") c.output_dir = v;
    else if (key == "data") c.data = v;
    else if (key == "cfl") c.cfl = parse_number<double>(key, v);
    else if (key == "scheme") c.scheme = parse_scheme(v);
    else if (key == "ensemble") c.ensemble = parse_number<int>(key, v);
    else if (key == "levels") c.levels = parse_list<int>(key, v);
    else throw WavelabError("config: unknown key '" + raw_key + "'");
}

void apply_config_text(ExperimentConfig& c, std::istream& in) {
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        if (trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw WavelabError("config line " + std::to_string(number) + ": expected key=value");
        }
        apply_setting(c, line.substr(0, eq), line.substr(eq + 1));
    }
}

void apply_config_file(ExperimentConfig& c, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw WavelabError("cannot read config file " + path.string());
    apply_config_text(c, in);
}

std::string describe(const ExperimentConfig& c) {
    std::ostringstream os;
    os << std::setprecision(17);
    os << "experiment=" << to_string(c.experiment) << "\n"
       << "catalog=" << c.catalog << "\n"
       << "surface=" << c.surface << "\n"
       << "grid=" << join(c.grid) << "\n"
       << "T=" << c.T << "\n"
       << "lambda_schedule=" << join(c.lambda_schedule) << "\n"
       << "gap_tolerance=" << c.gap_tolerance << "\n"
       << "seed=" << c.seed << "\n"
       << "out=" << c.output_dir.string() << "\n"
       << "data=" << c.data << "\n"
       << "cfl=" << c.cfl << "\n"
       << "scheme=" << to_string(c.scheme) << "\n"
       << "ensemble=" << c.ensemble << "\n"
       << "levels=" << join(c.levels) << "\n";
    return os.str();
}

void ExperimentConfig::validate() const {
    if (!contains(catalog_names(), catalog)) throw WavelabError("config: unknown catalog '" + catalog + "'");
    if (!contains(surface_names(), surface)) throw WavelabError("config: unknown surface '" + surface + "'");
    if (grid.empty()) throw WavelabError("config: grid is empty");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (grid[i] < 8) throw WavelabError("config: grid sizes must be >= 8");
        if (i > 0 && grid[i] <= grid[i - 1]) throw WavelabError("config: grid sizes must be ascending");
    }
    if (!(T > 0.0)) throw WavelabError("config: T must be positive");
    if (!(cfl > 0.0 && cfl <= 1.0)) throw WavelabError("config: cfl must lie in (0, 1]");
    if (!(gap_tolerance >= 0.0)) throw WavelabError("config: gap_tolerance must be >= 0");
    if (lambda_schedule.empty()) throw WavelabError("config: lambda_schedule is empty");
    for (std::size_t i = 0; i < lambda_schedule.size(); ++i) {
        if (!(lambda_schedule[i] > 0.0 && lambda_schedule[i] < 1.0)) {
            throw WavelabError("config: lambda values must lie in (0, 1)");
        }
        if (i > 0 && !(lambda_schedule[i] > lambda_schedule[i - 1])) {
            throw WavelabError("config: lambda_schedule must be strictly increasing");
        }
    }
    for (std::size_t i = 0; i < levels.size(); ++i) {
        if (levels[i] < 1 || (i > 0 && levels[i] <= levels[i - 1])) {
            throw WavelabError("config: levels must be ascending and >= 1");
        }
    }
    if (levels.empty()) throw WavelabError("config: levels is empty");
    const std::string d = resolved_data(*this);
    switch (experiment) {
    case ExperimentKind::cauchy:
    case ExperimentKind::convergence:
        if (d != "exact" && d != "zero") throw WavelabError("config: data must be exact or zero");
        if (experiment == ExperimentKind::convergence && grid.size() < 3) {
            throw WavelabError("config: convergence needs at least 3 grid sizes");
        }
        break;
    case ExperimentKind::goursat:
        if (d != "oracle" && d != "constant" && d != "zero" && d != "cos") {
            throw WavelabError("config: data must be oracle, constant, zero or cos");
        }
        if (d == "oracle" && (catalog != "flat1d" || surface != "cone")) {
            throw WavelabError("config: oracle data needs catalog flat1d and surface cone");
        }
        break;
    case ExperimentKind::mollify_check: break;
    case ExperimentKind::estimate_constants: {
        if (ensemble < 8) throw WavelabError("config: ensemble must be >= 8");
        const CatalogEntry e = wavelab::catalog(catalog);
        for (int n : grid) {
            const auto s = surface_catalog(surface, make_grid(e.dim, n), e.metric);
            if (!(T > surface_reach(s))) {
                std::ostringstream msg;
                msg << "config: estimate-constants needs T > max |phi| = " << surface_reach(s);
                throw WavelabError(msg.str());
            }
        }
        break;
    }
    }
}

std::vector<RateRow> convergence_study(const std::string& quantity, const std::vector<double>& sizes,
                                       const std::vector<double>& errors, double stability) {
    if (sizes.size() != errors.size()) throw WavelabError("convergence_study: size mismatch");
    std::vector<RateRow> rows;
    if (sizes.size() < 2) return rows;
    const bool exact = std::all_of(errors.begin(), errors.end(), [](double e) { return e == 0.0; });
    bool monotone = true;
    for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
        RateRow r;
        r.quantity = quantity;
        r.coarse = sizes[i];
        r.fine = sizes[i + 1];
        r.error_coarse = errors[i];
        r.error_fine = errors[i + 1];
        if (exact) {
            r.flag = RateFlag::exact;
        } else if (errors[i] > 0.0 && errors[i + 1] > 0.0) {
            r.order = std::log2(errors[i] / errors[i + 1]) / std::log2(sizes[i + 1] / sizes[i]);
        } else {
            r.order = std::numeric_limits<double>::quiet_NaN();
        }
        if (!exact && !(errors[i + 1] < errors[i])) monotone = false;
        rows.push_back(r);
    }
    if (exact) return rows;
    bool stable = true;
    for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
        if (!(std::abs(rows[i + 1].order - rows[i].order) <= stability)) stable = false;
    }
    if (!monotone || !stable) {
        for (auto& r : rows) r.flag = RateFlag::unreliable;
    }
    return rows;
}

bool ExperimentResult::passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

namespace {

double finite_or_nan(double v) { return std::isfinite(v) ? v : std::numeric_limits<double>::quiet_NaN(); }

Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json numbers(const std::vector<double>& v) {
    Json a = Json::array();
    for (double x : v) a.push_back(number(x));
    return a;
}

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(6) << v;
    return os.str();
}

/// Collects the four output tables and the manifest of one experiment.
class Outputs {
public:
    explicit Outputs(const ExperimentConfig& c) : config_(c) {
        const std::string tag = " experiment=" + to_string(c.experiment) + " catalog=" + c.catalog;
        energy_ << std::setprecision(12) << "# wavelab energy v1" << tag << "\n" << "n,t,energy,bound,margin\n";
        rates_ << std::setprecision(12) << "# wavelab rates v1" << tag << "\n"
               << "quantity,coarse,fine,error_coarse,error_fine,order,flag\n";
        trace_ << std::setprecision(12) << "# wavelab trace v1" << tag << " surface=" << c.surface << "\n";
        runs_ = Json::array();
        rate_rows_ = Json::array();
    }

    void energy(int n, const EnergyReport& r) {
        const auto m = r.margins();
        for (std::size_t i = 0; i < r.times.size(); ++i) {
            energy_ << n << ',' << r.times[i] << ',' << r.energies[i] << ',' << r.bound_curve[i] << ',' << m[i]
                    << '\n';
        }
    }

    void rates(const std::vector<RateRow>& rows) {
        for (const auto& r : rows) {
            rates_ << r.quantity << ',' << r.coarse << ',' << r.fine << ',' << r.error_coarse << ','
                   << r.error_fine << ',' << finite_or_nan(r.order) << ',' << to_string(r.flag) << '\n';
            rate_rows_.push_back(Json{{"quantity", r.quantity},
                                      {"coarse", r.coarse},
                                      {"fine", r.fine},
                                      {"error_coarse", number(r.error_coarse)},
                                      {"error_fine", number(r.error_fine)},
                                      {"order", number(r.order)},
                                      {"flag", to_string(r.flag)}});
        }
    }

    std::ostream& trace() { return trace_; }
    void trace_columns(const std::string& cols) {
        trace_ << cols << "\n";
        trace_columns_written_ = true;
    }
    Json& runs() { return runs_; }

    void check(const std::string& name, bool ok, const std::string& detail) {
        checks_.push_back({name, ok, detail});
    }

    ExperimentResult finish() {
        if (!trace_columns_written_) trace_ << "x,phi,value\n";
        std::filesystem::create_directories(config_.output_dir);
        Json manifest;
        manifest["format"] = "wavelab manifest v1";
        manifest["experiment"] = to_string(config_.experiment);
        Json cfg;
        std::istringstream lines(describe(config_));
        std::string line;
        while (std::getline(lines, line)) {
            const auto eq = line.find('=');
            if (line.substr(0, eq) == "out") continue;
            cfg[line.substr(0, eq)] = line.substr(eq + 1);
        }
        manifest["config"] = cfg;
        manifest["runs"] = runs_;
        manifest["rates"] = rate_rows_;
        Json checks = Json::array();
        for (const auto& c : checks_) {
            checks.push_back(Json{{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
        }
        manifest["checks"] = checks;
        ExperimentResult result{checks_};
        manifest["passed"] = result.passed();
        write("manifest.json", manifest.dump(2) + "\n");
        write("energy.csv", energy_.str());
        write("trace.csv", trace_.str());
        write("rates.csv", rates_.str());
        return result;
    }

private:
    void write(const std::string& name, const std::string& text) const {
        const auto path = config_.output_dir / name;
        std::ofstream out(path, std::ios::binary);
        out << text;
        if (!out) throw WavelabError("cannot write " + path.string());
    }

    const ExperimentConfig& config_;
    std::ostringstream energy_, rates_, trace_;
    bool trace_columns_written_ = false;
    Json runs_, rate_rows_;
    std::vector<CheckResult> checks_;
};

SolverConfig solver_config(const ExperimentConfig& c) {
    SolverConfig s;
    s.cfl_fraction = c.cfl;
    s.scheme = c.scheme;
    return s;
}

std::string grid_label(int n) { return "N=" + std::to_string(n); }

Json energy_json(const EnergyReport& r) { return Json{{"k1", r.k1}, {"max_violation", number(r.max_violation)}}; }

/// A tolerated 5% overshoot of the estimate.
bool energy_ok(const EnergyReport& r) { return r.max_violation >= -0.05; }

void write_trace_rows(Outputs& out, const CharacteristicSurface& s, const std::vector<const GridFunction*>& cols,
                      const std::string& names) {
    const auto& grid = s.grid();
    out.trace_columns(std::string(grid.dim() == 1 ? "x" : "x,y") + ",phi," + names);
    for (std::size_t n = 0; n < grid.size(); ++n) {
        const Point x = grid.node_position(n);
        out.trace() << x[0];
        if (grid.dim() > 1) out.trace() << ',' << x[1];
        out.trace() << ',' << s.phi[n];
        for (const auto* c : cols) out.trace() << ',' << (*c)[n];
        out.trace() << '\n';
    }
}

struct CauchyRun {
    int n = 0;
    Trajectory traj;
    EnergyReport energy;
    double error = 0.0;
    std::optional<double> reduced_drift;
};

CauchyRun cauchy_run(const ExperimentConfig& c, const CatalogEntry& e, int n) {
    const GridPtr grid = make_grid(e.dim, n);
    const bool zero = resolved_data(c) == "zero";
    if (!zero && !e.exact) throw WavelabError("catalog problem has no exact solution");
    auto at = [&](const std::function<double(double, const Point&)>& f, double t) {
        return zero ? GridFunction(grid, 0.0) : GridFunction::sample(grid, [&](const Point& x) { return f(t, x); });
    };
    StateVector data{at(zero ? nullptr : e.exact->u, 0.0), at(zero ? nullptr : e.exact->ut, 0.0), 0.0};
    const Source f = zero ? Source{} : Source(e.exact->f);
    SolverConfig sc = solver_config(c);
    sc.window = TimeWindow{-c.T, c.T};
    CauchyRun r;
    r.n = n;
    r.traj = solve_cauchy(data, sc, e.metric, e.op, f);
    r.energy = energy_monitor(r.traj, e.metric, e.op, f);
    for (const auto& st : r.traj.states) {
        const GridFunction diff = zero ? st.u : st.u - at(e.exact->u, st.time);
        r.error = std::max(r.error, hk_norm(diff, 0));
    }
    if (e.op.is_zero() && !f && e.metric.static_in_time()) {
        const double e0 = reduced_energy(r.traj.states.front(), e.metric);
        double drift = 0.0;
        for (const auto& st : r.traj.states) drift = std::max(drift, std::abs(reduced_energy(st, e.metric) - e0));
        r.reduced_drift = e0 > 0.0 ? drift / e0 : drift;
    }
    return r;
}

Json cauchy_json(const CauchyRun& r) {
    Json j{{"n", r.n},
           {"dt", r.traj.dt},
           {"stored_states", r.traj.states.size()},
           {"aborted", r.traj.aborted},
           {"diagnostic", r.traj.diagnostic},
           {"error_l2", number(r.error)},
           {"energy", energy_json(r.energy)}};
    if (r.reduced_drift) j["reduced_energy_drift"] = number(*r.reduced_drift);
    return j;
}

void cauchy_checks(Outputs& out, const CauchyRun& r) {
    out.check(grid_label(r.n) + " solve completed", !r.traj.aborted, r.traj.diagnostic);
    out.check(grid_label(r.n) + " energy estimate", energy_ok(r.energy),
              "max_violation=" + fmt(r.energy.max_violation) + " k1=" + fmt(r.energy.k1));
    if (r.reduced_drift) {
        out.check(grid_label(r.n) + " reduced energy drift", *r.reduced_drift < 1e-4,
                  "relative drift=" + fmt(*r.reduced_drift));
    }
}

void trace_of(Outputs& out, const ExperimentConfig& c, const CatalogEntry& e, const Trajectory& traj) {
    CharacteristicSurface s;
    try {
        s = surface_catalog(c.surface, traj.grid(), e.metric);
    } catch (const WavelabError&) {
        return;
    }
    const TimeWindow w = traj.window();
    if (!w.contains(s.phi.min(), 1e-12) || !w.contains(s.phi.max(), 1e-12)) return;
    const GridFunction psi = trace_on_surface(traj, s);
    const GridFunction rate = trace_rate_on_surface(traj, s);
    write_trace_rows(out, s, {&psi, &rate}, "trace,trace_rate");
}

void run_cauchy(const ExperimentConfig& c, Outputs& out) {
    const CatalogEntry e = catalog(c.catalog);
    std::vector<double> sizes, errors;
    for (int n : c.grid) {
        CauchyRun r = cauchy_run(c, e, n);
        out.runs().push_back(cauchy_json(r));
        out.energy(n, r.energy);
        cauchy_checks(out, r);
        sizes.push_back(n);
        errors.push_back(r.error);
        if (n == c.grid.back()) trace_of(out, c, e, r.traj);
    }
    out.rates(convergence_study("u_l2", sizes, errors));
}

void run_convergence(const ExperimentConfig& c, Outputs& out) {
    const CatalogEntry e = catalog(c.catalog);
    std::vector<double> sizes, errors, drifts;
    const bool derived = e.metric.regularity() == Regularity::smooth;
    bool derived_ok = true;
    for (int n : c.grid) {
        CauchyRun r = cauchy_run(c, e, n);
        Json j = cauchy_json(r);
        out.energy(n, r.energy);
        cauchy_checks(out, r);
        sizes.push_back(n);
        errors.push_back(r.error);
        if (derived) {
            const GridPtr grid = make_grid(e.dim, n);
            const GridFunction u0 = r.traj.interpolate(0.0).u;
            const GridFunction u1 = r.traj.interpolate(0.0).ut;
            SolverConfig sc = solver_config(c);
            sc.window = TimeWindow{0.0, c.T};
            const DerivedTrajectory d = solve_derived_system(u0, u1, sc, e.metric);
            const double drift = d.drift.empty() ? 0.0 : *std::max_element(d.drift.begin(), d.drift.end());
            drifts.push_back(drift);
            j["derived"] = Json{{"max_drift", number(drift)}, {"allowed", d.expected}, {"failed", d.failed}};
            const bool ok = !d.failed && drift <= d.expected;
            derived_ok = derived_ok && ok;
            out.check(grid_label(n) + " derived system consistency", ok,
                      "drift=" + fmt(drift) + " allowed=" + fmt(d.expected));
        }
        out.runs().push_back(j);
        if (n == c.grid.back()) trace_of(out, c, e, r.traj);
    }
    const auto rows = convergence_study("u_l2", sizes, errors);
    out.rates(rows);
    if (!drifts.empty()) out.rates(convergence_study("derived_drift", sizes, drifts));
    const RateRow& last = rows.back();
    if (resolved_data(c) == "zero") {
        out.check("errors vanish", last.flag == RateFlag::exact, "flag=" + to_string(last.flag));
        return;
    }
    const Regularity reg = e.metric.regularity();
    if (reg == Regularity::lipschitz || reg == Regularity::bounded) {
        out.check("observed order (rough coefficients)", last.order >= 0.8, "p=" + fmt(last.order));
    } else {
        bool ok = true;
        std::string detail;
        for (const auto& r : rows) {
            ok = ok && r.flag == RateFlag::ok && r.order >= 1.8 && r.order <= 2.2;
            detail += (detail.empty() ? "" : " ") + std::string("p=") + fmt(r.order) + "(" + to_string(r.flag) + ")";
        }
        out.check("observed order", ok, detail);
    }
}

/// Periodic data consistent with u = F(x - t) + G(x + t) on the flat cone
/// phi = |x| around the vertex at 0: F(y) = sin y, G(y) = cos(2 y) / 2.
GridFunction oracle_data(const GridPtr& grid) {
    return GridFunction::sample(grid, [](const Point& p) {
        const double x = p[0];
        return x <= std::numbers::pi ? 0.5 * std::cos(4.0 * x) : std::sin(2.0 * x) + 0.5;
    });
}

GridFunction goursat_data(const std::string& kind, const GridPtr& grid) {
    if (kind == "oracle") return oracle_data(grid);
    if (kind == "constant") return GridFunction(grid, 0.7);
    if (kind == "zero") return GridFunction(grid, 0.0);
    return GridFunction::sample(grid, [](const Point& x) { return std::cos(x[0]); });
}

void run_goursat(const ExperimentConfig& c, Outputs& out) {
    const CatalogEntry e = catalog(c.catalog);
    const std::string kind = resolved_data(c);
    std::vector<double> sizes, finals;
    for (int n : c.grid) {
        const GridPtr grid = make_grid(e.dim, n);
        const CharacteristicSurface s = surface_catalog(c.surface, grid, e.metric);
        const GridFunction v = goursat_data(kind, grid);
        GoursatConfig gc;
        gc.solver = solver_config(c);
        gc.lambda_schedule = c.lambda_schedule;
        gc.gap_tolerance = c.gap_tolerance;
        const GoursatResult r = solve_goursat(v, s, e.metric, e.op, gc);
        const MetricField& g = *r.trajectory.metric;
        const EnergyReport rep = energy_monitor(r.trajectory, g, r.trajectory.op);
        double sup_e = 0.0;
        for (const auto& st : r.trajectory.states) sup_e = std::max(sup_e, energy(st, g));
        Json j{{"n", n},
               {"classification", to_string(classify(s, e.metric))},
               {"kinks", s.kink_count()},
               {"mollifier_level", r.mollifier_level},
               {"lambda_schedule", numbers(r.lambda_schedule)},
               {"successive_h1_gaps", numbers(r.successive_h1_gaps)},
               {"stage_roundtrip_l2", numbers(r.stage_roundtrip_l2)},
               {"stage_roundtrip_h1", numbers(r.stage_roundtrip_h1)},
               {"stage_steps", r.stage_steps},
               {"roundtrip_l2", number(r.roundtrip_l2)},
               {"roundtrip_h1", number(r.roundtrip_h1)},
               {"relative", r.relative},
               {"sup_energy", number(sup_e)},
               {"warning", r.warning},
               {"warning_message", r.warning_message},
               {"energy", energy_json(rep)}};
        if (kind == "oracle") {
            // Exact Cauchy data at t0 = max phi from F(x - t) + G(x + t).
            const double t0 = s.phi.max();
            const GridFunction u = GridFunction::sample(grid, [t0](const Point& x) {
                return std::sin(x[0] - t0) + 0.5 * std::cos(2.0 * (x[0] + t0));
            });
            const GridFunction ut = GridFunction::sample(grid, [t0](const Point& x) {
                return -std::cos(x[0] - t0) - std::sin(2.0 * (x[0] + t0));
            });
            j["cauchy_data_error"] = Json{{"u_l2_rel", hk_norm(r.cauchy_data.u - u, 0) / hk_norm(u, 0)},
                                          {"ut_l2_rel", hk_norm(r.cauchy_data.ut - ut, 0) / hk_norm(ut, 0)}};
        }
        out.runs().push_back(j);
        out.energy(n, rep);
        out.check(grid_label(n) + " schedule completed", !r.warning, r.warning_message);
        out.check(grid_label(n) + " energy estimate", energy_ok(rep), "max_violation=" + fmt(rep.max_violation));
        if (kind == "constant") {
            double worst = 0.0;
            for (std::size_t i = 0; i < r.stage_roundtrip_l2.size(); ++i) {
                worst = std::max({worst, r.stage_roundtrip_l2[i], r.stage_roundtrip_h1[i]});
            }
            out.check(grid_label(n) + " constant data reproduced", worst < 1e-10, "max roundtrip=" + fmt(worst));
        } else if (kind == "zero") {
            out.check(grid_label(n) + " zero data gives zero solution", sup_e < 1e-8, "sup energy=" + fmt(sup_e));
        }
        sizes.push_back(n);
        finals.push_back(r.roundtrip_l2);
        if (n == c.grid.back()) {
            const GridFunction trace = trace_on_surface(r.trajectory, s);
            write_trace_rows(out, s, {&v, &trace}, "data,trace");
        }
    }
    out.rates(convergence_study("roundtrip_l2", sizes, finals));
    if (kind == "oracle" || kind == "cos") {
        bool decreasing = true;
        for (std::size_t i = 0; i + 1 < finals.size(); ++i) decreasing = decreasing && finals[i + 1] <= 1.1 * finals[i];
        std::string detail;
        for (double f : finals) detail += (detail.empty() ? "" : " ") + fmt(f);
        out.check("roundtrip decreases under refinement (10% slack)", decreasing, detail);
        out.check("roundtrip on the finest grid below 5e-2", finals.back() < 5e-2, fmt(finals.back()));
    }
}

struct RoughField {
    std::string name;
    std::function<double(const Point&)> f;
};

std::vector<RoughField> rough_fields(int dim) {
    using std::abs;
    using std::sin;
    const double pi = std::numbers::pi;
    if (dim == 1) {
        return {{"abs_sin", [](const Point& x) { return abs(sin(x[0])); }},
                {"tent", [pi](const Point& x) { return abs(x[0] - pi) - 0.5 * pi; }}};
    }
    return {{"abs_sin_product", [](const Point& x) { return abs(sin(x[0]) * sin(x[1])); }},
            {"tent_sum", [pi](const Point& x) { return abs(x[0] - pi) + abs(x[1] - pi) - pi; }}};
}

void run_mollify(const ExperimentConfig& c, Outputs& out) {
    const CatalogEntry e = catalog(c.catalog);
    const CatalogEntry flat = catalog(e.dim == 1 ? "flat1d" : "flat2d");
    for (int n : c.grid) {
        const GridPtr grid = make_grid(e.dim, n);
        // Levels whose support radius is under two spacings degenerate to the
        // identity on this grid.
        std::vector<int> used, dropped;
        for (int k : c.levels) {
            (default_base_radius(*grid) / k >= 2.0 * grid->min_spacing() ? used : dropped).push_back(k);
        }
        const std::vector<double> levels(used.begin(), used.end());
        Json fields = Json::array();
        if (used.size() < 2) {
            out.check(grid_label(n) + " resolved mollifier levels", false, "fewer than two levels resolved");
            out.runs().push_back(Json{{"n", n}, {"levels", used}, {"unresolved_levels", dropped}});
            continue;
        }
        for (const auto& rf : rough_fields(e.dim)) {
            const GridFunction w = GridFunction::sample(grid, rf.f, 0.0);
            const FieldFamily family{w};
            std::vector<double> errors, defects, bounds;
            double flat_defect = 0.0;
            for (int k : used) {
                const FieldFamily wk = mollify_space(family, k);
                errors.push_back(hk_norm(wk[0] - w, 1));
                const CommutatorDefect d = commutator_defect(e.metric, family, k, 0.0);
                defects.push_back(d.l2_norm);
                bounds.push_back(d.bound);
                flat_defect = std::max(flat_defect, commutator_defect(flat.metric, family, k, 0.0).l2_norm);
            }
            fields.push_back(Json{{"field", rf.name},
                                  {"levels", used},
                                  {"h1_error", numbers(errors)},
                                  {"commutator_l2", numbers(defects)},
                                  {"commutator_bound", numbers(bounds)},
                                  {"constant_coefficient_defect", flat_defect}});
            const std::string label = grid_label(n) + " " + rf.name;
            bool decreasing = true;
            for (std::size_t i = 0; i + 1 < errors.size(); ++i) decreasing = decreasing && errors[i + 1] < errors[i];
            out.check(label + " mollification error decreasing", decreasing,
                      "h1 errors " + fmt(errors.front()) + " .. " + fmt(errors.back()));
            bool bounded = true;
            double sup = 0.0;
            for (std::size_t i = 0; i < defects.size(); ++i) {
                bounded = bounded && std::isfinite(defects[i]) && defects[i] <= bounds[i];
                sup = std::max(sup, defects[i]);
            }
            out.check(label + " commutator bound", bounded, "sup_k defect=" + fmt(sup) + " bound=" + fmt(bounds.front()));
            out.check(label + " constant coefficients commute", flat_defect < 1e-12, "defect=" + fmt(flat_defect));
            out.rates(convergence_study("mollify_h1_" + rf.name + "_" + grid_label(n), levels, errors));
        }
        out.runs().push_back(Json{{"n", n}, {"unresolved_levels", dropped}, {"fields", fields}});
    }
}

void run_constants(const ExperimentConfig& c, Outputs& out) {
    const CatalogEntry e = catalog(c.catalog);
    std::vector<double> k2, k3;
    for (int n : c.grid) {
        const GridPtr grid = make_grid(e.dim, n);
        const CharacteristicSurface s = surface_catalog(c.surface, grid, e.metric);
        const TraceConstants tc = estimate_trace_constants(e.metric, e.op, s, c.T, c.ensemble, c.seed,
                                                           solver_config(c));
        out.runs().push_back(Json{{"n", n},
                                  {"k2", number(tc.k2)},
                                  {"k3", number(tc.k3)},
                                  {"ratios", numbers(tc.ratios)},
                                  {"energy", Json{{"k1", tc.k1}, {"max_violation", number(tc.max_violation)}}}});
        out.check(grid_label(n) + " constants finite", std::isfinite(tc.k2) && std::isfinite(tc.k3),
                  "k2=" + fmt(tc.k2) + " k3=" + fmt(tc.k3));
        out.check(grid_label(n) + " energy estimate", tc.max_violation >= -0.05,
                  "max_violation=" + fmt(tc.max_violation));
        k2.push_back(tc.k2);
        k3.push_back(tc.k3);
    }
    for (std::size_t i = 0; i + 1 < k2.size(); ++i) {
        const double d2 = std::abs(k2[i + 1] - k2[i]) / k2[i];
        const double d3 = std::abs(k3[i + 1] - k3[i]) / k3[i];
        out.check(grid_label(c.grid[i]) + " to " + grid_label(c.grid[i + 1]) + " drift below 20%",
                  d2 < 0.2 && d3 < 0.2, "k2 drift=" + fmt(d2) + " k3 drift=" + fmt(d3));
    }
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
    config.validate();
    Outputs out(config);
    switch (config.experiment) {
    case ExperimentKind::cauchy: run_cauchy(config, out); break;
    case ExperimentKind::convergence: run_convergence(config, out); break;
    case ExperimentKind::goursat: run_goursat(config, out); break;
    case ExperimentKind::mollify_check: run_mollify(config, out); break;
    case ExperimentKind::estimate_constants: run_constants(config, out); break;
    }
    return out.finish();
}

}  // namespace wavelab
