#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "wavelab/cauchy.hpp"
#include "wavelab/experiment.hpp"
#include "wavelab/goursat.hpp"
#include "wavelab/mollify.hpp"
#include "wavelab/norms.hpp"

using namespace wavelab;

namespace {

constexpr double pi = std::numbers::pi;

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail += (detail.empty() ? "" : "; ") + what;
        }
    }
};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

GridPtr grid_for(const CatalogEntry& e, int n) {
    return PeriodicGrid::make(std::vector<int>(static_cast<std::size_t>(e.dim), n));
}

StateVector exact_data(const CatalogEntry& e, const GridPtr& g, double t) {
    return {GridFunction::sample(g, [&](const Point& x) { return e.exact->u(t, x); }),
            GridFunction::sample(g, [&](const Point& x) { return e.exact->ut(t, x); }), t};
}

double max_non_kink(const CharacteristicSurface& s, const GridFunction& r) {
    double m = 0.0;
    for (std::size_t n = 0; n < r.size(); ++n) {
        if (!s.kink[n]) m = std::max(m, std::abs(r[n]));
    }
    return m;
}

Outcome energy_estimate() {
    Outcome o;
    double worst = 1.0;
    for (const auto& name : catalog_names()) {
        const auto e = catalog(name);
        for (int n : {128, 256}) {
            const auto g = grid_for(e, n);
            SolverConfig c;
            c.window = {-1.0, 1.0};
            const auto tr = solve_cauchy(exact_data(e, g, 0.0), c, e.metric, e.op, e.exact->f);
            o.require(!tr.aborted, name + " aborted");
            // Both directions are checked pointwise against E(s) e^{K1 |t - s|}
            // (Duhamel form when a source is present).
            const auto rep = energy_monitor(tr, e.metric, e.op, e.exact->f);
            worst = std::min(worst, rep.max_violation);
            o.require(rep.max_violation >= -0.05, name + " N=" + std::to_string(n) + " exceeds the bound");
            if (!e.exact->f && e.op.is_zero() && e.metric.static_in_time()) {
                // The homogeneous bound must also hold between every pair
                // of stored states, in both time directions.
                const double k1 = rep.k1;
                for (std::size_t i = 0; i < tr.states.size(); i += 17) {
                    const double ei = energy(tr.states[i], e.metric);
                    for (std::size_t j = 0; j < tr.states.size(); j += 23) {
                        const double ej = energy(tr.states[j], e.metric);
                        const double bound = ei * std::exp(k1 * std::abs(tr.states[j].time - tr.states[i].time));
                        o.require(ej <= 1.05 * bound, name + " pairwise bound");
                    }
                }
            }
        }
    }
    const auto e = catalog("flat1d");
    const auto g = grid_for(e, 256);
    SolverConfig c;
    c.window = {0.0, 2.0 * pi};
    const auto tr = solve_cauchy(exact_data(e, g, 0.0), c, e.metric, e.op);
    // Reduced energy of sin(x - t): int cos^2 + forward-difference gradient term.
    const double h = g->spacing(0);
    const double f = 2.0 * std::sin(0.5 * h) / h;
    const double e0 = pi + pi * f * f;
    double drift = 0.0;
    for (const auto& s : tr.states) drift = std::max(drift, std::abs(reduced_energy(s, e.metric) - e0) / e0);
    o.require(drift < 1e-4, "reduced energy drift " + num(drift));
    o.detail = "min margin " + num(worst) + ", reduced drift " + num(drift) + (o.detail.empty() ? "" : "; " + o.detail);
    return o;
}

Outcome manufactured_convergence() {
    Outcome o;
    std::string orders;
    for (const auto& name : catalog_names()) {
        const auto e = catalog(name);
        std::vector<double> errs;
        for (int n : {64, 128, 256}) {
            const auto g = grid_for(e, n);
            SolverConfig c;
            c.window = {-1.0, 1.0};
            const auto tr = solve_cauchy(exact_data(e, g, 0.0), c, e.metric, e.op, e.exact->f);
            double err = 0.0;
            for (const auto& s : tr.states) {
                const auto ex = GridFunction::sample(g, [&](const Point& x) { return e.exact->u(s.time, x); });
                err = std::max(err, hk_norm(s.u - ex, 0));
            }
            errs.push_back(err);
        }
        const double p1 = std::log2(errs[0] / errs[1]), p2 = std::log2(errs[1] / errs[2]);
        orders += " " + name + "=" + num(p1) + "/" + num(p2);
        if (e.metric.regularity() == Regularity::lipschitz) {
            o.require(p2 >= 0.8, name + " order below 0.8");
        } else {
            o.require(p1 >= 1.8 && p1 <= 2.2 && p2 >= 1.8 && p2 <= 2.2, name + " order outside [1.8, 2.2]");
        }
    }
    o.detail = "orders" + orders + (o.detail.empty() ? "" : "; " + o.detail);
    return o;
}

Outcome mollifier_suite() {
    Outcome o;
    const auto g = PeriodicGrid::make({256});
    const auto rough = catalog("lipschitz1d");
    const auto flat = catalog("flat1d");
    const std::vector<std::function<double(const Point&)>> fields{
        [](const Point& x) { return std::abs(std::sin(x[0])); },
        [](const Point& x) { return std::abs(x[0] - pi) - 0.5 * pi; },
        [](const Point& x) { return std::max(0.0, 1.0 - std::abs(x[0] - 2.0)) * std::cos(x[0]); }};
    double sup_defect = 0.0, flat_defect = 0.0, worst_ratio = 0.0;
    for (const auto& f : fields) {
        const FieldFamily w{GridFunction::sample(g, f, 0.0)};
        double prev = 1e300;
        for (int k : {2, 4, 8, 16}) {
            const double err = hk_norm(mollify_space(w, k)[0] - w[0], 1);
            o.require(err < prev, "H1 mollification error not decreasing at k=" + std::to_string(k));
            prev = err;
            const auto d = commutator_defect(rough.metric, w, k, 0.0);
            // C(rho) Lip(h) ||w||_{H^1}, with the constant of the bump computed here.
            const double lip = 0.5;
            const double c_rho = 15.0 / 8.0;
            const double bound = c_rho * lip * hk_norm(w[0], 1);
            o.require(d.l2_norm <= bound * 1.02, "commutator above bound at k=" + std::to_string(k));
            worst_ratio = std::max(worst_ratio, d.l2_norm / bound);
            sup_defect = std::max(sup_defect, d.l2_norm);
            flat_defect = std::max(flat_defect, commutator_defect(flat.metric, w, k, 0.0).l2_norm);
        }
    }
    o.require(std::isfinite(sup_defect), "sup of defects not finite");
    o.require(flat_defect < 1e-12, "constant coefficients give defect " + num(flat_defect));
    o.detail = "max defect/bound " + num(worst_ratio) + ", constant-coefficient defect " + num(flat_defect) +
               (o.detail.empty() ? "" : "; " + o.detail);
    return o;
}

Outcome null_geometry() {
    Outcome o;
    const auto flat = catalog("flat1d");
    const auto smooth = catalog("smooth1d");
    const auto flat2 = catalog("flat2d");
    double r_flat = 0.0, r_smooth = 0.0, d_flat = 0.0, d_smooth = 0.0;
    for (int n : {64, 256}) {
        const auto sf = surface_catalog("cone", grid_for(flat, n), flat.metric);
        r_flat = std::max(r_flat, max_non_kink(sf, eikonal_residual(sf, flat.metric)));
        d_flat = std::max(d_flat, max_non_kink(sf, dnu0_density(sf, flat.metric)));
        const auto ss = surface_catalog("cone", grid_for(smooth, n), smooth.metric);
        r_smooth = std::max(r_smooth, max_non_kink(ss, eikonal_residual(ss, smooth.metric)));
        d_smooth = std::max(d_smooth, max_non_kink(ss, dnu0_density(ss, smooth.metric)));
    }
    const auto s2 = surface_catalog("cone", grid_for(flat2, 48), flat2.metric);
    r_flat = std::max(r_flat, max_non_kink(s2, eikonal_residual(s2, flat2.metric)));
    d_flat = std::max(d_flat, max_non_kink(s2, dnu0_density(s2, flat2.metric)));
    o.require(r_flat < 1e-10 && d_flat < 1e-10, "flat cone residual " + num(r_flat));
    o.require(r_smooth < 1e-6 && d_smooth < 1e-6, "ODE cone residual " + num(r_smooth));
    o.detail = "flat " + num(r_flat) + ", ODE " + num(r_smooth) + (o.detail.empty() ? "" : "; " + o.detail);
    return o;
}

// Trace on phi = |x| (periodic) of u = sin(x - t) + cos(2 (x + t)) / 2.
GridFunction dalembert_trace(const GridPtr& g) {
    return GridFunction::sample(g, [](const Point& p) {
        const double x = p[0];
        const double t = x <= pi ? x : 2.0 * pi - x;
        return std::sin(x - t) + 0.5 * std::cos(2.0 * (x + t));
    });
}

Outcome goursat_roundtrip() {
    Outcome o;
    const auto e = catalog("flat1d");
    std::vector<double> finals;
    for (int n : {64, 128, 256}) {
        const auto g = grid_for(e, n);
        const auto s = surface_catalog("cone", g, e.metric);
        GoursatConfig gc;
        gc.gap_tolerance = 0.0;
        const auto r = solve_goursat(dalembert_trace(g), s, e.metric, e.op, gc);
        o.require(!r.warning, "schedule incomplete: " + r.warning_message);
        o.require(std::abs(r.lambda_schedule.back() - (1.0 - 1.0 / 256.0)) < 1e-15, "last lambda");
        finals.push_back(r.roundtrip_l2);
    }
    o.require(finals.back() < 5e-2, "N=256 roundtrip " + num(finals.back()));
    for (std::size_t i = 0; i + 1 < finals.size(); ++i) {
        o.require(finals[i + 1] <= 1.1 * finals[i], "roundtrip increases beyond 10%");
    }
    const auto g = grid_for(e, 256);
    const auto s = surface_catalog("cone", g, e.metric);
    GoursatConfig gc;
    gc.gap_tolerance = 0.0;
    const auto c = solve_goursat(GridFunction(g, -0.3), s, e.metric, e.op, gc);
    o.require(c.stage_roundtrip_l2.size() == gc.lambda_schedule.size(), "constant data skipped stages");
    double worst = 0.0;
    for (std::size_t i = 0; i < c.stage_roundtrip_l2.size(); ++i) {
        worst = std::max({worst, c.stage_roundtrip_l2[i], c.stage_roundtrip_h1[i]});
    }
    o.require(worst < 1e-10, "constant data roundtrip " + num(worst));
    o.detail = "roundtrip_l2 " + num(finals[0]) + " " + num(finals[1]) + " " + num(finals[2]) +
               ", constant " + num(worst) + (o.detail.empty() ? "" : "; " + o.detail);
    return o;
}

Outcome injectivity() {
    Outcome o;
    const auto e = catalog("flat1d");
    const auto g = grid_for(e, 256);
    const auto s = surface_catalog("cone", g, e.metric);
    const auto r = solve_goursat(GridFunction(g, 0.0), s, e.metric, e.op);
    double sup = 0.0;
    for (const auto& st : r.trajectory.states) sup = std::max(sup, energy(st, e.metric));
    o.require(sup < 1e-8, "sup energy " + num(sup));
    o.detail = "sup_t E = " + num(sup);
    return o;
}

Outcome trace_constants() {
    Outcome o;
    for (const char* name : {"flat1d", "smooth1d"}) {
        const auto e = catalog(name);
        std::vector<double> k2, k3;
        for (int n : {128, 256}) {
            const auto s = surface_catalog("cone", grid_for(e, n), e.metric);
            const double T = std::max(std::abs(s.phi.min()), std::abs(s.phi.max())) + 0.25;
            const auto k = estimate_trace_constants(e.metric, e.op, s, T, 16, 2024);
            o.require(std::isfinite(k.k2) && std::isfinite(k.k3) && k.k2 > 0.0, std::string(name) + " not finite");
            k2.push_back(k.k2);
            k3.push_back(k.k3);
        }
        const double d2 = std::abs(k2[1] - k2[0]) / k2[0], d3 = std::abs(k3[1] - k3[0]) / k3[0];
        o.require(d2 < 0.2 && d3 < 0.2, std::string(name) + " drift above 20%");
        o.detail += std::string(o.detail.empty() ? "" : ", ") + name + " K2=" + num(k2[1]) + " K3=" + num(k3[1]) +
                    " drift " + num(std::max(d2, d3));
    }
    return o;
}

Outcome foliation() {
    Outcome o;
    const auto e = catalog("flat1d");
    const auto g = grid_for(e, 256);
    const auto s = surface_catalog("cone", g, e.metric);
    SolverConfig c;
    c.window = {0.0, s.phi.max() + 1.0};
    const auto tr = solve_cauchy(exact_data(e, g, 0.0), c, e.metric, e.op);
    std::vector<double> maxima;
    for (int m : {8, 16, 32, 64}) {
        std::vector<double> times;
        for (int i = 0; i <= m; ++i) times.push_back(static_cast<double>(i) / m);
        double mx = 0.0;
        for (const auto& row : foliation_continuity(tr, s, times)) mx = std::max(mx, row.modulus);
        maxima.push_back(mx);
    }
    for (std::size_t i = 0; i + 1 < maxima.size(); ++i) {
        const double ratio = maxima[i + 1] / maxima[i];
        o.require(ratio <= 2.0 && ratio >= 0.5, "max modulus changed by " + num(ratio));
    }
    // Difference quotients are bounded by sup_t ||d/dt v(t)||_{H^1} with
    // v(t, x) = sin(x - t - phi(x)), sampled exactly on the slices.
    double sup_vt = 0.0;
    for (int i = 0; i <= 256; ++i) {
        const double t = i / 256.0;
        GridFunction vt(g, 0.0);
        for (std::size_t n = 0; n < vt.size(); ++n) vt[n] = -std::cos(g->node_position(n)[0] - t - s.phi[n]);
        sup_vt = std::max(sup_vt, hk_norm(vt, 1));
    }
    o.require(maxima.back() <= sup_vt * 1.02, "modulus above sup ||v_t||_{H^1} = " + num(sup_vt));
    o.detail = "max moduli " + num(maxima[0]) + " " + num(maxima[1]) + " " + num(maxima[2]) + " " + num(maxima[3]) +
               ", bound " + num(sup_vt) + (o.detail.empty() ? "" : "; " + o.detail);
    return o;
}

Outcome derived_system() {
    Outcome o;
    const auto e = catalog("smooth1d");
    for (int n : {64, 128, 256}) {
        const auto g = grid_for(e, n);
        SolverConfig c;
        c.window = {0.0, 1.0};
        const auto d = solve_derived_system(GridFunction::sample(g, [](const Point& x) { return std::sin(x[0]); }),
                                            GridFunction::sample(g, [](const Point& x) { return 0.5 * std::cos(2.0 * x[0]); }),
                                            c, e.metric);
        const double h = g->spacing(0);
        double drift = 0.0;
        for (double v : d.drift) drift = std::max(drift, v);
        o.require(!d.failed && drift <= 5.0 * h * h, "N=" + std::to_string(n) + " drift " + num(drift));
        o.detail += std::string(o.detail.empty() ? "" : ", ") + "N=" + std::to_string(n) + " " + num(drift / (h * h)) +
                    " h^2";
    }
    return o;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

Outcome determinism() {
    Outcome o;
    const auto root = std::filesystem::temp_directory_path() / "wavelab_acceptance_determinism";
    std::filesystem::remove_all(root);
    std::vector<ExperimentConfig> configs;
    ExperimentConfig a;
    a.experiment = ExperimentKind::cauchy;
    a.catalog = "smooth1d";
    a.grid = {64, 128};
    configs.push_back(a);
    ExperimentConfig b;
    b.experiment = ExperimentKind::goursat;
    b.grid = {64};
    configs.push_back(b);
    ExperimentConfig c;
    c.experiment = ExperimentKind::estimate_constants;
    c.T = 3.5;
    c.grid = {64, 128};
    c.seed = 99;
    configs.push_back(c);
    ExperimentConfig d;
    d.experiment = ExperimentKind::mollify_check;
    d.catalog = "lipschitz1d";
    d.grid = {128};
    configs.push_back(d);
    ExperimentConfig f;
    f.experiment = ExperimentKind::convergence;
    f.grid = {32, 64, 128};
    configs.push_back(f);
    int files = 0;
    for (std::size_t i = 0; i < configs.size(); ++i) {
        std::string runs[2][4];
        for (int rep = 0; rep < 2; ++rep) {
            configs[i].output_dir = root / (std::to_string(i) + "_" + std::to_string(rep));
            run_experiment(configs[i]);
            int k = 0;
            for (const char* name : {"manifest.json", "energy.csv", "trace.csv", "rates.csv"}) {
                runs[rep][k++] = slurp(configs[i].output_dir / name);
            }
        }
        for (int k = 0; k < 4; ++k) {
            o.require(!runs[0][k].empty() && runs[0][k] == runs[1][k], to_string(configs[i].experiment) + " differs");
            ++files;
        }
    }
    std::filesystem::remove_all(root);
    o.detail = std::to_string(files) + " files compared";
    return o;
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"energy estimate", energy_estimate},
        {"manufactured-solution convergence", manufactured_convergence},
        {"mollifier and commutator suite", mollifier_suite},
        {"null-surface geometry", null_geometry},
        {"Goursat round trip", goursat_roundtrip},
        {"injectivity proxy", injectivity},
        {"two-sided trace constants", trace_constants},
        {"foliation continuity", foliation},
        {"derived-system consistency", derived_system},
        {"determinism", determinism},
    };
    int failures = 0;
    int index = 1;
    for (const auto& [name, run] : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome r;
        try {
            r = run();
        } catch (const std::exception& e) {
            r.pass = false;
            r.detail = std::string("exception: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("%s %2d %s: %s (%.1f s)\n", r.pass ? "PASS" : "FAIL", index++, name, r.detail.c_str(), secs);
        std::fflush(stdout);
        if (!r.pass) ++failures;
    }
    return failures == 0 ? 0 : 1;
}
