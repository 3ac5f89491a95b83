#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "wavelab/cauchy.hpp"
#include "wavelab/goursat.hpp"

namespace wavelab {

enum class ExperimentKind { cauchy, goursat, mollify_check, convergence, estimate_constants };

std::string to_string(ExperimentKind k);
ExperimentKind parse_experiment(const std::string& name);

struct ExperimentConfig {
    ExperimentKind experiment = ExperimentKind::cauchy;
    std::string catalog = "flat1d";
    std::string surface = "cone";
    /// Points per axis, ascending.
    std::vector<int> grid{64, 128, 256};
    /// cauchy/convergence: solve on [-T, T]; estimate-constants: window T.
    double T = 1.0;
    std::vector<double> lambda_schedule = default_lambda_schedule();
    /// 0 runs the whole schedule.
    double gap_tolerance = 0.0;
    std::uint64_t seed = 20240601;
    std::filesystem::path output_dir = "wavelab_out";
    /// Initial data: exact | zero (cauchy, convergence); oracle | constant |
    /// zero | cos (goursat).
    std::string data = "default";
    double cfl = 0.5;
    TimeScheme scheme = TimeScheme::rk4;
    int ensemble = 16;
    /// Mollifier levels for mollify-check, ascending.
    std::vector<int> levels{2, 4, 8, 16};

    /// Throws WavelabError on an inconsistent configuration.
    void validate() const;
};

/// key = value assignment; unknown keys and malformed values throw.
void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& value);

/// Flat key=value text, one per line; '#' starts a comment.
void apply_config_text(ExperimentConfig& config, std::istream& in);
void apply_config_file(ExperimentConfig& config, const std::filesystem::path& path);

/// One key=value line per setting, readable by apply_config_text.
std::string describe(const ExperimentConfig& config);

enum class RateFlag { ok, unreliable, exact };

std::string to_string(RateFlag f);

struct RateRow {
    std::string quantity;
    double coarse = 0.0;
    double fine = 0.0;
    double error_coarse = 0.0;
    double error_fine = 0.0;
    double order = 0.0;
    RateFlag flag = RateFlag::ok;
};

/// Observed orders p = log2(e_i / e_{i+1}) / log2(n_{i+1} / n_i) for
/// consecutive entries. Errors that all vanish give `exact`; a non-monotone
/// sequence, or orders over the triple that disagree by more than
/// `stability`, flags every row `unreliable`.
std::vector<RateRow> convergence_study(const std::string& quantity, const std::vector<double>& sizes,
                                       const std::vector<double>& errors, double stability = 0.5);

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct ExperimentResult {
    std::vector<CheckResult> checks;
    bool passed() const;
};

/// Runs the configured experiment and writes manifest.json, energy.csv,
/// trace.csv and rates.csv into the output directory. Deterministic for a
/// fixed configuration.
ExperimentResult run_experiment(const ExperimentConfig& config);

}  // namespace wavelab
