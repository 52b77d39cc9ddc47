#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "rpde/asymptotics.hpp"
#include "rpde/functionals.hpp"
#include "rpde/initial_data.hpp"
#include "rpde/radial_core.hpp"
#include "rpde/solver.hpp"
#include "rpde/transform.hpp"

namespace rpde {

/// Raised for unreadable or inconsistent configuration; the CLI maps it to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class RunMode { solve, k_zero_synthetic, separable };
enum class FitLaw { automatic, log_slope, power, log_corrected };

/// Flat `key = value` experiment description. See configs/README.md for the
/// schema; every key has a default except `schema_version`.
struct ExperimentConfig {
  int schema_version = 1;
  std::string name = "experiment";
  RunMode mode = RunMode::solve;
  int dim = 1;
  std::string family = "algebraic:c0=1,gamma=4";

  double radius = 1000.0;
  std::size_t intervals = 2000;
  Grading grading = Grading::geometric;
  double ratio = 1.004;

  double eps_rel = 1e-10;
  double separable_delta = 1.0;

  Scheme scheme = Scheme::semi_implicit;
  double cfl_safety = 0.05;
  double ds_init = 1e-6;
  double s_end = 1e300;
  bool extrapolate = true;

  std::vector<double> p_list{0.5, 1.0, 2.0};
  TGridSpec tgrid;

  std::string scenario = "algebraic:n=1,gamma=4,eps=1";
  FitLaw fit_law = FitLaw::automatic;
  double fit_decades = 1.5;
  double burn_in = 0.1;
  double r2_min = 0.98;
  std::optional<double> verdict_lower;
  std::optional<double> verdict_upper;
  double min_t_max = 0.0;  ///< below this attained horizon the verdict is inconclusive

  std::string out = "out";

  /// Original key/value pairs (after defaults), kept for echoing and sweeps.
  std::map<std::string, std::string> entries;

  DecayFamily decay_family() const { return parse_family(family); }
  Scenario decay_scenario() const { return parse_scenario(scenario); }
};

/// Parses and validates; throws ConfigError with the offending key or line.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig config_from_entries(const std::map<std::string, std::string>& entries);

/// Overrides `name` in a copy of the config. Plain keys are replaced directly;
/// other names are looked up as parameters inside `family` and `scenario`
/// (e.g. `gamma`). Throws ConfigError if the name matches nothing.
ExperimentConfig with_parameter(const ExperimentConfig& cfg, const std::string& name,
                                const std::string& value);

/// E ln^c(t) / t over the final half decade of the attained window.
struct ShapeCheck {
  double power_of_log = 0.0;
  double ratio_min = 0.0;
  double ratio_start = 0.0;
  double ratio_end = 0.0;
  bool bounded_below = false;
};

struct ExperimentReport {
  double attained_t_max = 0.0;
  bool truncated = false;
  FitLaw law = FitLaw::log_slope;
  std::optional<FitResult> fit;
  std::optional<LawPair> laws;
  double band_lower = 0.0;
  double band_upper = 0.0;
  std::optional<ShapeCheck> shape;

  std::string verdict = "inconclusive";  ///< pass | fail | inconclusive
  std::string reason;

  std::vector<IdentityResidual> residuals;
  double unit_mass_worst = 0.0;  ///< max_t |∫u(·,t) - 1|
  MonotonicityReport monotonicity;
  std::size_t inequality_checked = 0;
  std::size_t inequality_failures = 0;
  TransformDiagnostics diagnostics;
  std::optional<double> exact_error;  ///< separable mode: relative L∞ error at s_end

  std::size_t accepted_steps = 0;
  std::size_t rejected_steps = 0;
  double wall_clock_s = 0.0;
  std::vector<std::string> warnings;

  /// `{config_echo, fitted, predicted, residuals, verdict}`
  nlohmann::json to_json(const ExperimentConfig& cfg) const;
};

struct ExperimentResult {
  ExperimentReport report;
  SolutionTrace trace;
  std::optional<TransformTables> tables;
  std::vector<USample> samples;
};

/// Full pipeline without touching the filesystem.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// trace.csv, tables.csv, s_tables.csv, predictions.csv, report.json. Files are
/// written to a staging directory first and moved into place together.
void write_outputs(const ExperimentResult& result, const ExperimentConfig& cfg,
                   const std::filesystem::path& dir);

struct ConvergenceLevel {
  std::size_t intervals;
  double cfl_safety;
  std::size_t steps;
  std::optional<double> exact_error;
  std::vector<IdentityResidual> residuals;
};

struct ConvergenceReport {
  std::vector<ConvergenceLevel> levels;
  std::vector<double> exact_orders;                          ///< between consecutive levels
  std::vector<std::pair<double, std::vector<double>>> residual_orders;  ///< per p

  nlohmann::json to_json() const;
};

/// Each level doubles the intervals (geometric grids nest, ratio -> sqrt(ratio)).
/// Semi-implicit levels also halve cfl_safety and ds_init; explicit step sizes
/// follow the stability limit, which already scales with the squared spacing.
/// Throws std::invalid_argument for fewer than two levels.
ConvergenceReport converge(const ExperimentConfig& cfg, int levels);

struct SweepEntry {
  std::string value;
  std::optional<ExperimentReport> report;
  std::string error;
};

struct SweepReport {
  std::string parameter;
  std::vector<SweepEntry> entries;
  bool strictly_increasing = false;  ///< fitted slopes, in the given order

  nlohmann::json to_json() const;
};

/// Runs one experiment per value concurrently; failures are recorded per
/// entry. When `out` is non-empty each run writes to out/<param>=<value>/.
/// Throws ConfigError for an empty value list.
SweepReport sweep(const ExperimentConfig& cfg, const std::string& parameter,
                  const std::vector<std::string>& values, const std::filesystem::path& out = {});

/// Closed-form prediction table on `count` log-spaced t in [e, t_max], unanchored.
void write_prediction_table(std::ostream& out, const Scenario& scenario, double t_max,
                            std::size_t count = 50);

}  // namespace rpde
