#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dualflow/io.hpp"
#include "dualflow/problems.hpp"
#include "dualflow/rules.hpp"

namespace dualflow::experiments {

enum ExitCode : int { exit_ok = 0, exit_config = 2, exit_check = 3, exit_partial = 4 };

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// One stopping rule with its parameters, e.g. dp(tau=1.1), hdp(a=0.1),
/// apriori(omega=1,q=1,c=1).
struct RuleSpec {
  StopRule kind = StopRule::dp;
  double tau = 1.1;
  double a = 0.1;
  AprioriConfig apriori;

  std::string label() const;
};

/// Throws ConfigError on unknown rules, unknown parameters or bad numbers.
RuleSpec parse_rule(std::string_view text);
/// Comma-separated list; commas inside parentheses do not split.
std::vector<RuleSpec> parse_rules(std::string_view text);

enum class Preset { deconvolution, tomography };

const char* to_string(Preset p);

struct ExperimentConfig {
  Preset preset = Preset::deconvolution;
  std::size_t grid_n = 801;
  std::size_t image_n = 64;
  std::size_t n_angles = 30;
  std::size_t n_detectors = 95;
  /// Absolute delta for deconvolution, relative delta for tomography.
  std::vector<double> deltas;
  std::vector<std::uint64_t> seeds{0};
  std::vector<RuleSpec> rules;
  Scheme scheme = Scheme::rk4;
  /// Overrides the preset step when set.
  std::optional<double> dt;
  /// Integration budget shared by all rules.
  double t_max = 0.0;
  std::size_t stride = 1;
  std::size_t hdp_stall_window = 500;
  double dp_crossing_tolerance = 1e-3;
  TvProxSettings tv;
  std::filesystem::path out;
  unsigned jobs = 1;
  /// Reference table for --check; empty selects the bundled one for the preset.
  std::filesystem::path reference;
};

/// Defaults of a preset: fixture sizes, the delta ladder, the rule triple and
/// the budget.
ExperimentConfig preset_config(Preset preset);

/// "key = value" lines; '#' starts a comment. Throws ConfigError on malformed
/// lines and repeated keys.
std::map<std::string, std::string> parse_key_values(std::string_view text);

/// Builds the preset named by the "preset" key (deconvolution by default) and
/// applies the remaining keys. Throws ConfigError on unknown keys or values.
ExperimentConfig config_from_key_values(const std::map<std::string, std::string>& kv);
void apply_key_value(ExperimentConfig& config, const std::string& key, const std::string& value);

/// Throws ConfigError unless the config satisfies: at least one rule, tau > 1,
/// a > 0, a non-empty positive ladder, at least one seed, positive sizes.
void validate(const ExperimentConfig& config);

/// Key/value rendering of every field that affects results (not out, jobs).
std::string canonical_text(const ExperimentConfig& config);
/// 16 hex digits of the FNV-1a hash of canonical_text.
std::string config_hash(const ExperimentConfig& config);

/// Fixture for one ladder entry and seed.
Problem make_fixture(const ExperimentConfig& config, double delta, std::uint64_t seed);

/// Integrator options for a fixture under the config (scheme, dt, t_max,
/// stride).
IntegrateOptions make_options(const ExperimentConfig& config, const Problem& fixture);

/// Runs one rule on a fixture.
StopOutcome run_rule(const RuleSpec& rule, const Problem& fixture, const IntegrateOptions& options,
                     const ExperimentConfig& config);

struct CellResult {
  std::string id;
  double delta = 0.0;
  std::uint64_t seed = 0;
  std::string rule;
  bool ok = false;
  std::string error;
  double t_stop = 0.0;
  double re = 0.0;
  std::string stop_reason;
  std::vector<std::string> files;
  std::optional<io::PgmScaling> scaling;
  double wall_seconds = 0.0;
};

struct RunSummary {
  std::filesystem::path manifest;
  std::vector<CellResult> cells;
  std::size_t failed = 0;
};

/// Executes every (delta, seed, rule) cell on config.jobs workers and writes
/// manifest.json, timing.json and one directory per cell under config.out.
/// Only timing.json depends on the machine.
RunSummary run(const ExperimentConfig& config);

struct TableCell {
  bool present = false;
  double t = 0.0;
  double re = 0.0;
};

struct Table {
  std::vector<double> deltas;
  std::vector<std::string> rules;
  std::vector<std::vector<TableCell>> cells;  // [delta][rule], averaged over seeds
  std::string delta_label = "delta";
  std::string preset;
};

/// Accepts a run directory or its manifest.json. Throws std::runtime_error if
/// the manifest cannot be read.
Table load_table(const std::filesystem::path& manifest_or_dir);
std::string format_table_text(const Table& table);
std::string format_table_csv(const Table& table);

struct ReferenceRow {
  double delta = 0.0;
  std::string rule;
  std::optional<double> t;
  double re = 0.0;
};

/// CSV with header delta,rule,t,re; '#' lines are comments, an empty t is not
/// compared. Throws std::runtime_error if the file is missing or malformed.
std::vector<ReferenceRow> load_reference(const std::filesystem::path& path);

struct CheckResult {
  bool passed = false;
  std::size_t compared = 0;
  std::vector<std::string> lines;
};

/// Every reference row whose delta and rule appear in the table must have a
/// present cell with t and RE within factor `band` of the reference.
CheckResult check_table(const Table& table, const std::vector<ReferenceRow>& reference, double band = 3.0);

/// Bundled reference file for a preset name.
std::filesystem::path default_reference(std::string_view preset);

struct VerifyCase {
  std::string name;
  double delta = 0.0;
  double tau = 1.1;
  std::size_t steps = 0;
  double t_stop = 0.0;
  double max_residual_increase = 0.0;
  double monotone_tolerance = 0.0;
  std::size_t energy_rows = 0;
  std::size_t energy_flagged = 0;
  double energy_max_violation = 0.0;
  double max_dual_increase = 0.0;
  double kappa_hat = 0.0;
  double seconds = 0.0;
  bool passed = false;
};

struct VerifyReport {
  std::vector<VerifyCase> cases;
  bool passed = false;
};

/// Runs each fixture to its discrepancy stop (RK4 at the preset step unless
/// overridden) and checks residual monotonicity within 1e-9 (1 + ||y||), the
/// energy inequality with probes {0, lambda, 2 lambda, 3 random} and descent
/// of the dual objective on the recorded samples. Fixtures: deconvolution at
/// delta 1e-1 and 1e-2, tomography at delta_rel 1e-2, with sizes from config.
VerifyReport verify_suite(const ExperimentConfig& config, std::size_t energy_stride = 10);

std::string verify_json(const VerifyReport& report);

}  // namespace dualflow::experiments
