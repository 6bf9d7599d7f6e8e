#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dualflow/flow.hpp"

namespace dualflow {

/// d(lambda) = R*(A* lambda) - <lambda, y^delta>, with R* evaluated through
/// the conjugate pair.
double dual_objective(const WeightedVector& lambda, const InverseProblem& problem);

/// One row of the energy-inequality check
///   (t/2)||Ax(t) - y||^2 + (||lambda(t) - mu||^2 - ||mu||^2) / (2t) <= d(mu) - d(lambda(t)).
struct EnergyCheck {
  double t = 0.0;
  std::size_t mu_id = 0;
  double lhs = 0.0;
  double rhs = 0.0;
  double violation = 0.0;  // max(0, lhs - rhs)
  bool flagged = false;    // violation > slack(t)
};

struct EnergyReport {
  std::vector<EnergyCheck> rows;
  std::size_t flagged = 0;
  double max_violation = 0.0;
};

/// Probe id conventions used by standard_probes().
enum class ProbeKind { fixed, lambda_t, twice_lambda_t };

struct Probe {
  ProbeKind kind = ProbeKind::fixed;
  WeightedVector mu;  // used when kind == fixed
};

/// {0, lambda(t), 2 lambda(t)} plus n_random seeded Gaussian probes scaled to
/// `scale` in norm.
std::vector<Probe> standard_probes(const InverseProblem& problem, std::size_t n_random, double scale,
                                   std::uint64_t seed);

/// Checks every sample with t >= t_min (default: the first positive sample).
/// The trajectory must carry lambda snapshots. slack(t) = slack_rate * (1 + t).
/// Throws std::invalid_argument if the trajectory has no lambda snapshots.
EnergyReport verify_energy_inequality(const Trajectory& trajectory, const InverseProblem& problem,
                                      std::span<const Probe> probes, double slack_rate = 1e-6, double t_min = 0.0);

/// ||x - truth|| / ||truth|| in the chosen norm; throws std::invalid_argument
/// if the truth has zero norm.
double relative_error(const WeightedVector& x, const WeightedVector& truth, NormKind norm);

struct SemiConvergence {
  double t_opt = 0.0;
  double re_min = 0.0;
  std::size_t index = 0;
  bool is_interior = false;
};

/// Throws std::invalid_argument if the trajectory has no relative-error trace.
SemiConvergence semi_convergence_summary(const Trajectory& trajectory);

struct RateFit {
  std::vector<std::pair<double, double>> pairs;
  double slope = 0.0;
  double intercept = 0.0;
  /// Root-mean-square residual of the log-log fit.
  double residual = 0.0;
};

/// Least-squares line through (log delta, log error). Needs >= 3 pairs with
/// positive entries and at least two distinct deltas.
RateFit fit_rate(std::span<const std::pair<double, double>> pairs);

/// Bregman distance D^{xi}(truth, x(t)) with xi = A* lambda(t); +infinity when
/// the truth lies outside dom R.
double bregman_error(const InverseProblem& problem, const WeightedVector& truth, const DualState& state);

}  // namespace dualflow
