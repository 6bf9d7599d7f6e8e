#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dualflow/flow.hpp"

namespace dualflow {

enum class StopRule { apriori, dp, hdp, budget };

const char* to_string(StopRule r);

/// Discrepancy principle: stop at the first t with ||A x(t) - y^delta|| = tau delta.
struct DpConfig {
  double tau = 1.1;
  double delta = 0.0;
  /// Relative width of the accepted band around tau * delta.
  double crossing_tolerance = 1e-3;
  int max_bisections = 60;
};

/// Heuristic discrepancy principle: minimize theta(t) = (t + a) ||A x(t) - y^delta||^2.
struct HdpConfig {
  double a = 0.1;
  double t_max = std::numeric_limits<double>::infinity();
  /// Stop early once the running minimum has not improved for this many
  /// samples and t >= 10 * argmin.
  std::size_t stall_window = 500;
};

struct AprioriConfig {
  double omega = 1.0;
  double q = 1.0;
  double c_scale = 1.0;
};

/// Throws std::invalid_argument unless tau > 1 and delta >= 0.
void validate(const DpConfig& c);
/// Throws std::invalid_argument unless a > 0 and t_max > 0.
void validate(const HdpConfig& c);
/// Throws std::invalid_argument unless omega > 0, 0 < q <= 1 and c_scale > 0.
void validate(const AprioriConfig& c);

struct StopOutcome {
  StopRule rule = StopRule::budget;
  double t_stop = 0.0;
  DualState state;
  /// Residual norm at the stopping time.
  double delta_star = 0.0;
  /// dp: the step interval that bracketed the crossing.
  std::optional<std::pair<double, double>> bracket;
  int refinements = 0;
  /// hdp: (t, theta) at every step.
  std::vector<std::pair<double, double>> theta_history;
  double theta_min = std::numeric_limits<double>::quiet_NaN();
  Trajectory trajectory;
};

/// t = c_scale * omega * delta^(q - 2).
double apriori_stop_time(double delta, double omega, double q, double c_scale = 1.0);

/// Integrates to the a priori time exactly (the last step is shortened).
StopOutcome apriori_stop(const InverseProblem& problem, double delta, const AprioriConfig& config,
                         IntegrateOptions options);

/// Integrates until the residual first drops to tau * delta, then bisects the
/// length of the last step (re-integrated from the previous state) until the
/// residual lands within tau * delta * (1 +- crossing_tolerance). Returns a
/// budget outcome with the last state if options.t_max is hit first.
StopOutcome dp_stop(const InverseProblem& problem, const DpConfig& config, IntegrateOptions options);

/// Minimizes theta over the step grid on [0, config.t_max]. The outcome is
/// tagged budget when theta is still decreasing at t_max.
StopOutcome hdp_stop(const InverseProblem& problem, const HdpConfig& config, IntegrateOptions options);

/// kappa_hat = min over samples of residual_norm / delta.
double check_noise_condition(const Trajectory& trajectory, double delta);

}  // namespace dualflow
