#include "dualflow/rules.hpp"

#include <cmath>
#include <stdexcept>

namespace dualflow {

const char* to_string(StopRule r) {
  switch (r) {
    case StopRule::apriori:
      return "apriori";
    case StopRule::dp:
      return "dp";
    case StopRule::hdp:
      return "hdp";
    case StopRule::budget:
      return "budget";
  }
  return "unknown";
}

void validate(const DpConfig& c) {
  if (!(c.tau > 1.0)) throw std::invalid_argument("discrepancy principle needs tau > 1");
  if (!(c.delta >= 0.0)) throw std::invalid_argument("discrepancy principle needs delta >= 0");
  if (!(c.crossing_tolerance > 0.0)) throw std::invalid_argument("crossing tolerance must be positive");
}

void validate(const HdpConfig& c) {
  if (!(c.a > 0.0)) throw std::invalid_argument("heuristic discrepancy principle needs a > 0");
  if (!(c.t_max > 0.0)) throw std::invalid_argument("heuristic discrepancy principle needs t_max > 0");
}

void validate(const AprioriConfig& c) {
  if (!(c.omega > 0.0)) throw std::invalid_argument("a priori rule needs omega > 0");
  if (!(c.q > 0.0 && c.q <= 1.0)) throw std::invalid_argument("a priori rule needs 0 < q <= 1");
  if (!(c.c_scale > 0.0)) throw std::invalid_argument("a priori rule needs c_scale > 0");
}

double apriori_stop_time(double delta, double omega, double q, double c_scale) {
  if (!(delta > 0.0)) throw std::invalid_argument("apriori_stop_time: delta must be positive");
  return c_scale * omega * std::pow(delta, q - 2.0);
}

StopOutcome apriori_stop(const InverseProblem& problem, double delta, const AprioriConfig& config,
                         IntegrateOptions options) {
  validate(config);
  options.t_max = apriori_stop_time(delta, config.omega, config.q, config.c_scale);
  StopOutcome out;
  out.trajectory = integrate(problem, options, nullptr);
  out.rule = StopRule::apriori;
  out.state = out.trajectory.final_state;
  out.t_stop = out.state.t;
  out.delta_star = out.state.residual_norm;
  return out;
}

StopOutcome dp_stop(const InverseProblem& problem, const DpConfig& config, IntegrateOptions options) {
  validate(config);
  const double target = config.tau * config.delta;

  ConjGradWorkspace ws;
  const DualState start = flow_init(problem, &ws);
  StopOutcome out;
  if (start.residual_norm <= target) {
    out.rule = StopRule::dp;
    out.state = start;
    out.delta_star = start.residual_norm;
    out.trajectory.records.push_back(make_record(start, problem, options));
    out.trajectory.final_state = start;
    out.trajectory.reason = StopReason::predicate;
    return out;
  }

  DualState prev, cur = start;
  const Observer keep_previous = [&](const DualState& s) {
    prev = std::move(cur);
    cur = s;
  };
  out.trajectory = integrate(problem, start, options, [&](const DualState& s) { return s.residual_norm <= target; },
                             std::span<const Observer>(&keep_previous, 1), &ws);

  if (out.trajectory.reason == StopReason::budget) {
    out.rule = StopRule::budget;
    out.state = out.trajectory.final_state;
    out.t_stop = out.state.t;
    out.delta_star = out.state.residual_norm;
    return out;
  }

  out.rule = StopRule::dp;
  out.bracket = std::make_pair(prev.t, cur.t);
  const double band = config.crossing_tolerance * target;
  DualState accepted = cur;
  if (std::abs(cur.residual_norm - target) > band) {
    // Residual is monotone in the step length, so bisect h in (0, h_full).
    double lo = 0.0, hi = cur.t - prev.t;
    for (int k = 0; k < config.max_bisections; ++k) {
      const double mid = 0.5 * (lo + hi);
      DualState trial = step(options.scheme, prev, mid, problem, &ws);
      ++out.refinements;
      if (std::abs(trial.residual_norm - target) <= band) {
        accepted = std::move(trial);
        break;
      }
      if (trial.residual_norm > target) {
        lo = mid;
      } else {
        hi = mid;
        accepted = std::move(trial);
      }
    }
    out.trajectory.records.back() = make_record(accepted, problem, options);
    if (options.keep_lambda && !out.trajectory.lambdas.empty()) out.trajectory.lambdas.back() = accepted.lambda;
    out.trajectory.final_state = accepted;
  }
  out.state = std::move(accepted);
  out.t_stop = out.state.t;
  out.delta_star = out.state.residual_norm;
  return out;
}

StopOutcome hdp_stop(const InverseProblem& problem, const HdpConfig& config, IntegrateOptions options) {
  validate(config);
  options.theta_a = config.a;
  options.t_max = std::min(options.t_max, config.t_max);

  StopOutcome out;
  double best = std::numeric_limits<double>::infinity();
  double t_best = 0.0;
  std::size_t since_improvement = 0;
  DualState best_state;
  bool stalled = false;

  const Observer track = [&](const DualState& s) {
    const double theta = (s.t + config.a) * s.residual_norm * s.residual_norm;
    out.theta_history.emplace_back(s.t, theta);
    if (theta < best) {
      best = theta;
      t_best = s.t;
      best_state = s;
      since_improvement = 0;
    } else {
      ++since_improvement;
    }
  };
  const StopPredicate guard = [&](const DualState& s) {
    stalled = since_improvement >= config.stall_window && s.t >= 10.0 * t_best;
    return stalled;
  };

  out.trajectory = integrate(problem, options, guard, std::span<const Observer>(&track, 1));

  const bool still_improving = since_improvement == 0;
  out.rule = (!stalled && still_improving) ? StopRule::budget : StopRule::hdp;
  out.theta_min = best;
  out.t_stop = t_best;
  out.state = std::move(best_state);
  out.delta_star = out.state.residual_norm;
  return out;
}

double check_noise_condition(const Trajectory& trajectory, double delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("check_noise_condition: delta must be positive");
  if (trajectory.records.empty()) throw std::invalid_argument("check_noise_condition: empty trajectory");
  double m = std::numeric_limits<double>::infinity();
  for (const auto& r : trajectory.records) m = std::min(m, r.residual_norm / delta);
  return m;
}

}  // namespace dualflow
