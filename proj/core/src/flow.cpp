#include "dualflow/flow.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace dualflow {

void validate(const InverseProblem& problem) {
  if (!problem.op) throw std::invalid_argument("InverseProblem: missing operator");
  if (!problem.reg) throw std::invalid_argument("InverseProblem: missing regularizer");
  if (problem.data.size() != problem.op->rows()) {
    throw std::invalid_argument("InverseProblem: data length " + std::to_string(problem.data.size()) +
                                " does not match operator rows " + std::to_string(problem.op->rows()));
  }
}

const char* to_string(Scheme s) { return s == Scheme::euler ? "euler" : "rk4"; }

Scheme parse_scheme(std::string_view s) {
  if (s == "euler") return Scheme::euler;
  if (s == "rk4") return Scheme::rk4;
  throw std::invalid_argument("unknown scheme '" + std::string(s) + "' (expected euler or rk4)");
}

WeightedVector rhs(const WeightedVector& lambda, const InverseProblem& problem, ConjGradWorkspace* ws) {
  const WeightedVector x = problem.reg->conj_grad(problem.op->adjoint_apply(lambda), ws);
  WeightedVector phi = problem.data;
  phi -= problem.op->apply(x);
  return phi;
}

DualState make_state(double t, WeightedVector lambda, const InverseProblem& problem, ConjGradWorkspace* ws) {
  DualState s;
  s.t = t;
  s.xi = problem.op->adjoint_apply(lambda);
  s.x = problem.reg->conj_grad(s.xi, ws);
  s.residual = problem.op->apply(s.x);
  s.residual -= problem.data;
  s.residual_norm = l2_norm(s.residual);
  s.lambda = std::move(lambda);
  return s;
}

DualState flow_init(const InverseProblem& problem, ConjGradWorkspace* ws) {
  validate(problem);
  return make_state(0.0, WeightedVector(problem.op->range_weights()), problem, ws);
}

DualState euler_step(const DualState& state, double dt, const InverseProblem& problem, ConjGradWorkspace* ws) {
  if (!(dt > 0.0)) throw std::invalid_argument("euler_step: dt must be positive");
  WeightedVector next = state.lambda;
  next.axpy(-dt, state.residual);
  return make_state(state.t + dt, std::move(next), problem, ws);
}

DualState rk4_step(const DualState& state, double dt, const InverseProblem& problem, ConjGradWorkspace* ws) {
  if (!(dt > 0.0)) throw std::invalid_argument("rk4_step: dt must be positive");
  using T = RK4Tableau;
  std::array<WeightedVector, 4> phi;
  // Stage 1 evaluates at lambda_n itself, where x is already known.
  phi[0] = -1.0 * state.residual;
  for (std::size_t i = 1; i < 4; ++i) {
    WeightedVector omega = state.lambda;
    for (std::size_t j = 0; j < i; ++j) {
      if (T::gamma[i][j] != 0.0) omega.axpy(dt * T::gamma[i][j], phi[j]);
    }
    phi[i] = rhs(omega, problem, ws);
  }
  WeightedVector next = state.lambda;
  for (std::size_t i = 0; i < 4; ++i) next.axpy(dt * T::b[i], phi[i]);
  return make_state(state.t + dt, std::move(next), problem, ws);
}

DualState step(Scheme scheme, const DualState& state, double dt, const InverseProblem& problem,
               ConjGradWorkspace* ws) {
  return scheme == Scheme::euler ? euler_step(state, dt, problem, ws) : rk4_step(state, dt, problem, ws);
}

double stability_max_step(const ForwardOperator& op, const Regularizer& reg) {
  const double a = op.norm(reg.norm_kind());
  if (a == 0.0) return std::numeric_limits<double>::infinity();
  return 4.0 * reg.modulus() / (a * a);
}

double dual_objective_at(const DualState& state, const InverseProblem& problem) {
  return inner(state.xi, state.x) - problem.reg->value(state.x) - inner(state.lambda, problem.data);
}

TraceRecord make_record(const DualState& state, const InverseProblem& problem, const IntegrateOptions& options) {
  TraceRecord r;
  r.t = state.t;
  r.residual_norm = state.residual_norm;
  r.r_value = problem.reg->value(state.x);
  r.dual_objective = inner(state.xi, state.x) - r.r_value - inner(state.lambda, problem.data);
  r.theta = (state.t + options.theta_a) * state.residual_norm * state.residual_norm;
  if (options.truth) {
    const WeightedVector diff = state.x - *options.truth;
    r.relative_error = norm(diff, options.error_norm) / norm(*options.truth, options.error_norm);
  }
  return r;
}

Trajectory integrate(const InverseProblem& problem, const DualState& start, const IntegrateOptions& options,
                     const StopPredicate& stop, std::span<const Observer> observers, ConjGradWorkspace* ws) {
  if (!(options.dt > 0.0)) throw std::invalid_argument("integrate: dt must be positive");
  if (!stop && !std::isfinite(options.t_max)) {
    throw std::invalid_argument("integrate: need a stop predicate or a finite t_max");
  }
  const std::size_t stride = options.stride == 0 ? 1 : options.stride;

  Trajectory traj;
  DualState state = start;
  auto record = [&](const DualState& s) {
    traj.records.push_back(make_record(s, problem, options));
    if (options.keep_lambda) traj.lambdas.push_back(s.lambda);
  };
  record(state);
  for (const auto& obs : observers) obs(state);

  const double t0 = start.t;
  bool last_recorded = true;
  const long inner_before = ws ? ws->total_iterations : 0;
  for (;;) {
    if (stop && stop(state)) {
      traj.reason = StopReason::predicate;
      break;
    }
    // Relative guard so that t0 + k dt landing a rounding error short of t_max counts as reached.
    if (state.t >= options.t_max * (1.0 - 1e-14)) {
      traj.reason = StopReason::budget;
      break;
    }
    const std::size_t k = traj.steps + 1;
    double t_next = t0 + static_cast<double>(k) * options.dt;
    if (t_next > options.t_max) t_next = options.t_max;
    const double h = t_next - state.t;

    DualState next = step(options.scheme, state, h, problem, ws);
    next.t = t_next;
    traj.max_residual_increase = std::max(traj.max_residual_increase, next.residual_norm - state.residual_norm);
    state = std::move(next);
    traj.steps = k;
    for (const auto& obs : observers) obs(state);
    last_recorded = (k % stride == 0);
    if (last_recorded) record(state);
  }
  if (!last_recorded) record(state);
  if (ws) traj.inner_iterations = ws->total_iterations - inner_before;
  traj.final_state = std::move(state);
  return traj;
}

Trajectory integrate(const InverseProblem& problem, const IntegrateOptions& options, const StopPredicate& stop,
                     std::span<const Observer> observers) {
  ConjGradWorkspace ws;
  const DualState start = flow_init(problem, &ws);
  return integrate(problem, start, options, stop, observers, &ws);
}

}  // namespace dualflow
