#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "dualflow/operator.hpp"
#include "dualflow/regularizer.hpp"
#include "dualflow/weighted_vector.hpp"

namespace dualflow {

/// A x = y^delta with a strongly convex selection functional R.
struct InverseProblem {
  OperatorPtr op;
  RegularizerPtr reg;
  WeightedVector data;  // y^delta, on the range grid of op
};

/// Throws std::invalid_argument if the pieces do not fit together.
void validate(const InverseProblem& problem);

/// One point of the dual gradient flow. x and xi are always recomputed from
/// lambda, never extrapolated: xi = A* lambda, x = grad R*(xi),
/// residual = A x - y^delta.
struct DualState {
  double t = 0.0;
  WeightedVector lambda;
  WeightedVector xi;
  WeightedVector x;
  WeightedVector residual;
  double residual_norm = 0.0;
};

/// Classical fourth-order Runge-Kutta coefficients.
struct RK4Tableau {
  static constexpr std::array<std::array<double, 4>, 4> gamma{{
      {0.0, 0.0, 0.0, 0.0},
      {0.5, 0.0, 0.0, 0.0},
      {0.0, 0.5, 0.0, 0.0},
      {0.0, 0.0, 1.0, 0.0},
  }};
  static constexpr std::array<double, 4> b{1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0};
};

enum class Scheme { euler, rk4 };

const char* to_string(Scheme s);
/// Accepts "euler" and "rk4"; throws std::invalid_argument otherwise.
Scheme parse_scheme(std::string_view s);

/// Phi(lambda) = y^delta - A grad R*(A* lambda).
WeightedVector rhs(const WeightedVector& lambda, const InverseProblem& problem, ConjGradWorkspace* ws = nullptr);

/// State with the given t and lambda, all derived fields computed.
DualState make_state(double t, WeightedVector lambda, const InverseProblem& problem, ConjGradWorkspace* ws = nullptr);

/// t = 0, lambda = 0.
DualState flow_init(const InverseProblem& problem, ConjGradWorkspace* ws = nullptr);

/// lambda+ = lambda + dt (y^delta - A x).
DualState euler_step(const DualState& state, double dt, const InverseProblem& problem,
                     ConjGradWorkspace* ws = nullptr);

/// One RK4 step; the first stage reuses state.x.
DualState rk4_step(const DualState& state, double dt, const InverseProblem& problem,
                   ConjGradWorkspace* ws = nullptr);

DualState step(Scheme scheme, const DualState& state, double dt, const InverseProblem& problem,
               ConjGradWorkspace* ws = nullptr);

/// 4 c0 / ||A||^2 with ||A|| measured from the regularizer's primal norm.
/// +infinity for the zero operator.
double stability_max_step(const ForwardOperator& op, const Regularizer& reg);

/// d(lambda) = R*(A* lambda) - <lambda, y^delta>, using the cached x and xi of
/// the state.
double dual_objective_at(const DualState& state, const InverseProblem& problem);

/// Scalars recorded per trajectory sample.
struct TraceRecord {
  double t = 0.0;
  double residual_norm = 0.0;
  double r_value = 0.0;
  /// NaN when no ground truth was supplied.
  double relative_error = std::numeric_limits<double>::quiet_NaN();
  double dual_objective = 0.0;
  double theta = 0.0;
};

enum class StopReason { predicate, budget };

struct IntegrateOptions {
  Scheme scheme = Scheme::rk4;
  double dt = 0.0;
  double t_max = std::numeric_limits<double>::infinity();
  /// Record every stride-th step (the initial and final states are always kept).
  std::size_t stride = 1;
  /// Keep lambda snapshots alongside the records.
  bool keep_lambda = false;
  /// a in theta = (t + a) ||A x - y^delta||^2.
  double theta_a = 0.1;
  /// Ground truth for the relative_error column.
  std::optional<WeightedVector> truth;
  NormKind error_norm = NormKind::l2;
};

struct Trajectory {
  std::vector<TraceRecord> records;
  std::vector<WeightedVector> lambdas;
  DualState final_state;
  StopReason reason = StopReason::budget;
  std::size_t steps = 0;
  /// Largest per-step increase of the residual norm (<= 0 on a monotone run).
  double max_residual_increase = -std::numeric_limits<double>::infinity();
  /// Inner-solver iterations spent (TV regularizer only).
  long inner_iterations = 0;
};

using StopPredicate = std::function<bool(const DualState&)>;
using Observer = std::function<void(const DualState&)>;

/// Steps from `start` until stop(state) holds or t_max is reached. The last
/// step is shortened to land on t_max exactly.
///
/// Throws std::invalid_argument if dt <= 0 or if neither a stop predicate nor a
/// finite t_max is given. Inner-solver failures propagate.
Trajectory integrate(const InverseProblem& problem, const DualState& start, const IntegrateOptions& options,
                     const StopPredicate& stop, std::span<const Observer> observers = {},
                     ConjGradWorkspace* ws = nullptr);

/// Same, starting from flow_init(problem).
Trajectory integrate(const InverseProblem& problem, const IntegrateOptions& options, const StopPredicate& stop,
                     std::span<const Observer> observers = {});

TraceRecord make_record(const DualState& state, const InverseProblem& problem, const IntegrateOptions& options);

}  // namespace dualflow
