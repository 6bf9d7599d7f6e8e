#include <gtest/gtest.h>

#include <Eigen/SVD>
#include <cmath>
#include <limits>
#include <random>

#include "dualflow/flow.hpp"
#include "dualflow/problems.hpp"
#include "test_support.hpp"

using namespace dualflow;
using namespace dualflow::testing;

namespace {

// A = 1, R = x^2 / 2, y = 1: lambda' = 1 - lambda, x = lambda.
InverseProblem scalar_problem() {
  RowMatrix m(1, 1);
  m(0, 0) = 1.0;
  return {make_dense_operator(m), std::make_shared<QuadraticRegularizer>(1.0),
          WeightedVector({1.0}, Weights::unit(1))};
}

InverseProblem quadratic_problem(std::size_t rows, std::size_t cols, std::uint64_t seed, RowMatrix* out = nullptr) {
  std::mt19937_64 rng(seed);
  RowMatrix m = random_matrix(rows, cols, rng);
  if (out) *out = m;
  return {make_dense_operator(m), std::make_shared<QuadraticRegularizer>(1.0),
          random_vector(Weights::unit(rows), rng)};
}

IntegrateOptions opts(Scheme scheme, double dt, double t_max) {
  IntegrateOptions o;
  o.scheme = scheme;
  o.dt = dt;
  o.t_max = t_max;
  return o;
}

}  // namespace

TEST(Tableau, Coefficients) {
  double sum = 0.0;
  for (double b : RK4Tableau::b) sum += b;
  EXPECT_DOUBLE_EQ(sum, 1.0);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = i; j < 4; ++j) EXPECT_EQ(RK4Tableau::gamma[i][j], 0.0);
  EXPECT_EQ(RK4Tableau::gamma[1][0], 0.5);
  EXPECT_EQ(RK4Tableau::gamma[2][1], 0.5);
  EXPECT_EQ(RK4Tableau::gamma[3][2], 1.0);
}

TEST(Scheme, Parse) {
  EXPECT_EQ(parse_scheme("euler"), Scheme::euler);
  EXPECT_EQ(parse_scheme("rk4"), Scheme::rk4);
  EXPECT_THROW(parse_scheme("rk45"), std::invalid_argument);
  EXPECT_STREQ(to_string(Scheme::rk4), "rk4");
}

TEST(Validate, RejectsMismatchedPieces) {
  auto p = scalar_problem();
  p.data = WeightedVector(Weights::unit(2));
  EXPECT_THROW(validate(p), std::invalid_argument);
  auto q = scalar_problem();
  q.reg = nullptr;
  EXPECT_THROW(validate(q), std::invalid_argument);
}

TEST(Rhs, ZeroOperatorGivesData) {
  std::mt19937_64 rng(1);
  const InverseProblem p{make_zero_operator(Weights::unit(3), Weights::unit(4)),
                         std::make_shared<QuadraticRegularizer>(1.0), random_vector(Weights::unit(4), rng)};
  const auto phi = rhs(random_vector(Weights::unit(4), rng), p);
  EXPECT_EQ(max_abs_diff(phi.values(), p.data.values()), 0.0);
}

TEST(Rhs, IdentityAtZero) {
  const auto phi = rhs(WeightedVector(Weights::unit(1)), scalar_problem());
  EXPECT_DOUBLE_EQ(phi[0], 1.0);
}

TEST(Rhs, LipschitzBound) {
  const Problem fx = gaussian_deconvolution_fixture(201, 1e-2, 3);
  std::mt19937_64 rng(2);
  const std::vector<InverseProblem> problems = {fx.inverse, quadratic_problem(7, 5, 3)};
  for (const auto& p : problems) {
    const double a = p.op->norm(p.reg->norm_kind());
    const double lip = a * a / (2.0 * p.reg->modulus());
    for (int k = 0; k < 100; ++k) {
      const auto l1 = random_vector(p.op->range_weights(), rng, 3.0);
      const auto l2 = random_vector(p.op->range_weights(), rng, 3.0);
      EXPECT_LE(l2_norm(rhs(l1, p) - rhs(l2, p)), lip * l2_norm(l1 - l2) * (1.0 + 1e-9));
    }
  }
}

TEST(FlowInit, EntropyStartsUniform) {
  const Problem fx = gaussian_deconvolution_fixture(101);
  const DualState s = flow_init(fx.inverse);
  EXPECT_EQ(s.t, 0.0);
  for (double v : s.x.values()) EXPECT_NEAR(v, 1.0, 1e-14);
  EXPECT_NEAR(s.residual_norm, l2_norm(fx.inverse.op->apply(s.x) - fx.inverse.data), 1e-14);
}

TEST(FlowInit, QuadraticStartsAtZero) {
  const auto p = quadratic_problem(4, 3, 4);
  const DualState s = flow_init(p);
  EXPECT_EQ(l2_norm(s.x), 0.0);
  EXPECT_DOUBLE_EQ(s.residual_norm, l2_norm(p.data));
}

TEST(FlowInit, TvStartsAtZero) {
  std::mt19937_64 rng(5);
  const InverseProblem p{make_dense_operator(random_matrix(6, 16, rng)), std::make_shared<TvStrongRegularizer>(1.0, 4, 4),
                         random_vector(Weights::unit(6), rng)};
  const DualState s = flow_init(p);
  for (double v : s.x.values()) EXPECT_EQ(v, 0.0);
}

TEST(EulerStep, ScalarHandArithmetic) {
  const auto p = scalar_problem();
  const DualState s = euler_step(flow_init(p), 0.1, p);
  EXPECT_DOUBLE_EQ(s.lambda[0], 0.1);
  EXPECT_DOUBLE_EQ(s.x[0], 0.1);
  EXPECT_DOUBLE_EQ(s.residual_norm, 0.9);
}

TEST(Steps, ZeroOperatorAddsData) {
  std::mt19937_64 rng(6);
  const InverseProblem p{make_zero_operator(Weights::unit(3), Weights::unit(4)),
                         std::make_shared<QuadraticRegularizer>(1.0), random_vector(Weights::unit(4), rng)};
  const DualState s0 = make_state(0.0, random_vector(Weights::unit(4), rng), p);
  for (Scheme sc : {Scheme::euler, Scheme::rk4}) {
    const DualState s1 = step(sc, s0, 0.3, p);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(s1.lambda[i], s0.lambda[i] + 0.3 * p.data[i], 1e-15);
    EXPECT_EQ(max_abs_diff(s1.x.values(), s0.x.values()), 0.0);
  }
}

TEST(Rk4Step, ScalarOneStep) {
  // Degree-4 Taylor polynomial of 1 - e^{-h} at h = 1/2:
  // h - h^2/2 + h^3/6 - h^4/24 = 151/384.
  const auto p = scalar_problem();
  const DualState s = rk4_step(flow_init(p), 0.5, p);
  EXPECT_NEAR(s.lambda[0], 151.0 / 384.0, 1e-15);
  EXPECT_NEAR(s.lambda[0], 0.3932291666666667, 1e-15);
  const double err = std::abs(s.lambda[0] - (1.0 - std::exp(-0.5)));
  EXPECT_NEAR(err, 2.401736207e-4, 1e-12);
  EXPECT_LE(err, std::pow(0.5, 5) / 120.0 * 1.01);
}

TEST(Rk4Step, TruncatedExponentialSeries) {
  RowMatrix m;
  const auto p = quadratic_problem(5, 4, 7, &m);
  std::mt19937_64 rng(8);
  const auto lam0 = random_vector(Weights::unit(5), rng);
  const double h = 0.05;
  // lambda' = y - K lambda with K = M M^T; one RK4 step is
  // lambda0 + sum_{k=1..4} h^k/k! (-K)^{k-1} (y - K lambda0).
  const Eigen::MatrixXd k = m * m.transpose();
  Eigen::VectorXd l0(5), y(5);
  for (int i = 0; i < 5; ++i) {
    l0(i) = lam0[i];
    y(i) = p.data[i];
  }
  Eigen::VectorXd term = y - k * l0, expected = l0;
  double coeff = 1.0;
  for (int j = 1; j <= 4; ++j) {
    coeff *= h / j;
    expected += coeff * term;
    term = -k * term;
  }
  const DualState s = rk4_step(make_state(0.0, lam0, p), h, p);
  for (int i = 0; i < 5; ++i) EXPECT_NEAR(s.lambda[i], expected(i), 1e-12 * (1.0 + std::abs(expected(i))));
}

TEST(Integrate, ScalarClosedFormAndOrderSeparation) {
  const auto p = scalar_problem();
  const double exact = 1.0 - std::exp(-1.0);
  const auto stop = [](const DualState& s) { return s.t >= 1.0 - 1e-12; };
  const Trajectory rk = integrate(p, opts(Scheme::rk4, 0.01, 10.0), stop);
  EXPECT_EQ(rk.reason, StopReason::predicate);
  EXPECT_NEAR(rk.final_state.t, 1.0, 1e-12);
  EXPECT_LE(std::abs(rk.final_state.x[0] - exact), 1e-9);
  const Trajectory eu = integrate(p, opts(Scheme::euler, 0.01, 10.0), stop);
  EXPECT_GE(std::abs(eu.final_state.x[0] - exact), 1e-4);
}

TEST(Integrate, StopsAtZeroWhenPredicateHoldsInitially) {
  const auto p = scalar_problem();
  const double target = 2.0;  // tau delta >= ||y||
  const Trajectory tr = integrate(p, opts(Scheme::rk4, 0.1, 5.0),
                                  [target](const DualState& s) { return s.residual_norm <= target; });
  EXPECT_EQ(tr.reason, StopReason::predicate);
  EXPECT_EQ(tr.steps, 0u);
  EXPECT_EQ(tr.final_state.t, 0.0);
  ASSERT_EQ(tr.records.size(), 1u);
}

TEST(Integrate, BudgetLandsOnTmax) {
  const auto p = scalar_problem();
  const Trajectory tr = integrate(p, opts(Scheme::rk4, 0.3, 1.0), [](const DualState&) { return false; });
  EXPECT_EQ(tr.reason, StopReason::budget);
  EXPECT_DOUBLE_EQ(tr.final_state.t, 1.0);
  EXPECT_EQ(tr.steps, 4u);
  for (std::size_t k = 1; k < tr.records.size(); ++k) EXPECT_GT(tr.records[k].t, tr.records[k - 1].t);
}

TEST(Integrate, StrideKeepsEndpoints) {
  const auto p = scalar_problem();
  auto o = opts(Scheme::euler, 0.1, 1.05);
  o.stride = 4;
  o.keep_lambda = true;
  const Trajectory tr = integrate(p, o, nullptr);
  EXPECT_EQ(tr.steps, 11u);
  // t = 0, steps 4 and 8, final step 11.
  ASSERT_EQ(tr.records.size(), 4u);
  EXPECT_EQ(tr.lambdas.size(), 4u);
  EXPECT_DOUBLE_EQ(tr.records.back().t, 1.05);
}

TEST(Integrate, InvalidOptionsThrow) {
  const auto p = scalar_problem();
  EXPECT_THROW(integrate(p, opts(Scheme::rk4, 0.0, 1.0), nullptr), std::invalid_argument);
  EXPECT_THROW(integrate(p, opts(Scheme::rk4, -1.0, 1.0), nullptr), std::invalid_argument);
  EXPECT_THROW(integrate(p, opts(Scheme::rk4, 0.1, std::numeric_limits<double>::infinity()), nullptr),
               std::invalid_argument);
}

TEST(Integrate, ObserversSeeEveryState) {
  const auto p = scalar_problem();
  std::vector<double> seen;
  const Observer obs = [&](const DualState& s) { seen.push_back(s.t); };
  const Trajectory tr = integrate(p, opts(Scheme::rk4, 0.25, 1.0), nullptr, std::span<const Observer>(&obs, 1));
  ASSERT_EQ(seen.size(), 5u);
  EXPECT_EQ(seen.front(), 0.0);
  EXPECT_DOUBLE_EQ(seen.back(), 1.0);
}

TEST(Integrate, ShowalterSvdOracle) {
  RowMatrix m;
  const auto p = quadratic_problem(20, 15, 2024, &m);
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double smax = svd.singularValues()(0);
  const double t = 5.0;
  Eigen::VectorXd y(20);
  for (int i = 0; i < 20; ++i) y(i) = p.data[i];
  Eigen::VectorXd expected = Eigen::VectorXd::Zero(15);
  for (int k = 0; k < svd.singularValues().size(); ++k) {
    const double s = svd.singularValues()(k);
    expected += (1.0 - std::exp(-s * s * t)) / s * svd.matrixU().col(k).dot(y) * svd.matrixV().col(k);
  }
  const double lip = smax * smax;  // ||A||^2 / (2 c0) with c0 = 1/2
  const Trajectory tr = integrate(p, opts(Scheme::rk4, 0.01 / lip, t), nullptr);
  double diff = 0.0;
  for (int j = 0; j < 15; ++j) diff += std::pow(tr.final_state.x[j] - expected(j), 2);
  EXPECT_LE(std::sqrt(diff), 1e-6 * expected.norm());
}

TEST(Integrate, Rk4HalvingGivesSixteenfold) {
  const auto p = quadratic_problem(6, 4, 9);
  const double lip = std::pow(p.op->norm(), 2);
  const double t = 2.0;
  std::vector<WeightedVector> xs;
  for (double dt : {0.8 / lip, 0.4 / lip, 0.2 / lip}) {
    xs.push_back(integrate(p, opts(Scheme::rk4, t / std::ceil(t / dt), t), nullptr).final_state.x);
  }
  // Use equal subdivisions so each step halves exactly.
  const double d1 = l2_norm(xs[0] - xs[1]), d2 = l2_norm(xs[1] - xs[2]);
  EXPECT_GT(d1 / d2, 12.0);
  EXPECT_LT(d1 / d2, 20.0);
}

TEST(Integrate, EulerAndRk4AgreeAsStepShrinks) {
  const auto p = quadratic_problem(6, 4, 10);
  const double lip = std::pow(p.op->norm(), 2);
  double prev = std::numeric_limits<double>::infinity();
  for (double dt : {0.5 / lip, 0.05 / lip, 0.005 / lip}) {
    const auto xe = integrate(p, opts(Scheme::euler, dt, 1.0), nullptr).final_state.x;
    const auto xr = integrate(p, opts(Scheme::rk4, dt, 1.0), nullptr).final_state.x;
    const double d = l2_norm(xe - xr);
    EXPECT_LT(d, prev);
    prev = d;
  }
  EXPECT_LT(prev, 1e-3);
}

TEST(Stability, Formula) {
  RowMatrix one(1, 1);
  one(0, 0) = 1.0;
  EXPECT_DOUBLE_EQ(stability_max_step(*make_dense_operator(one), QuadraticRegularizer(1.0)), 2.0);
  RowMatrix ten(1, 1);
  ten(0, 0) = 10.0;
  EXPECT_NEAR(stability_max_step(*make_dense_operator(ten), TvStrongRegularizer(1.0, 1, 1)), 0.02, 1e-15);
  EXPECT_EQ(stability_max_step(*make_zero_operator(Weights::unit(2), Weights::unit(2)), QuadraticRegularizer(1.0)),
            std::numeric_limits<double>::infinity());
}

TEST(Stability, EntropyUsesL1Norm) {
  const Problem fx = gaussian_deconvolution_fixture(201);
  const double a = fx.inverse.op->l1_norm();
  EXPECT_DOUBLE_EQ(stability_max_step(*fx.inverse.op, *fx.inverse.reg), 2.0 / (a * a));
}

TEST(Monotonicity, EulerAtBoundOnEntropyFixture) {
  const Problem fx = gaussian_deconvolution_fixture(801, 1e-2, 0);
  auto o = fx.options(Scheme::euler);
  o.dt = stability_max_step(*fx.inverse.op, *fx.inverse.reg);
  o.t_max = 500 * o.dt;
  const Trajectory tr = integrate(fx.inverse, o, nullptr);
  EXPECT_EQ(tr.steps, 500u);
  EXPECT_LE(tr.max_residual_increase, 1e-9 * (1.0 + l2_norm(fx.inverse.data)));
}

TEST(Monotonicity, Rk4PresetOnEntropyFixture) {
  const Problem fx = gaussian_deconvolution_fixture(801, 1e-2, 0);
  auto o = fx.options();
  o.t_max = 200.0;
  const Trajectory tr = integrate(fx.inverse, o, nullptr);
  EXPECT_LE(tr.max_residual_increase, 1e-9 * (1.0 + l2_norm(fx.inverse.data)));
}

TEST(Monotonicity, QuadraticAndTvAtBound) {
  std::mt19937_64 rng(11);
  const std::vector<InverseProblem> problems = {
      quadratic_problem(9, 7, 12),
      {make_dense_operator(random_matrix(10, 25, rng)), std::make_shared<TvStrongRegularizer>(1.0, 5, 5),
       random_vector(Weights::unit(10), rng)},
  };
  for (const auto& p : problems) {
    for (Scheme sc : {Scheme::euler, Scheme::rk4}) {
      auto o = opts(sc, stability_max_step(*p.op, *p.reg), 0.0);
      o.t_max = 300 * o.dt;
      const Trajectory tr = integrate(p, o, nullptr);
      EXPECT_LE(tr.max_residual_increase, 1e-9 * (1.0 + l2_norm(p.data))) << p.reg->name() << " " << to_string(sc);
    }
  }
}

TEST(Records, TraceColumns) {
  const Problem fx = gaussian_deconvolution_fixture(101, 1e-2, 0);
  auto o = fx.options();
  o.t_max = 2.0;
  const Trajectory tr = integrate(fx.inverse, o, nullptr);
  const auto& r0 = tr.records.front();
  EXPECT_EQ(r0.t, 0.0);
  EXPECT_NEAR(r0.r_value, 0.0, 1e-14);
  EXPECT_NEAR(r0.dual_objective, 0.0, 1e-14);
  EXPECT_NEAR(r0.theta, 0.1 * r0.residual_norm * r0.residual_norm, 1e-14);
  EXPECT_FALSE(std::isnan(r0.relative_error));
  for (std::size_t k = 1; k < tr.records.size(); ++k) {
    EXPECT_LE(tr.records[k].dual_objective, tr.records[k - 1].dual_objective + 1e-9);
  }
  o.truth.reset();
  EXPECT_TRUE(std::isnan(integrate(fx.inverse, o, nullptr).records.back().relative_error));
}
