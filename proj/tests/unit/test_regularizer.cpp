#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <random>

#include "dualflow/regularizer.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace dualflow;
using namespace dualflow::testing;

namespace {

TvProxSettings tight(TvSolver solver = TvSolver::dykstra) {
  TvProxSettings s;
  s.solver = solver;
  s.relative_tolerance = 1e-10;
  s.max_iter = 200000;
  return s;
}

}  // namespace

TEST(RegularizerValue, Quadratic) {
  EXPECT_DOUBLE_EQ(QuadraticRegularizer(1.0).value(WeightedVector({3.0, 4.0}, Weights::unit(2))), 12.5);
}

TEST(RegularizerValue, EntropyUniformIsZero) {
  const Weights w = Weights::trapezoid(101);
  const EntropySimplexRegularizer reg(w);
  EXPECT_NEAR(reg.value(WeightedVector(std::vector<double>(101, 1.0), w)), 0.0, 1e-14);
}

TEST(RegularizerValue, EntropyInfeasibleIsInfinite) {
  const Weights w = Weights::unit(3);
  const EntropySimplexRegularizer reg(w);
  EXPECT_EQ(reg.value(WeightedVector({0.5, 0.6, -0.1}, w)), std::numeric_limits<double>::infinity());
  EXPECT_EQ(reg.value(WeightedVector({0.5, 0.5, 0.1}, w)), std::numeric_limits<double>::infinity());
  EXPECT_TRUE(std::isfinite(reg.value(WeightedVector({0.5, 0.5, 0.0}, w))));
}

TEST(RegularizerValue, TvStrongTwoByTwo) {
  const TvStrongRegularizer reg(1.0, 2, 2);
  EXPECT_DOUBLE_EQ(reg.value(WeightedVector({0.0, 1.0, 0.0, 1.0}, Weights::unit(4))), 3.0);
  EXPECT_DOUBLE_EQ(anisotropic_tv(std::vector<double>{0.0, 1.0, 0.0, 1.0}, 2, 2), 2.0);
}

TEST(RegularizerValue, ElasticL1) {
  const ElasticL1Regularizer reg(2.0, 0.5);
  EXPECT_DOUBLE_EQ(reg.value(WeightedVector({1.0, -2.0}, Weights::unit(2))), 2.0 * 3.0 + 0.25 * 5.0);
}

TEST(RegularizerConstruction, InvalidParametersThrow) {
  EXPECT_THROW(QuadraticRegularizer(0.0), std::invalid_argument);
  EXPECT_THROW(TvStrongRegularizer(-1.0, 2, 2), std::invalid_argument);
  EXPECT_THROW(ElasticL1Regularizer(1.0, 0.0), std::invalid_argument);
  EXPECT_THROW(ElasticL1Regularizer(-1.0, 1.0), std::invalid_argument);
}

TEST(ConjGrad, QuadraticIsScaledIdentity) {
  std::mt19937_64 rng(1);
  const auto xi = random_vector(random_weights(6, rng), rng);
  const auto x = QuadraticRegularizer(1.0).conj_grad(xi);
  EXPECT_EQ(max_abs_diff(x.values(), xi.values()), 0.0);
  const auto x2 = QuadraticRegularizer(4.0).conj_grad(xi);
  for (std::size_t i = 0; i < xi.size(); ++i) EXPECT_DOUBLE_EQ(x2[i], xi[i] / 4.0);
}

TEST(ConjGrad, EntropyZeroIsUniform) {
  const Weights w = Weights::trapezoid(51);
  const auto x = EntropySimplexRegularizer(w).conj_grad(WeightedVector(w));
  for (double v : x.values()) EXPECT_NEAR(v, 1.0, 1e-14);
}

TEST(ConjGrad, EntropyMatchesProjectedGradientOracle) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    const Weights w = seed % 2 ? random_weights(5, rng) : Weights::unit(5);
    const auto xi = random_vector(w, rng);
    const auto x = EntropySimplexRegularizer(w).conj_grad(xi);
    const auto oracle = entropy_oracle(xi);
    EXPECT_LE(max_abs_diff(x.values(), oracle), 1e-8) << "seed " << seed;
  }
}

TEST(ConjGrad, ElasticIsSoftThresholdScaled) {
  const ElasticL1Regularizer reg(1.0, 2.0);
  const auto x = reg.conj_grad(WeightedVector({3.0, -0.5, -1.5, 1.0}, Weights::unit(4)));
  EXPECT_DOUBLE_EQ(x[0], 1.0);
  EXPECT_DOUBLE_EQ(x[1], 0.0);
  EXPECT_DOUBLE_EQ(x[2], -0.25);
  EXPECT_DOUBLE_EQ(x[3], 0.0);
}

TEST(ConjGrad, TvStrongIsProxOfScaledInput) {
  std::mt19937_64 rng(2);
  const double beta = 0.7;
  const TvStrongRegularizer reg(beta, 4, 5, tight());
  const auto xi = random_vector(Weights::unit(20), rng, 2.0);
  std::vector<double> v(20);
  for (std::size_t i = 0; i < 20; ++i) v[i] = beta * xi[i];
  const auto oracle = tv_prox_oracle(v, 4, 5, beta);
  EXPECT_LE(max_abs_diff(reg.conj_grad(xi).values(), oracle), 1e-6);
}

TEST(ConjGrad, TvStrongZeroGivesZero) {
  const TvStrongRegularizer reg(1.0, 4, 4);
  const auto x = reg.conj_grad(WeightedVector(Weights::unit(16)));
  for (double v : x.values()) EXPECT_EQ(v, 0.0);
}

TEST(ConjGrad, TvSizeMismatchThrows) {
  const TvStrongRegularizer reg(1.0, 4, 4);
  EXPECT_THROW(reg.conj_grad(WeightedVector(Weights::unit(15))), std::invalid_argument);
}

TEST(Softmax, ClosedForm) {
  const Weights w = Weights::unit(3);
  const auto x = softmax_map(WeightedVector({std::log(1.0), std::log(2.0), std::log(3.0)}, w), w);
  EXPECT_NEAR(x[0], 1.0 / 6.0, 1e-15);
  EXPECT_NEAR(x[1], 2.0 / 6.0, 1e-15);
  EXPECT_NEAR(x[2], 3.0 / 6.0, 1e-15);
}

TEST(Softmax, PositiveNormalizedShiftInvariant) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Weights w = random_weights(30, rng);
    auto xi = random_vector(w, rng, 50.0);
    const auto x = softmax_map(xi, w);
    for (double v : x.values()) EXPECT_GT(v, 0.0);
    EXPECT_NEAR(integral(x), 1.0, 1e-14);
    for (std::size_t i = 0; i < xi.size(); ++i) xi[i] += 123.25;
    const auto shifted = softmax_map(xi, w);
    EXPECT_LE(max_abs_diff(x.values(), shifted.values()), 1e-12 * linf_norm(x));
  }
}

TEST(Softmax, NoOverflowForHugeInputs) {
  const Weights w = Weights::unit(2);
  const auto x = softmax_map(WeightedVector({1e300, 1e300}, w), w);
  EXPECT_DOUBLE_EQ(x[0], 0.5);
}

TEST(TvDenoise1d, MatchesDualBoxOracleOnSpike) {
  const std::vector<double> v{0.0, 0.0, 4.0, 0.0};
  const auto oracle = tv_prox_oracle(v, 1, 4, 1.0);
  std::vector<double> out(4);
  tv_denoise_1d(v.data(), out.data(), 4, 1.0);
  EXPECT_LE(max_abs_diff(out, oracle), 1e-6);
  const auto pd = tv_prox_pdhg(v, 1, 4, 1.0, 1e-12, 100000);
  EXPECT_LE(max_abs_diff(pd.image, oracle), 1e-6);
  const auto dy = tv_prox_dykstra(v, 1, 4, 1.0, 1e-12, 100000);
  EXPECT_LE(max_abs_diff(dy.image, oracle), 1e-6);
}

TEST(TvDenoise1d, MatchesOracleOnRandomSignals) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> lam(0.01, 3.0);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> v(9);
    for (double& x : v) x = 2.0 * nd(rng);
    const double l = lam(rng);
    const auto oracle = tv_prox_oracle(v, 1, 9, l, 200000);
    std::vector<double> out(9);
    tv_denoise_1d(v.data(), out.data(), 9, l);
    EXPECT_LE(max_abs_diff(out, oracle), 1e-6) << "trial " << trial;
  }
}

TEST(TvDenoise1d, StridedAccess) {
  const std::vector<double> v{0.0, 9.0, 0.0, 9.0, 4.0, 9.0, 0.0, 9.0};
  std::vector<double> out(8, -1.0), ref(4);
  const std::vector<double> packed{0.0, 0.0, 4.0, 0.0};
  tv_denoise_1d(v.data(), out.data(), 4, 1.0, 2);
  tv_denoise_1d(packed.data(), ref.data(), 4, 1.0);
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_DOUBLE_EQ(out[2 * k], ref[k]);
    EXPECT_EQ(out[2 * k + 1], -1.0);
  }
}

TEST(TvDenoise1d, TrivialLengths) {
  double in = 3.5, out = 0.0;
  tv_denoise_1d(&in, &out, 1, 10.0);
  EXPECT_EQ(out, 3.5);
  const double two[2] = {0.0, 1.0};
  double res[2];
  tv_denoise_1d(two, res, 2, 10.0);
  EXPECT_DOUBLE_EQ(res[0], 0.5);
  EXPECT_DOUBLE_EQ(res[1], 0.5);
}

class TvProx2d : public ::testing::TestWithParam<TvSolver> {
 protected:
  TvProxResult solve(std::span<const double> v, std::size_t r, std::size_t c, double beta, double tol,
                     int max_iter = 200000) {
    return GetParam() == TvSolver::pdhg ? tv_prox_pdhg(v, r, c, beta, tol, max_iter)
                                        : tv_prox_dykstra(v, r, c, beta, tol, max_iter);
  }
};

TEST_P(TvProx2d, MatchesDualBoxOracleThreeByThree) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(100 + seed);
    std::normal_distribution<double> nd;
    std::vector<double> v(9);
    for (double& x : v) x = 2.0 * nd(rng);
    const double beta = 0.5 + 0.25 * static_cast<double>(seed);
    const auto oracle = tv_prox_oracle(v, 3, 3, beta);
    const auto res = solve(v, 3, 3, beta, 1e-13);
    EXPECT_LE(max_abs_diff(res.image, oracle), 1e-6) << "seed " << seed;
    EXPECT_LE(res.gap, 1e-13);
  }
}

TEST_P(TvProx2d, ConstantImageIsFixed) {
  const std::vector<double> v(30, 2.5);
  const auto res = solve(v, 5, 6, 3.0, 1e-12);
  EXPECT_LE(max_abs_diff(res.image, v), 1e-9);
}

TEST_P(TvProx2d, SmallBetaReturnsInput) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd;
  std::vector<double> v(64);
  for (double& x : v) x = nd(rng);
  // The dual iterate scales like 1/beta, so the certificate carries rounding of
  // order 1e-16/beta; ask only for what is resolvable.
  const auto res = solve(v, 8, 8, 1e-6, 1e-7);
  double diff = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < 64; ++i) {
    diff += (res.image[i] - v[i]) * (res.image[i] - v[i]);
    nv += v[i] * v[i];
  }
  EXPECT_LE(std::sqrt(diff), 1e-3 * std::sqrt(nv));
}

TEST_P(TvProx2d, IterationCapThrowsWithGap) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> nd;
  std::vector<double> v(64);
  for (double& x : v) x = 5.0 * nd(rng);
  try {
    solve(v, 8, 8, 1.0, 1e-300, 3);
    FAIL() << "expected InnerSolverError";
  } catch (const InnerSolverError& e) {
    EXPECT_GT(e.last_gap(), 0.0);
    EXPECT_EQ(e.iterations(), 3);
  }
}

TEST_P(TvProx2d, WarmStartGivesSameAnswer) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd;
  std::vector<double> v(48), v2(48);
  for (std::size_t i = 0; i < 48; ++i) {
    v[i] = nd(rng);
    v2[i] = v[i] + 0.01 * nd(rng);
  }
  std::vector<double> dual;
  const auto first = GetParam() == TvSolver::pdhg ? tv_prox_pdhg(v, 6, 8, 1.0, 1e-12, 200000, &dual)
                                                  : tv_prox_dykstra(v, 6, 8, 1.0, 1e-12, 200000, &dual);
  const auto warm = GetParam() == TvSolver::pdhg ? tv_prox_pdhg(v2, 6, 8, 1.0, 1e-12, 200000, &dual)
                                                 : tv_prox_dykstra(v2, 6, 8, 1.0, 1e-12, 200000, &dual);
  const auto cold = solve(v2, 6, 8, 1.0, 1e-12);
  EXPECT_LE(max_abs_diff(warm.image, cold.image), 1e-5);
  EXPECT_GT(first.iterations, 0);
}

INSTANTIATE_TEST_SUITE_P(Solvers, TvProx2d, ::testing::Values(TvSolver::dykstra, TvSolver::pdhg),
                         [](const auto& info) { return std::string(to_string(info.param)); });

namespace {

struct Case {
  std::string label;
  RegularizerPtr reg;
  Weights weights;
  double xi_scale;
  // Feasible random point of dom R.
  std::function<WeightedVector(std::mt19937_64&)> feasible;
};

std::vector<Case> cases() {
  std::mt19937_64 wrng(8);
  const Weights ew = random_weights(12, wrng);
  const Weights qw = random_weights(10, wrng);
  const Weights u36 = Weights::unit(36);
  std::vector<Case> out;
  out.push_back({"quadratic", std::make_shared<QuadraticRegularizer>(2.0), qw, 1.0,
                 [qw](std::mt19937_64& r) { return random_vector(qw, r); }});
  out.push_back({"entropy", std::make_shared<EntropySimplexRegularizer>(ew), ew, 3.0,
                 [ew](std::mt19937_64& r) { return random_density(ew, r); }});
  out.push_back({"elastic", std::make_shared<ElasticL1Regularizer>(0.7, 1.5), qw, 2.0,
                 [qw](std::mt19937_64& r) { return random_vector(qw, r); }});
  out.push_back({"tv_dykstra", std::make_shared<TvStrongRegularizer>(0.8, 6, 6, tight()), u36, 3.0,
                 [u36](std::mt19937_64& r) { return random_vector(u36, r); }});
  out.push_back({"tv_pdhg", std::make_shared<TvStrongRegularizer>(0.8, 6, 6, tight(TvSolver::pdhg)), u36, 3.0,
                 [u36](std::mt19937_64& r) { return random_vector(u36, r); }});
  return out;
}

}  // namespace

TEST(RegularizerInvariants, LipschitzAndStrongMonotonicity) {
  for (const auto& c : cases()) {
    std::mt19937_64 rng(9);
    const double c0 = c.reg->modulus();
    const NormKind nk = c.reg->norm_kind();
    for (int k = 0; k < 100; ++k) {
      const auto xi = random_vector(c.weights, rng, c.xi_scale);
      const auto xi2 = random_vector(c.weights, rng, c.xi_scale);
      const auto x = c.reg->conj_grad(xi);
      const auto x2 = c.reg->conj_grad(xi2);
      const double dx = norm(x2 - x, nk);
      const double dxi = dual_norm(xi2 - xi, nk);
      EXPECT_LE(dx, dxi / (2.0 * c0) + 1e-6) << c.label;
      EXPECT_LE(2.0 * c0 * dx * dx, inner(xi2 - xi, x2 - x) + 1e-8) << c.label;
    }
  }
}

TEST(RegularizerInvariants, VariationalOptimality) {
  for (const auto& c : cases()) {
    std::mt19937_64 rng(10);
    for (int k = 0; k < 5; ++k) {
      const auto xi = random_vector(c.weights, rng, c.xi_scale);
      const auto x = c.reg->conj_grad(xi);
      const double fx = c.reg->value(x) - inner(xi, x);
      const double slack = 1e-9 * (1.0 + l2_norm(xi));
      for (int j = 0; j < 100; ++j) {
        const auto z = c.feasible(rng);
        EXPECT_LE(fx, c.reg->value(z) - inner(xi, z) + slack) << c.label;
        // Also along the segment towards x, where the margin is small.
        const auto zc = x + 1e-3 * (z - x);
        EXPECT_LE(fx, c.reg->value(zc) - inner(xi, zc) + slack) << c.label;
      }
      // Fenchel-Young through the conjugate pair.
      EXPECT_NEAR(c.reg->conjugate(xi), inner(xi, x) - c.reg->value(x), 1e-12 * (1.0 + std::abs(fx))) << c.label;
    }
  }
}

TEST(Bregman, SelfDistanceIsZero) {
  std::mt19937_64 rng(11);
  for (const auto& c : cases()) {
    const auto xi = random_vector(c.weights, rng, c.xi_scale);
    const auto x0 = c.reg->conj_grad(xi);
    EXPECT_NEAR(bregman(*c.reg, x0, x0, xi).value, 0.0, 1e-12) << c.label;
  }
}

TEST(Bregman, QuadraticHalfSquaredDistance) {
  const Weights w = Weights::unit(2);
  const auto rep = bregman(QuadraticRegularizer(1.0), WeightedVector({1.0, 0.0}, w), WeightedVector(w),
                           WeightedVector(w));
  EXPECT_DOUBLE_EQ(rep.value, 0.5);
}

TEST(Bregman, EntropyIsKullbackLeibler) {
  std::mt19937_64 rng(12);
  const Weights w = random_weights(4, rng);
  const EntropySimplexRegularizer reg(w);
  for (int k = 0; k < 10; ++k) {
    const auto xi0 = random_vector(w, rng);
    const auto x0 = reg.conj_grad(xi0);
    const auto x = random_density(w, rng);
    double kl = 0.0;
    for (std::size_t i = 0; i < 4; ++i) kl += w[i] * x[i] * std::log(x[i] / x0[i]);
    EXPECT_NEAR(bregman(reg, x, x0, xi0).value, kl, 1e-12);
  }
}

TEST(Bregman, InfeasibleIsInfinite) {
  const Weights w = Weights::unit(3);
  const EntropySimplexRegularizer reg(w);
  const WeightedVector x0({1.0 / 3, 1.0 / 3, 1.0 / 3}, w);
  EXPECT_EQ(bregman(reg, WeightedVector({2.0, 0.0, -1.0}, w), x0, WeightedVector(w)).value,
            std::numeric_limits<double>::infinity());
}

TEST(Bregman, StrongConvexityLowerBound) {
  for (const auto& c : cases()) {
    std::mt19937_64 rng(13);
    const double c0 = c.reg->modulus();
    for (int k = 0; k < 50; ++k) {
      const auto xi0 = random_vector(c.weights, rng, c.xi_scale);
      const auto x0 = c.reg->conj_grad(xi0);
      const auto x = c.feasible(rng);
      const double d = bregman(*c.reg, x, x0, xi0).value;
      const double dist = norm(x - x0, c.reg->norm_kind());
      EXPECT_GE(d, 0.0) << c.label;
      EXPECT_GE(d, c0 * dist * dist - 1e-8) << c.label;
    }
  }
}
