#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dualflow/flow.hpp"
#include "dualflow/regularizer.hpp"

namespace dualflow {

/// Experiment fixture: an inverse problem plus what is needed to score it.
struct Problem {
  std::string name;
  InverseProblem inverse;
  std::optional<WeightedVector> exact_data;
  std::optional<WeightedVector> truth;
  double delta = 0.0;
  NormKind error_norm = NormKind::l2;
  double preset_dt = 0.0;
  /// Image shape for 2D fixtures; 0 x 0 for 1D.
  std::size_t image_rows = 0;
  std::size_t image_cols = 0;

  /// Integrator options preloaded with the preset step, the error norm and
  /// the ground truth.
  IntegrateOptions options(Scheme scheme = Scheme::rk4) const;
};

struct NoiseTarget {
  enum class Kind { absolute, relative };
  Kind kind = Kind::absolute;
  double value = 0.0;

  static NoiseTarget absolute(double delta) { return {Kind::absolute, delta}; }
  static NoiseTarget relative(double delta_rel) { return {Kind::relative, delta_rel}; }
};

struct NoisyData {
  WeightedVector data;
  double delta = 0.0;
};

/// y^delta = y + (delta / ||e||) e with e i.i.d. standard normal from a
/// mt19937_64 seeded generator, so ||y^delta - y|| = delta exactly (up to
/// rounding). A relative target sets delta = value * ||y||.
NoisyData add_gaussian_noise(const WeightedVector& y, NoiseTarget target, std::uint64_t seed);

double deconvolution_kernel(double s, double s_prime);
/// Unnormalized two-bump density; the fixture rescales it to unit mass.
double deconvolution_profile(double s);

/// Fredholm deconvolution on [0, 1] with the Gaussian kernel, entropy
/// regularizer on the probability simplex, trapezoid quadrature, L1 error.
Problem gaussian_deconvolution_fixture(std::size_t grid_n = 801, double delta = 1e-2, std::uint64_t seed = 0);

/// Modified (ten-ellipse) Shepp-Logan phantom, row-major, row 0 at the top,
/// sampled on the [-1, 1]^2 grid including the end points.
std::vector<double> modified_shepp_logan(std::size_t n);

/// Parallel-beam CT of the modified Shepp-Logan phantom with the TV +
/// quadratic regularizer (beta = 1), relative Gaussian noise and L2 error.
Problem shepp_logan_fixture(std::size_t image_n = 64, std::size_t n_angles = 30, std::size_t n_detectors = 95,
                            double delta_rel = 1e-2, std::uint64_t seed = 0, TvProxSettings tv_settings = {});

/// Base functional R = l1_weight ||x||_1 + (scale/2) ||x||^2 perturbed by
/// alpha Psi with Psi = 1/2 ||x||^2.
struct PerturbationSetup {
  double l1_weight = 1.0;
  double scale = 0.0;
  std::vector<double> alphas;  // strictly decreasing, positive
};

struct PerturbationRow {
  double alpha = 0.0;
  WeightedVector x_alpha;
  double r_value = 0.0;    // base R(x_alpha)
  double psi_value = 0.0;  // Psi(x_alpha)
  double distance_to_proxy = 0.0;
  /// NaN without a reference solution.
  double distance_to_reference = 0.0;
  double residual_norm = 0.0;
  bool converged = false;
};

struct PerturbationReport {
  std::vector<PerturbationRow> rows;
  WeightedVector x_star_proxy;
  bool partial = false;
};

struct PerturbationOptions {
  double residual_tolerance = 1e-8;
  std::size_t max_steps = 200000;
  /// Fraction of the stability bound used as step size.
  double dt_fraction = 0.5;
  std::optional<WeightedVector> reference;
};

/// Solves min { R + alpha Psi : A x = y } for each alpha by running the dual
/// flow on exact data until the residual drops below the tolerance. The
/// smallest alpha supplies the proxy for the Psi-minimal R-minimizer x*.
///
/// Throws std::invalid_argument unless the alphas are positive and strictly
/// decreasing.
PerturbationReport perturbation_experiment(const PerturbationSetup& setup, const OperatorPtr& op,
                                           const WeightedVector& y, const PerturbationOptions& options = {});

double psi_value(const WeightedVector& x);
double base_value(const PerturbationSetup& setup, const WeightedVector& x);

}  // namespace dualflow
