#include "dualflow/problems.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

namespace dualflow {

IntegrateOptions Problem::options(Scheme scheme) const {
  IntegrateOptions o;
  o.scheme = scheme;
  o.dt = preset_dt;
  o.error_norm = error_norm;
  o.truth = truth;
  return o;
}

NoisyData add_gaussian_noise(const WeightedVector& y, NoiseTarget target, std::uint64_t seed) {
  if (!(target.value > 0.0)) throw std::invalid_argument("add_gaussian_noise: target must be positive");
  for (double v : y.values()) {
    if (!std::isfinite(v)) throw std::invalid_argument("add_gaussian_noise: data must be finite");
  }
  const double delta = target.kind == NoiseTarget::Kind::absolute ? target.value : target.value * l2_norm(y);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  WeightedVector e(y.weights());
  double e_norm = 0.0;
  while (!(e_norm > 0.0)) {
    for (std::size_t i = 0; i < e.size(); ++i) e[i] = normal(rng);
    e_norm = l2_norm(e);
  }
  NoisyData out{y, delta};
  out.data.axpy(delta / e_norm, e);
  return out;
}

double deconvolution_kernel(double s, double s_prime) {
  const double d = s - s_prime;
  return 4.0 * std::exp(-d * d / 0.0064);
}

double deconvolution_profile(double s) {
  return std::exp(-60.0 * (s - 0.3) * (s - 0.3)) + 0.3 * std::exp(-40.0 * (s - 0.7) * (s - 0.7));
}

Problem gaussian_deconvolution_fixture(std::size_t grid_n, double delta, std::uint64_t seed) {
  if (grid_n < 2) throw std::invalid_argument("gaussian_deconvolution_fixture: grid_n must be >= 2");
  const OperatorPtr op = build_integral_operator(deconvolution_kernel, grid_n);
  const Weights w = op->domain_weights();

  WeightedVector truth(w);
  const double h = 1.0 / static_cast<double>(grid_n - 1);
  for (std::size_t i = 0; i < grid_n; ++i) truth[i] = deconvolution_profile(static_cast<double>(i) * h);
  truth *= 1.0 / integral(truth);

  Problem p;
  p.name = "deconvolution";
  WeightedVector y = op->apply(truth);
  NoisyData noisy = add_gaussian_noise(y, NoiseTarget::absolute(delta), seed);
  p.inverse = InverseProblem{op, std::make_shared<EntropySimplexRegularizer>(w), std::move(noisy.data)};
  p.exact_data = std::move(y);
  p.truth = std::move(truth);
  p.delta = noisy.delta;
  p.error_norm = NormKind::l1;
  p.preset_dt = 0.4;
  return p;
}

std::vector<double> modified_shepp_logan(std::size_t n) {
  struct Ellipse {
    int tenths;  // intensity in units of 0.1 so that sums are exact
    double a, b, x0, y0, phi_deg;
  };
  static constexpr std::array<Ellipse, 10> kEllipses{{
      {10, 0.69, 0.92, 0.0, 0.0, 0.0},
      {-8, 0.6624, 0.8740, 0.0, -0.0184, 0.0},
      {-2, 0.1100, 0.3100, 0.22, 0.0, -18.0},
      {-2, 0.1600, 0.4100, -0.22, 0.0, 18.0},
      {1, 0.2100, 0.2500, 0.0, 0.35, 0.0},
      {1, 0.0460, 0.0460, 0.0, 0.1, 0.0},
      {1, 0.0460, 0.0460, 0.0, -0.1, 0.0},
      {1, 0.0460, 0.0230, -0.08, -0.605, 0.0},
      {1, 0.0230, 0.0230, 0.0, -0.606, 0.0},
      {1, 0.0230, 0.0460, 0.06, -0.605, 0.0},
  }};
  std::vector<double> img(n * n, 0.0);
  if (n == 0) return img;
  auto coord = [n](std::size_t k) {
    return n == 1 ? 0.0 : (static_cast<double>(k) - 0.5 * static_cast<double>(n - 1)) / (0.5 * static_cast<double>(n - 1));
  };
  for (std::size_t r = 0; r < n; ++r) {
    const double y = -coord(r);
    for (std::size_t c = 0; c < n; ++c) {
      const double x = coord(c);
      int acc = 0;
      for (const auto& e : kEllipses) {
        const double phi = e.phi_deg * std::numbers::pi / 180.0;
        const double dx = x - e.x0, dy = y - e.y0;
        const double u = dx * std::cos(phi) + dy * std::sin(phi);
        const double v = dy * std::cos(phi) - dx * std::sin(phi);
        if (u * u / (e.a * e.a) + v * v / (e.b * e.b) <= 1.0) acc += e.tenths;
      }
      img[r * n + c] = static_cast<double>(acc) / 10.0;
    }
  }
  return img;
}

Problem shepp_logan_fixture(std::size_t image_n, std::size_t n_angles, std::size_t n_detectors, double delta_rel,
                            std::uint64_t seed, TvProxSettings tv_settings) {
  const OperatorPtr op = build_parallel_beam(image_n, n_angles, n_detectors);
  WeightedVector truth(modified_shepp_logan(image_n), op->domain_weights());
  WeightedVector y = op->apply(truth);
  NoisyData noisy = add_gaussian_noise(y, NoiseTarget::relative(delta_rel), seed);

  auto reg = std::make_shared<TvStrongRegularizer>(1.0, image_n, image_n, tv_settings);
  Problem p;
  p.name = "tomography";
  p.preset_dt = 0.9 * stability_max_step(*op, *reg);
  p.inverse = InverseProblem{op, std::move(reg), std::move(noisy.data)};
  p.exact_data = std::move(y);
  p.truth = std::move(truth);
  p.delta = noisy.delta;
  p.error_norm = NormKind::l2;
  p.image_rows = image_n;
  p.image_cols = image_n;
  return p;
}

double psi_value(const WeightedVector& x) { return 0.5 * inner(x, x); }

double base_value(const PerturbationSetup& setup, const WeightedVector& x) {
  return setup.l1_weight * l1_norm(x) + 0.5 * setup.scale * inner(x, x);
}

PerturbationReport perturbation_experiment(const PerturbationSetup& setup, const OperatorPtr& op,
                                           const WeightedVector& y, const PerturbationOptions& options) {
  if (setup.alphas.empty()) throw std::invalid_argument("perturbation_experiment: empty alpha ladder");
  for (std::size_t k = 0; k < setup.alphas.size(); ++k) {
    if (!(setup.alphas[k] > 0.0)) throw std::invalid_argument("perturbation_experiment: alphas must be positive");
    if (k > 0 && !(setup.alphas[k] < setup.alphas[k - 1])) {
      throw std::invalid_argument("perturbation_experiment: alphas must be strictly decreasing");
    }
  }

  PerturbationReport rep;
  for (double alpha : setup.alphas) {
    auto reg = std::make_shared<ElasticL1Regularizer>(setup.l1_weight, setup.scale + alpha);
    const InverseProblem problem{op, reg, y};
    IntegrateOptions opt;
    opt.scheme = Scheme::rk4;
    opt.dt = options.dt_fraction * stability_max_step(*op, *reg);
    opt.t_max = opt.dt * static_cast<double>(options.max_steps);
    opt.stride = options.max_steps;  // only the end points matter here
    const double tol = options.residual_tolerance;
    const Trajectory traj = integrate(problem, opt, [tol](const DualState& s) { return s.residual_norm <= tol; });

    PerturbationRow row;
    row.alpha = alpha;
    row.x_alpha = traj.final_state.x;
    row.r_value = base_value(setup, row.x_alpha);
    row.psi_value = psi_value(row.x_alpha);
    row.residual_norm = traj.final_state.residual_norm;
    row.converged = traj.reason == StopReason::predicate;
    row.distance_to_reference = options.reference ? l2_norm(row.x_alpha - *options.reference)
                                                  : std::numeric_limits<double>::quiet_NaN();
    rep.partial = rep.partial || !row.converged;
    rep.rows.push_back(std::move(row));
  }
  rep.x_star_proxy = rep.rows.back().x_alpha;
  for (auto& row : rep.rows) row.distance_to_proxy = l2_norm(row.x_alpha - rep.x_star_proxy);
  return rep;
}

}  // namespace dualflow
