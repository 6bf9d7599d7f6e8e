#include "dualflow/operator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

namespace dualflow {

namespace {

using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;
using VecMap = Eigen::Map<Eigen::VectorXd>;

double weighted_norm(std::span<const double> v, std::span<const double> w) {
  double acc = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) acc += w[i] * v[i] * v[i];
  return std::sqrt(acc);
}

}  // namespace

ForwardOperator::ForwardOperator(Weights domain, Weights range)
    : domain_(std::move(domain)), range_(std::move(range)) {
  inv_domain_.resize(domain_.size());
  for (std::size_t j = 0; j < domain_.size(); ++j) {
    if (domain_[j] <= 0.0) throw std::invalid_argument("ForwardOperator: domain weights must be positive");
    inv_domain_[j] = 1.0 / domain_[j];
  }
}

void ForwardOperator::finalize() {
  norm_l2_ = estimate_norm(*this, 200, 0);
  norm_l1_ = max_scaled_column_norm();
}

WeightedVector ForwardOperator::apply(const WeightedVector& x) const {
  if (x.size() != cols()) {
    throw std::invalid_argument("apply: expected input of length " + std::to_string(cols()) + ", got " +
                                std::to_string(x.size()));
  }
  WeightedVector y(range_);
  apply_into(x.values(), y.values());
  return y;
}

WeightedVector ForwardOperator::adjoint_apply(const WeightedVector& lambda) const {
  if (lambda.size() != rows()) {
    throw std::invalid_argument("adjoint_apply: expected input of length " + std::to_string(rows()) +
                                ", got " + std::to_string(lambda.size()));
  }
  WeightedVector x(domain_);
  std::vector<double> scratch(rows());
  adjoint_into(lambda.values(), x.values(), scratch);
  return x;
}

void ForwardOperator::apply_into(std::span<const double> x, std::span<double> y) const { multiply(x, y); }

void ForwardOperator::adjoint_into(std::span<const double> lambda, std::span<double> x,
                                   std::span<double> scratch) const {
  const auto wy = range_.values();
  if (range_.all_unit()) {
    multiply_transpose(lambda, x);
  } else {
    for (std::size_t i = 0; i < lambda.size(); ++i) scratch[i] = wy[i] * lambda[i];
    multiply_transpose(scratch.first(lambda.size()), x);
  }
  if (!domain_.all_unit()) {
    for (std::size_t j = 0; j < x.size(); ++j) x[j] *= inv_domain_[j];
  }
}

double ForwardOperator::max_scaled_column_norm() const {
  std::vector<double> e(cols(), 0.0), col(rows());
  const auto wy = range_.values();
  double best = 0.0;
  for (std::size_t j = 0; j < cols(); ++j) {
    e[j] = 1.0;
    multiply(e, col);
    e[j] = 0.0;
    best = std::max(best, weighted_norm(col, wy) * inv_domain_[j]);
  }
  return best;
}

// --- dense ---------------------------------------------------------------

DenseOperator::DenseOperator(RowMatrix m, Weights domain, Weights range)
    : ForwardOperator(std::move(domain), std::move(range)), m_(std::move(m)) {
  if (static_cast<std::size_t>(m_.rows()) != rows() || static_cast<std::size_t>(m_.cols()) != cols()) {
    throw std::invalid_argument("DenseOperator: matrix shape does not match the weights");
  }
  finalize();
}

void DenseOperator::multiply(std::span<const double> x, std::span<double> y) const {
  VecMap(y.data(), m_.rows()).noalias() = m_ * ConstVecMap(x.data(), m_.cols());
}

void DenseOperator::multiply_transpose(std::span<const double> y, std::span<double> x) const {
  VecMap(x.data(), m_.cols()).noalias() = m_.transpose() * ConstVecMap(y.data(), m_.rows());
}

double DenseOperator::max_scaled_column_norm() const {
  const auto wy = range_weights().values();
  const auto wx = domain_weights().values();
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(m_.cols());
  for (Eigen::Index i = 0; i < m_.rows(); ++i) sq += wy[i] * m_.row(i).transpose().cwiseAbs2();
  double best = 0.0;
  for (Eigen::Index j = 0; j < m_.cols(); ++j) best = std::max(best, std::sqrt(sq[j]) / wx[j]);
  return best;
}

// --- sparse --------------------------------------------------------------

SparseOperator::SparseOperator(SparseRowMatrix m, Weights domain, Weights range, std::string kind)
    : ForwardOperator(std::move(domain), std::move(range)), m_(std::move(m)), kind_(std::move(kind)) {
  if (static_cast<std::size_t>(m_.rows()) != rows() || static_cast<std::size_t>(m_.cols()) != cols()) {
    throw std::invalid_argument("SparseOperator: matrix shape does not match the weights");
  }
  m_.makeCompressed();
  mt_ = m_.transpose();
  mt_.makeCompressed();
  finalize();
}

void SparseOperator::multiply(std::span<const double> x, std::span<double> y) const {
  VecMap(y.data(), m_.rows()).noalias() = m_ * ConstVecMap(x.data(), m_.cols());
}

void SparseOperator::multiply_transpose(std::span<const double> y, std::span<double> x) const {
  VecMap(x.data(), mt_.rows()).noalias() = mt_ * ConstVecMap(y.data(), mt_.cols());
}

double SparseOperator::max_scaled_column_norm() const {
  const auto wy = range_weights().values();
  const auto wx = domain_weights().values();
  double best = 0.0;
  for (Eigen::Index j = 0; j < mt_.outerSize(); ++j) {
    double acc = 0.0;
    for (SparseRowMatrix::InnerIterator it(mt_, j); it; ++it) acc += wy[it.col()] * it.value() * it.value();
    best = std::max(best, std::sqrt(acc) / wx[j]);
  }
  return best;
}

// --- zero ----------------------------------------------------------------

ZeroOperator::ZeroOperator(Weights domain, Weights range)
    : ForwardOperator(std::move(domain), std::move(range)) {
  finalize();
}

void ZeroOperator::multiply(std::span<const double>, std::span<double> y) const {
  std::fill(y.begin(), y.end(), 0.0);
}

void ZeroOperator::multiply_transpose(std::span<const double>, std::span<double> x) const {
  std::fill(x.begin(), x.end(), 0.0);
}

// --- norms ---------------------------------------------------------------

double estimate_norm(const ForwardOperator& op, int iters, std::uint64_t seed) {
  if (iters < 1) throw std::invalid_argument("estimate_norm: iters must be >= 1");
  const std::size_t n = op.cols(), m = op.rows();
  const auto wx = op.domain_weights().values();
  const auto wy = op.range_weights().values();

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::vector<double> v(n), u(m), scratch(m);
  for (double& vi : v) vi = unif(rng);

  double best = 0.0;
  for (int k = 0; k < iters; ++k) {
    const double nv = weighted_norm(v, wx);
    if (nv == 0.0) break;
    for (double& vi : v) vi /= nv;
    op.apply_into(v, u);
    const double nu = weighted_norm(u, wy);
    best = std::max(best, nu);
    if (nu == 0.0) break;
    op.adjoint_into(u, v, scratch);
  }
  return best;
}

OperatorPtr make_dense_operator(RowMatrix m, Weights domain, Weights range) {
  return std::make_shared<DenseOperator>(std::move(m), std::move(domain), std::move(range));
}

OperatorPtr make_dense_operator(RowMatrix m) {
  const auto r = static_cast<std::size_t>(m.rows()), c = static_cast<std::size_t>(m.cols());
  return make_dense_operator(std::move(m), Weights::unit(c), Weights::unit(r));
}

OperatorPtr make_zero_operator(Weights domain, Weights range) {
  return std::make_shared<ZeroOperator>(std::move(domain), std::move(range));
}

OperatorPtr build_integral_operator(const Kernel& kernel, std::size_t grid_n) {
  if (grid_n < 2) throw std::invalid_argument("build_integral_operator: grid_n must be >= 2");
  const Weights w = Weights::trapezoid(grid_n);
  const double h = 1.0 / static_cast<double>(grid_n - 1);
  RowMatrix m(grid_n, grid_n);
  for (std::size_t i = 0; i < grid_n; ++i) {
    const double s = static_cast<double>(i) * h;
    for (std::size_t j = 0; j < grid_n; ++j) {
      m(i, j) = kernel(s, static_cast<double>(j) * h) * w[j];
    }
  }
  return make_dense_operator(std::move(m), w, w);
}

// --- parallel beam -------------------------------------------------------

std::vector<double> parallel_beam_angles(std::size_t n_angles) {
  std::vector<double> a(n_angles);
  if (n_angles == 1) {
    a[0] = 1.0;
    return a;
  }
  for (std::size_t k = 0; k < n_angles; ++k) {
    a[k] = 1.0 + 179.0 * static_cast<double>(k) / static_cast<double>(n_angles - 1);
  }
  return a;
}

void trace_ray(std::size_t image_n, double theta_rad, double offset,
               std::vector<std::pair<std::size_t, double>>& out) {
  constexpr double kParallel = 1e-12;
  const double half = 0.5 * static_cast<double>(image_n);
  const double c = std::cos(theta_rad), s = std::sin(theta_rad);
  // p(u) = offset * (c, s) + u * (-s, c)
  const double x0 = offset * c, y0 = offset * s;
  const double dx = -s, dy = c;

  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  auto clip = [&](double p0, double d) {
    if (std::abs(d) < kParallel) {
      if (p0 < -half || p0 > half) lo = hi = 0.0;  // misses the box
      return;
    }
    double a = (-half - p0) / d, b = (half - p0) / d;
    if (a > b) std::swap(a, b);
    lo = std::max(lo, a);
    hi = std::min(hi, b);
  };
  clip(x0, dx);
  clip(y0, dy);
  if (!(hi > lo)) return;

  std::vector<double> cuts{lo, hi};
  auto add_cuts = [&](double p0, double d) {
    if (std::abs(d) < kParallel) return;
    for (std::size_t k = 0; k <= image_n; ++k) {
      const double u = (-half + static_cast<double>(k) - p0) / d;
      if (u > lo && u < hi) cuts.push_back(u);
    }
  };
  add_cuts(x0, dx);
  add_cuts(y0, dy);
  std::sort(cuts.begin(), cuts.end());

  const auto n = static_cast<long>(image_n);
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const double len = cuts[k + 1] - cuts[k];
    if (len <= 1e-12) continue;
    const double um = 0.5 * (cuts[k] + cuts[k + 1]);
    const auto col = static_cast<long>(std::floor(x0 + um * dx + half));
    const auto row = static_cast<long>(std::floor(half - (y0 + um * dy)));
    if (col < 0 || col >= n || row < 0 || row >= n) continue;
    out.emplace_back(static_cast<std::size_t>(row * n + col), len);
  }
}

OperatorPtr build_parallel_beam(std::size_t image_n, std::span<const double> angles_deg,
                                std::size_t n_detectors) {
  if (image_n < 1 || angles_deg.empty() || n_detectors < 1) {
    throw std::invalid_argument("build_parallel_beam: sizes must be >= 1");
  }
  const double span = std::numbers::sqrt2 * static_cast<double>(image_n);
  std::vector<Eigen::Triplet<double>> triplets;
  std::vector<std::pair<std::size_t, double>> hits;
  for (std::size_t a = 0; a < angles_deg.size(); ++a) {
    const double theta = angles_deg[a] * std::numbers::pi / 180.0;
    for (std::size_t d = 0; d < n_detectors; ++d) {
      const double offset = n_detectors == 1
                                ? 0.0
                                : -0.5 * span + span * static_cast<double>(d) / static_cast<double>(n_detectors - 1);
      hits.clear();
      trace_ray(image_n, theta, offset, hits);
      const auto row = static_cast<int>(a * n_detectors + d);
      for (const auto& [col, len] : hits) triplets.emplace_back(row, static_cast<int>(col), len);
    }
  }
  const std::size_t rows = angles_deg.size() * n_detectors, cols = image_n * image_n;
  SparseRowMatrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  m.setFromTriplets(triplets.begin(), triplets.end());
  return std::make_shared<SparseOperator>(std::move(m), Weights::unit(cols), Weights::unit(rows), "parallel_beam");
}

OperatorPtr build_parallel_beam(std::size_t image_n, std::size_t n_angles, std::size_t n_detectors) {
  if (n_angles < 1) throw std::invalid_argument("build_parallel_beam: sizes must be >= 1");
  const auto angles = parallel_beam_angles(n_angles);
  return build_parallel_beam(image_n, angles, n_detectors);
}

}  // namespace dualflow
