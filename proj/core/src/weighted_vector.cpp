#include "dualflow/weighted_vector.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace dualflow {

namespace {

void require_same_size(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw std::invalid_argument(std::string(what) + ": length mismatch (" + std::to_string(a) +
                                " vs " + std::to_string(b) + ")");
  }
}

}  // namespace

Weights::Weights(std::vector<double> w) {
  bool any_positive = false;
  bool unit = true;
  for (double wi : w) {
    if (!std::isfinite(wi) || wi < 0.0) throw std::invalid_argument("Weights: negative or non-finite weight");
    any_positive = any_positive || wi > 0.0;
    unit = unit && wi == 1.0;
  }
  if (!any_positive) throw std::invalid_argument("Weights: at least one weight must be positive");
  all_unit_ = unit;
  w_ = std::make_shared<const std::vector<double>>(std::move(w));
}

Weights Weights::unit(std::size_t n) { return Weights(std::vector<double>(n, 1.0)); }

Weights Weights::trapezoid(std::size_t n, double lo, double hi) {
  if (n < 2) throw std::invalid_argument("Weights::trapezoid: need at least two nodes");
  const double h = (hi - lo) / static_cast<double>(n - 1);
  std::vector<double> w(n, h);
  w.front() = 0.5 * h;
  w.back() = 0.5 * h;
  return Weights(std::move(w));
}

std::span<const double> Weights::values() const {
  if (!w_) return {};
  return *w_;
}

bool Weights::same_grid(const Weights& other) const {
  if (w_ == other.w_) return true;
  if (!w_ || !other.w_) return false;
  return *w_ == *other.w_;
}

WeightedVector::WeightedVector(std::vector<double> values, Weights weights)
    : values_(std::move(values)), weights_(std::move(weights)) {
  require_same_size(values_.size(), weights_.size(), "WeightedVector");
}

WeightedVector::WeightedVector(Weights weights)
    : values_(weights.size(), 0.0), weights_(std::move(weights)) {}

WeightedVector& WeightedVector::axpy(double alpha, const WeightedVector& other) {
  require_same_size(size(), other.size(), "axpy");
  const double* o = other.values_.data();
  double* v = values_.data();
  for (std::size_t i = 0; i < values_.size(); ++i) v[i] += alpha * o[i];
  return *this;
}

WeightedVector& WeightedVector::operator+=(const WeightedVector& other) { return axpy(1.0, other); }
WeightedVector& WeightedVector::operator-=(const WeightedVector& other) { return axpy(-1.0, other); }

WeightedVector& WeightedVector::operator*=(double s) {
  for (double& v : values_) v *= s;
  return *this;
}

void WeightedVector::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

WeightedVector operator+(WeightedVector a, const WeightedVector& b) { return a += b; }
WeightedVector operator-(WeightedVector a, const WeightedVector& b) { return a -= b; }
WeightedVector operator*(double s, WeightedVector a) { return a *= s; }

double inner(const WeightedVector& u, const WeightedVector& v) {
  require_same_size(u.size(), v.size(), "inner");
  const auto w = u.weights().values();
  double acc = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) acc += w[i] * u[i] * v[i];
  return acc;
}

double lp_norm(const WeightedVector& u, double p) {
  if (p == 1.0) return l1_norm(u);
  if (p == 2.0) return l2_norm(u);
  if (std::isinf(p)) return linf_norm(u);
  const auto w = u.weights().values();
  double acc = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) acc += w[i] * std::pow(std::abs(u[i]), p);
  return std::pow(acc, 1.0 / p);
}

double l1_norm(const WeightedVector& u) {
  const auto w = u.weights().values();
  double acc = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) acc += w[i] * std::abs(u[i]);
  return acc;
}

double l2_norm(const WeightedVector& u) { return std::sqrt(inner(u, u)); }

double linf_norm(const WeightedVector& u) {
  const auto w = u.weights().values();
  double m = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (w[i] > 0.0) m = std::max(m, std::abs(u[i]));
  }
  return m;
}

double integral(const WeightedVector& u) {
  const auto w = u.weights().values();
  double acc = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) acc += w[i] * u[i];
  return acc;
}

double norm(const WeightedVector& u, NormKind kind) {
  return kind == NormKind::l1 ? l1_norm(u) : l2_norm(u);
}

double dual_norm(const WeightedVector& u, NormKind kind) {
  return kind == NormKind::l1 ? linf_norm(u) : l2_norm(u);
}

}  // namespace dualflow
