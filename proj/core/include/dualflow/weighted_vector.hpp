#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace dualflow {

/// Norm used on a primal space. Entropy-type regularizers live in L1, the
/// rest in L2. The matching dual norm is Linf resp. L2.
enum class NormKind { l1, l2 };

/// Quadrature weights of a discretized function space.
///
/// Weights are shared between all vectors living on the same grid; copying a
/// Weights handle is cheap. The inner product of the space is
/// <u, v> = sum_i w_i u_i v_i.
class Weights {
 public:
  Weights() = default;

  /// Throws std::invalid_argument if any weight is negative or not finite, or
  /// if no weight is positive.
  explicit Weights(std::vector<double> w);

  static Weights unit(std::size_t n);
  /// Composite trapezoid rule on n uniform nodes spanning [lo, hi].
  static Weights trapezoid(std::size_t n, double lo = 0.0, double hi = 1.0);

  std::size_t size() const { return w_ ? w_->size() : 0; }
  std::span<const double> values() const;
  double operator[](std::size_t i) const { return (*w_)[i]; }
  bool all_unit() const { return all_unit_; }

  bool same_grid(const Weights& other) const;

 private:
  std::shared_ptr<const std::vector<double>> w_;
  bool all_unit_ = false;
};

/// Grid function: nodal values plus the quadrature weights defining its norms.
class WeightedVector {
 public:
  WeightedVector() = default;
  WeightedVector(std::vector<double> values, Weights weights);
  /// Zero vector on the given grid.
  explicit WeightedVector(Weights weights);

  std::size_t size() const { return values_.size(); }
  const Weights& weights() const { return weights_; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  const std::vector<double>& raw() const { return values_; }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  /// this += alpha * other
  WeightedVector& axpy(double alpha, const WeightedVector& other);
  WeightedVector& operator+=(const WeightedVector& other);
  WeightedVector& operator-=(const WeightedVector& other);
  WeightedVector& operator*=(double s);

  void fill(double v);

 private:
  std::vector<double> values_;
  Weights weights_;
};

WeightedVector operator+(WeightedVector a, const WeightedVector& b);
WeightedVector operator-(WeightedVector a, const WeightedVector& b);
WeightedVector operator*(double s, WeightedVector a);

/// Weighted inner product; throws std::invalid_argument on length mismatch.
double inner(const WeightedVector& u, const WeightedVector& v);
/// (sum_i w_i |u_i|^p)^{1/p}
double lp_norm(const WeightedVector& u, double p);
double l1_norm(const WeightedVector& u);
double l2_norm(const WeightedVector& u);
/// max over nodes with positive weight
double linf_norm(const WeightedVector& u);
/// sum_i w_i u_i
double integral(const WeightedVector& u);

double norm(const WeightedVector& u, NormKind kind);
/// Norm of the dual space (Linf for l1, L2 for l2).
double dual_norm(const WeightedVector& u, NormKind kind);

}  // namespace dualflow
