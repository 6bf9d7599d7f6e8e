#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "dualflow/weighted_vector.hpp"

namespace dualflow {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using SparseRowMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Bounded linear map A : X -> Y between weighted grid spaces.
///
/// The map is stored as a matrix M acting on nodal values, (Ax)_i = sum_j M_ij x_j.
/// The adjoint is taken with respect to the weighted inner products of X and Y,
/// so <Ax, lambda>_Y = <x, A* lambda>_X holds exactly:
///   (A* lambda)_j = (1 / wx_j) sum_i M_ij wy_i lambda_i.
///
/// Operators are immutable after construction and safe to share between threads.
class ForwardOperator {
 public:
  virtual ~ForwardOperator() = default;

  std::size_t rows() const { return range_.size(); }
  std::size_t cols() const { return domain_.size(); }
  const Weights& domain_weights() const { return domain_; }
  const Weights& range_weights() const { return range_; }

  /// Throws std::invalid_argument on dimension mismatch.
  WeightedVector apply(const WeightedVector& x) const;
  WeightedVector adjoint_apply(const WeightedVector& lambda) const;

  /// Allocation-free variants used by the integrators. Sizes are not checked.
  void apply_into(std::span<const double> x, std::span<double> y) const;
  void adjoint_into(std::span<const double> lambda, std::span<double> x, std::span<double> scratch) const;

  /// Cached weighted L2 -> L2 norm estimate (200 power iterations, seed 0).
  double norm() const { return norm_l2_; }
  /// Exact weighted L1 -> L2 norm: max_j ||M e_j||_Y / wx_j.
  double l1_norm() const { return norm_l1_; }
  double norm(NormKind domain) const { return domain == NormKind::l1 ? norm_l1_ : norm_l2_; }

  virtual std::string kind() const = 0;

  /// Raw matrix products on nodal values: y = M x and x = M^T y.
  virtual void multiply(std::span<const double> x, std::span<double> y) const = 0;
  virtual void multiply_transpose(std::span<const double> y, std::span<double> x) const = 0;

 protected:
  ForwardOperator(Weights domain, Weights range);
  /// Computes the cached norms; derived constructors call this last.
  void finalize();
  /// max_j ||M e_j||_Y / wx_j; default probes every column through multiply().
  virtual double max_scaled_column_norm() const;

 private:
  Weights domain_;
  Weights range_;
  std::vector<double> inv_domain_;
  double norm_l2_ = 0.0;
  double norm_l1_ = 0.0;
};

using OperatorPtr = std::shared_ptr<const ForwardOperator>;

class DenseOperator final : public ForwardOperator {
 public:
  DenseOperator(RowMatrix m, Weights domain, Weights range);
  std::string kind() const override { return "dense"; }
  void multiply(std::span<const double> x, std::span<double> y) const override;
  void multiply_transpose(std::span<const double> y, std::span<double> x) const override;
  const RowMatrix& matrix() const { return m_; }

 protected:
  double max_scaled_column_norm() const override;

 private:
  RowMatrix m_;
};

class SparseOperator final : public ForwardOperator {
 public:
  SparseOperator(SparseRowMatrix m, Weights domain, Weights range, std::string kind = "sparse");
  std::string kind() const override { return kind_; }
  void multiply(std::span<const double> x, std::span<double> y) const override;
  void multiply_transpose(std::span<const double> y, std::span<double> x) const override;
  const SparseRowMatrix& matrix() const { return m_; }

 protected:
  double max_scaled_column_norm() const override;

 private:
  SparseRowMatrix m_;
  SparseRowMatrix mt_;
  std::string kind_;
};

class ZeroOperator final : public ForwardOperator {
 public:
  ZeroOperator(Weights domain, Weights range);
  std::string kind() const override { return "zero"; }
  void multiply(std::span<const double> x, std::span<double> y) const override;
  void multiply_transpose(std::span<const double> y, std::span<double> x) const override;

 protected:
  double max_scaled_column_norm() const override { return 0.0; }
};

/// Power-method estimate of the weighted L2 operator norm. The estimate is the
/// running maximum of ||A v_k||_Y / ||v_k||_X, so it never exceeds the true norm
/// and is nondecreasing in iters for a fixed seed.
double estimate_norm(const ForwardOperator& op, int iters = 200, std::uint64_t seed = 0);

OperatorPtr make_dense_operator(RowMatrix m, Weights domain, Weights range);
/// Plain Euclidean spaces on both sides.
OperatorPtr make_dense_operator(RowMatrix m);
OperatorPtr make_zero_operator(Weights domain, Weights range);

using Kernel = std::function<double(double s, double s_prime)>;

/// Trapezoidal discretization of (Ax)(s) = int_0^1 k(s, s') x(s') ds' on a
/// uniform grid of grid_n nodes; both spaces carry trapezoid weights.
OperatorPtr build_integral_operator(const Kernel& kernel, std::size_t grid_n);

/// Angles in degrees, evenly spaced over [1, 180].
std::vector<double> parallel_beam_angles(std::size_t n_angles);

/// Parallel-beam projector on an image_n x image_n grid of unit pixels
/// centred at the origin. Row (a * n_detectors + d) holds the exact
/// intersection lengths of ray d at angle a with every pixel (row-major pixel
/// index, row 0 at the top). Detectors are evenly spaced over a span of
/// sqrt(2) * image_n. Unit weights on both sides.
OperatorPtr build_parallel_beam(std::size_t image_n, std::size_t n_angles, std::size_t n_detectors);
OperatorPtr build_parallel_beam(std::size_t image_n, std::span<const double> angles_deg,
                                std::size_t n_detectors);

/// Intersection lengths of the line {p : p . (cos t, sin t) = offset} with the
/// pixels of an image_n x image_n grid; appended as (pixel index, length).
void trace_ray(std::size_t image_n, double theta_rad, double offset,
               std::vector<std::pair<std::size_t, double>>& out);

}  // namespace dualflow
