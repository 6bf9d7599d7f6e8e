#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dualflow/weighted_vector.hpp"

namespace dualflow {

/// Thrown when an iterative inner solver stops at its iteration cap.
class InnerSolverError : public std::runtime_error {
 public:
  InnerSolverError(const std::string& what, double last_gap, int iterations)
      : std::runtime_error(what), last_gap_(last_gap), iterations_(iterations) {}
  double last_gap() const { return last_gap_; }
  int iterations() const { return iterations_; }

 private:
  double last_gap_;
  int iterations_;
};

/// Mutable warm-start state for conj_grad, owned by one caller (one
/// integration). Passing it never changes the answer beyond solver tolerance.
struct ConjGradWorkspace {
  std::vector<double> tv_dual;
  int last_iterations = 0;
  double last_gap = 0.0;
  long total_iterations = 0;
};

/// Strongly convex R : X -> (-inf, inf] with modulus c0, i.e.
/// D(x', x) >= c0 ||x' - x||^2 in the norm reported by norm_kind().
class Regularizer {
 public:
  virtual ~Regularizer() = default;

  /// R(x); +infinity outside the domain. Never throws for infeasible x.
  virtual double value(const WeightedVector& x) const = 0;
  virtual double modulus() const = 0;
  virtual NormKind norm_kind() const = 0;
  virtual std::string name() const = 0;

  /// grad R*(xi) = argmin_z { R(z) - <xi, z> }.
  virtual WeightedVector conj_grad(const WeightedVector& xi, ConjGradWorkspace* ws = nullptr) const = 0;

  /// R*(xi), evaluated through the conjugate pair as <xi, x> - R(x).
  double conjugate(const WeightedVector& xi, ConjGradWorkspace* ws = nullptr) const;
};

using RegularizerPtr = std::shared_ptr<const Regularizer>;

/// R(x) = (scale / 2) ||x||^2, c0 = scale / 2.
class QuadraticRegularizer final : public Regularizer {
 public:
  explicit QuadraticRegularizer(double scale = 1.0);
  double value(const WeightedVector& x) const override;
  double modulus() const override { return 0.5 * scale_; }
  NormKind norm_kind() const override { return NormKind::l2; }
  std::string name() const override { return "quadratic"; }
  WeightedVector conj_grad(const WeightedVector& xi, ConjGradWorkspace* ws = nullptr) const override;
  double scale() const { return scale_; }

 private:
  double scale_;
};

/// Negative Boltzmann-Shannon entropy restricted to probability densities:
/// R(x) = sum_i w_i x_i log x_i if x >= 0 and sum_i w_i x_i = 1, else +inf.
/// Strongly convex in L1 with c0 = 1/2 (Pinsker).
class EntropySimplexRegularizer final : public Regularizer {
 public:
  static constexpr double kSimplexTolerance = 1e-8;

  explicit EntropySimplexRegularizer(Weights weights);
  double value(const WeightedVector& x) const override;
  double modulus() const override { return 0.5; }
  NormKind norm_kind() const override { return NormKind::l1; }
  std::string name() const override { return "entropy_simplex"; }
  WeightedVector conj_grad(const WeightedVector& xi, ConjGradWorkspace* ws = nullptr) const override;

 private:
  Weights weights_;
};

enum class TvSolver { dykstra, pdhg };

const char* to_string(TvSolver s);

/// Inner-solver settings for the TV prox inside conj_grad.
struct TvProxSettings {
  TvSolver solver = TvSolver::dykstra;
  /// conj_grad uses tol = relative_tolerance * (1 + ||xi||).
  double relative_tolerance = 1e-10;
  int max_iter = 5000;
  /// Gap evaluation period in iterations (sweeps for dykstra).
  int check_every = 5;
};

/// R(x) = 1/(2 beta) ||x||^2 + |x|_TV on a rows x cols image (row-major, unit
/// weights), with anisotropic TV and Neumann boundary. c0 = 1/(2 beta).
class TvStrongRegularizer final : public Regularizer {
 public:
  TvStrongRegularizer(double beta, std::size_t rows, std::size_t cols, TvProxSettings settings = {});
  double value(const WeightedVector& x) const override;
  double modulus() const override { return 0.5 / beta_; }
  NormKind norm_kind() const override { return NormKind::l2; }
  std::string name() const override { return "tv_strong"; }
  /// Throws InnerSolverError if PDHG hits max_iter before the gap tolerance.
  WeightedVector conj_grad(const WeightedVector& xi, ConjGradWorkspace* ws = nullptr) const override;

  double beta() const { return beta_; }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  const TvProxSettings& settings() const { return settings_; }

 private:
  double beta_;
  std::size_t rows_, cols_;
  TvProxSettings settings_;
};

/// R(x) = l1_weight ||x||_1 + (scale / 2) ||x||^2, c0 = scale / 2. Used for
/// strongly convex perturbations R + alpha Psi of an l1 base functional.
class ElasticL1Regularizer final : public Regularizer {
 public:
  ElasticL1Regularizer(double l1_weight, double scale);
  double value(const WeightedVector& x) const override;
  double modulus() const override { return 0.5 * scale_; }
  NormKind norm_kind() const override { return NormKind::l2; }
  std::string name() const override { return "elastic_l1"; }
  WeightedVector conj_grad(const WeightedVector& xi, ConjGradWorkspace* ws = nullptr) const override;

 private:
  double l1_weight_, scale_;
};

/// x_i = exp(xi_i - M) / sum_j w_j exp(xi_j - M), M = max xi.
WeightedVector softmax_map(const WeightedVector& xi, const Weights& weights);

/// Anisotropic total variation with forward differences and no difference
/// across the last row / column.
double anisotropic_tv(std::span<const double> image, std::size_t rows, std::size_t cols);

struct TvProxResult {
  std::vector<double> image;
  double gap = 0.0;
  int iterations = 0;
};

/// argmin_z { 1/(2 beta) ||z - v||^2 + |z|_TV } by the primal-dual hybrid
/// gradient method (sigma = tau = 1/sqrt(8), theta = 1). Stops once the
/// primal-dual gap is <= tol. warm_dual, if non-null, seeds the dual variable
/// and receives the final one.
///
/// Throws InnerSolverError carrying the last gap if max_iter is reached.
TvProxResult tv_prox_pdhg(std::span<const double> v, std::size_t rows, std::size_t cols, double beta,
                          double tol, int max_iter, std::vector<double>* warm_dual = nullptr,
                          int check_every = 5);

/// Same minimizer by alternating exact 1D TV solves over rows and columns
/// (Dykstra splitting, i.e. block-coordinate ascent on the dual). Uses the
/// same gap certificate as tv_prox_pdhg, evaluated every check_every sweeps.
/// warm_dual holds the row and column dual blocks (2 * rows * cols values).
///
/// Throws InnerSolverError carrying the last gap if max_iter is reached.
TvProxResult tv_prox_dykstra(std::span<const double> v, std::size_t rows, std::size_t cols, double beta,
                             double tol, int max_iter, std::vector<double>* warm_dual = nullptr,
                             int check_every = 1);

/// argmin_x 1/2 ||x - y||^2 + lambda sum_k |x_{k+1} - x_k| for a strided 1D
/// signal, by the direct taut-string style algorithm. in and out may not alias.
void tv_denoise_1d(const double* in, double* out, std::size_t n, double lambda, std::size_t stride = 1);

struct BregmanReport {
  double value = 0.0;
  WeightedVector x;
  WeightedVector base;
  WeightedVector subgradient;
};

/// D(x, x0) = R(x) - R(x0) - <xi0, x - x0>, with xi0 in dR(x0). Returns
/// +infinity when R(x) is infinite; tiny negative round-off is clipped to 0.
BregmanReport bregman(const Regularizer& reg, const WeightedVector& x, const WeightedVector& x0,
                      const WeightedVector& xi0);

}  // namespace dualflow
