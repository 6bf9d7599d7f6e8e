#include "dualflow/regularizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace dualflow {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

InnerSolverError not_converged(const char* solver, double gap, double tol, int iterations) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%s: gap %.3e above tolerance %.3e after %d iterations", solver, gap, tol,
                iterations);
  return InnerSolverError(buf, gap, iterations);
}

// Forward differences with Neumann boundary. g holds [gx | gy], each rows*cols,
// with zeros in the last column of gx and the last row of gy.
void gradient(std::span<const double> z, std::size_t rows, std::size_t cols, std::span<double> g) {
  const std::size_t n = rows * cols;
  double* gx = g.data();
  double* gy = g.data() + n;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* zr = z.data() + r * cols;
    double* gxr = gx + r * cols;
    for (std::size_t c = 0; c + 1 < cols; ++c) gxr[c] = zr[c + 1] - zr[c];
    gxr[cols - 1] = 0.0;
    double* gyr = gy + r * cols;
    if (r + 1 < rows) {
      const double* zn = zr + cols;
      for (std::size_t c = 0; c < cols; ++c) gyr[c] = zn[c] - zr[c];
    } else {
      std::fill(gyr, gyr + cols, 0.0);
    }
  }
}

// Adjoint of gradient(): out = D^T p.
void gradient_adjoint(std::span<const double> p, std::size_t rows, std::size_t cols, std::span<double> out) {
  const std::size_t n = rows * cols;
  const double* px = p.data();
  const double* py = p.data() + n;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* pxr = px + r * cols;
    const double* pyr = py + r * cols;
    double* o = out.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) {
      double acc = 0.0;
      if (c + 1 < cols) acc -= pxr[c];
      if (c > 0) acc += pxr[c - 1];
      if (r + 1 < rows) acc -= pyr[c];
      if (r > 0) acc += (pyr - cols)[c];
      o[c] = acc;
    }
  }
}

// Duality gap of the TV prox for a dual-feasible p (|p| <= 1) with dtp = D^T p.
// Two primal candidates: the iterate z, and z_p = v - beta D^T p, whose gap
// reduces to TV(z_p) - <D z_p, p>. Fills zp and uses g as scratch.
struct Certificate {
  double gap;
  bool use_dual_primal;
};

Certificate certify(std::span<const double> v, std::span<const double> z, std::span<const double> p,
                    std::span<const double> dtp, std::size_t rows, std::size_t cols, double beta,
                    std::span<double> zp, std::span<double> g) {
  const std::size_t n = rows * cols;
  for (std::size_t i = 0; i < n; ++i) zp[i] = v[i] - beta * dtp[i];
  gradient(zp, rows, cols, g);
  double gap_p = 0.0;
  for (std::size_t i = 0; i < 2 * n; ++i) gap_p += std::abs(g[i]) - g[i] * p[i];

  double sq = 0.0, vdtp = 0.0, dtp2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sq += (z[i] - v[i]) * (z[i] - v[i]);
    vdtp += v[i] * dtp[i];
    dtp2 += dtp[i] * dtp[i];
  }
  const double gap_z = 0.5 / beta * sq + anisotropic_tv(z, rows, cols) - (vdtp - 0.5 * beta * dtp2);
  const bool use_zp = gap_p <= gap_z;
  return {std::max(0.0, use_zp ? gap_p : gap_z), use_zp};
}

}  // namespace

double Regularizer::conjugate(const WeightedVector& xi, ConjGradWorkspace* ws) const {
  const WeightedVector x = conj_grad(xi, ws);
  return inner(xi, x) - value(x);
}

// --- quadratic -----------------------------------------------------------

QuadraticRegularizer::QuadraticRegularizer(double scale) : scale_(scale) {
  if (!(scale > 0.0)) throw std::invalid_argument("QuadraticRegularizer: scale must be positive");
}

double QuadraticRegularizer::value(const WeightedVector& x) const { return 0.5 * scale_ * inner(x, x); }

WeightedVector QuadraticRegularizer::conj_grad(const WeightedVector& xi, ConjGradWorkspace*) const {
  return (1.0 / scale_) * xi;
}

// --- entropy on the simplex ----------------------------------------------

EntropySimplexRegularizer::EntropySimplexRegularizer(Weights weights) : weights_(std::move(weights)) {}

double EntropySimplexRegularizer::value(const WeightedVector& x) const {
  if (x.size() != weights_.size()) return kInf;
  double mass = 0.0, acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    if (!(xi >= 0.0) || !std::isfinite(xi)) return kInf;
    mass += weights_[i] * xi;
    if (xi > 0.0) acc += weights_[i] * xi * std::log(xi);
  }
  if (std::abs(mass - 1.0) > kSimplexTolerance) return kInf;
  return acc;
}

WeightedVector EntropySimplexRegularizer::conj_grad(const WeightedVector& xi, ConjGradWorkspace*) const {
  return softmax_map(xi, weights_);
}

WeightedVector softmax_map(const WeightedVector& xi, const Weights& weights) {
  if (xi.size() != weights.size()) throw std::invalid_argument("softmax_map: length mismatch");
  const double m = *std::max_element(xi.raw().begin(), xi.raw().end());
  std::vector<double> e(xi.size());
  double z = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    e[i] = std::exp(xi[i] - m);
    z += weights[i] * e[i];
  }
  for (double& ei : e) ei /= z;
  return WeightedVector(std::move(e), weights);
}

// --- TV + quadratic ------------------------------------------------------

const char* to_string(TvSolver s) { return s == TvSolver::pdhg ? "pdhg" : "dykstra"; }

TvStrongRegularizer::TvStrongRegularizer(double beta, std::size_t rows, std::size_t cols, TvProxSettings settings)
    : beta_(beta), rows_(rows), cols_(cols), settings_(settings) {
  if (!(beta > 0.0)) throw std::invalid_argument("TvStrongRegularizer: beta must be positive");
  if (rows == 0 || cols == 0) throw std::invalid_argument("TvStrongRegularizer: empty image");
}

double TvStrongRegularizer::value(const WeightedVector& x) const {
  if (x.size() != rows_ * cols_) return kInf;
  double sq = 0.0;
  for (double v : x.values()) sq += v * v;
  return 0.5 / beta_ * sq + anisotropic_tv(x.values(), rows_, cols_);
}

WeightedVector TvStrongRegularizer::conj_grad(const WeightedVector& xi, ConjGradWorkspace* ws) const {
  if (xi.size() != rows_ * cols_) throw std::invalid_argument("TvStrongRegularizer::conj_grad: size mismatch");
  std::vector<double> v(xi.raw());
  double xi_norm = 0.0;
  for (double& vi : v) {
    xi_norm += vi * vi;
    vi *= beta_;
  }
  const double tol = settings_.relative_tolerance * (1.0 + std::sqrt(xi_norm));
  std::vector<double>* warm = ws ? &ws->tv_dual : nullptr;
  TvProxResult res = settings_.solver == TvSolver::pdhg
                         ? tv_prox_pdhg(v, rows_, cols_, beta_, tol, settings_.max_iter, warm, settings_.check_every)
                         : tv_prox_dykstra(v, rows_, cols_, beta_, tol, settings_.max_iter, warm, settings_.check_every);
  if (ws) {
    ws->last_iterations = res.iterations;
    ws->last_gap = res.gap;
    ws->total_iterations += res.iterations;
  }
  return WeightedVector(std::move(res.image), xi.weights());
}

double anisotropic_tv(std::span<const double> image, std::size_t rows, std::size_t cols) {
  double acc = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const double z = image[r * cols + c];
      if (c + 1 < cols) acc += std::abs(image[r * cols + c + 1] - z);
      if (r + 1 < rows) acc += std::abs(image[(r + 1) * cols + c] - z);
    }
  }
  return acc;
}

TvProxResult tv_prox_pdhg(std::span<const double> v, std::size_t rows, std::size_t cols, double beta, double tol,
                          int max_iter, std::vector<double>* warm_dual, int check_every) {
  if (v.size() != rows * cols) throw std::invalid_argument("tv_prox_pdhg: image size mismatch");
  if (!(tol > 0.0)) throw std::invalid_argument("tv_prox_pdhg: tol must be positive");
  if (!(beta > 0.0)) throw std::invalid_argument("tv_prox_pdhg: beta must be positive");
  check_every = std::max(1, check_every);

  const std::size_t n = rows * cols;
  const double step = 1.0 / std::sqrt(8.0);  // sigma = tau = 1/||D||, ||D||^2 <= 8
  const double denom = 1.0 / (beta + step);

  std::vector<double> p(2 * n, 0.0);
  if (warm_dual && warm_dual->size() == 2 * n) p = *warm_dual;

  std::vector<double> dtp(n), z(n), zbar(n), g(2 * n), zp(n);
  gradient_adjoint(p, rows, cols, dtp);
  for (std::size_t i = 0; i < n; ++i) z[i] = v[i] - beta * dtp[i];
  zbar = z;

  TvProxResult out;
  double last_gap = kInf;
  for (int k = 1; k <= max_iter; ++k) {
    gradient(zbar, rows, cols, g);
    for (std::size_t i = 0; i < 2 * n; ++i) p[i] = std::clamp(p[i] + step * g[i], -1.0, 1.0);
    gradient_adjoint(p, rows, cols, dtp);
    for (std::size_t i = 0; i < n; ++i) {
      const double znew = (beta * (z[i] - step * dtp[i]) + step * v[i]) * denom;
      zbar[i] = 2.0 * znew - z[i];
      z[i] = znew;
    }

    if (k % check_every != 0 && k != max_iter) continue;

    const Certificate cert = certify(v, z, p, dtp, rows, cols, beta, zp, g);
    last_gap = cert.gap;
    if (last_gap <= tol) {
      out.image = cert.use_dual_primal ? zp : z;
      out.gap = last_gap;
      out.iterations = k;
      if (warm_dual) *warm_dual = std::move(p);
      return out;
    }
  }
  if (warm_dual) *warm_dual = std::move(p);
  throw not_converged("tv_prox_pdhg", last_gap, tol, max_iter);
}

void tv_denoise_1d(const double* in, double* out, std::size_t n, double lambda, std::size_t stride) {
  if (n == 0) return;
  // Tracks the lower and upper taut-string candidates of the current segment
  // [k0, k] and emits a segment whenever one of them becomes infeasible.
  auto I = [&](std::size_t k) { return in[k * stride]; };
  auto O = [&](std::size_t k) -> double& { return out[k * stride]; };
  std::size_t k = 0, k0 = 0, kplus = 0, kminus = 0;
  double umin = lambda, umax = -lambda;
  double vmin = I(0) - lambda, vmax = I(0) + lambda;
  for (;;) {
    while (k == n - 1) {
      if (umin < 0.0) {
        do O(k0++) = vmin; while (k0 <= kminus);
        if (k0 == n) return;
        kminus = k = k0;
        vmin = I(k0);
        umin = lambda;
        umax = vmin + umin - vmax;
      } else if (umax > 0.0) {
        do O(k0++) = vmax; while (k0 <= kplus);
        if (k0 == n) return;
        kplus = k = k0;
        vmax = I(k0);
        umax = -lambda;
        umin = vmax + umax - vmin;
      } else {
        vmin += umin / static_cast<double>(k - k0 + 1);
        do O(k0++) = vmin; while (k0 <= k);
        return;
      }
    }
    if ((umin += I(k + 1) - vmin) < -lambda) {
      do O(k0++) = vmin; while (k0 <= kminus);
      kplus = kminus = k = k0;
      vmin = I(k0);
      vmax = vmin + 2.0 * lambda;
      umin = lambda;
      umax = -lambda;
    } else if ((umax += I(k + 1) - vmax) > lambda) {
      do O(k0++) = vmax; while (k0 <= kplus);
      kplus = kminus = k = k0;
      vmax = I(k0);
      vmin = vmax - 2.0 * lambda;
      umin = lambda;
      umax = -lambda;
    } else {
      ++k;
      if (umin >= lambda) {
        kminus = k;
        vmin += (umin - lambda) / static_cast<double>(kminus - k0 + 1);
        umin = lambda;
      }
      if (umax <= -lambda) {
        kplus = k;
        vmax += (umax + lambda) / static_cast<double>(kplus - k0 + 1);
        umax = -lambda;
      }
    }
  }
}

TvProxResult tv_prox_dykstra(std::span<const double> v, std::size_t rows, std::size_t cols, double beta, double tol,
                             int max_iter, std::vector<double>* warm_dual, int check_every) {
  if (v.size() != rows * cols) throw std::invalid_argument("tv_prox_dykstra: image size mismatch");
  if (!(tol > 0.0)) throw std::invalid_argument("tv_prox_dykstra: tol must be positive");
  if (!(beta > 0.0)) throw std::invalid_argument("tv_prox_dykstra: beta must be positive");
  check_every = std::max(1, check_every);

  const std::size_t n = rows * cols;
  const double inv_beta = 1.0 / beta;
  // p: row block, q: column block, both in image space; x = v - p - q always.
  std::vector<double> pq(2 * n, 0.0);
  if (warm_dual && warm_dual->size() == 2 * n) pq = *warm_dual;
  double* p = pq.data();
  double* q = pq.data() + n;

  std::vector<double> x(n), y(n), w(n), u(2 * n), dtu(n), zp(n), g(2 * n);
  std::vector<double> q_prev(q, q + n), q_bar(n);

  // Eliminating p leaves forward-backward with unit step in q, accelerated
  // with FISTA momentum and the gradient restart test.
  TvProxResult out;
  double last_gap = kInf;
  double t_k = 1.0;
  for (int k = 1; k <= max_iter; ++k) {
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_k * t_k));
    const double momentum = (t_k - 1.0) / t_next;
    for (std::size_t i = 0; i < n; ++i) {
      q_bar[i] = q[i] + momentum * (q[i] - q_prev[i]);
      w[i] = v[i] - q_bar[i];
    }
    for (std::size_t r = 0; r < rows; ++r) tv_denoise_1d(&w[r * cols], &y[r * cols], cols, beta, 1);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = w[i] - y[i];
      w[i] = y[i] + q_bar[i];
    }
    for (std::size_t c = 0; c < cols; ++c) tv_denoise_1d(&w[c], &x[c], rows, beta, cols);
    double restart = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double q_new = w[i] - x[i];
      restart += (q_bar[i] - q_new) * (q_new - q[i]);
      q_prev[i] = q[i];
      q[i] = q_new;
    }
    t_k = restart > 0.0 ? 1.0 : t_next;

    if (k % check_every != 0 && k != max_iter) continue;

    // Difference-space dual: p = beta D_h^T u_h, so u_h = -cumsum(p / beta)
    // along each row; likewise for the columns.
    std::fill(u.begin(), u.end(), 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
      double acc = 0.0;
      for (std::size_t c = 0; c + 1 < cols; ++c) {
        acc += p[r * cols + c] * inv_beta;
        u[r * cols + c] = std::clamp(-acc, -1.0, 1.0);
      }
    }
    for (std::size_t c = 0; c < cols; ++c) {
      double acc = 0.0;
      for (std::size_t r = 0; r + 1 < rows; ++r) {
        acc += q[r * cols + c] * inv_beta;
        u[n + r * cols + c] = std::clamp(-acc, -1.0, 1.0);
      }
    }
    gradient_adjoint(u, rows, cols, dtu);
    const Certificate cert = certify(v, x, u, dtu, rows, cols, beta, zp, g);
    last_gap = cert.gap;
    if (last_gap <= tol) {
      out.image = cert.use_dual_primal ? zp : x;
      out.gap = last_gap;
      out.iterations = k;
      if (warm_dual) *warm_dual = std::move(pq);
      return out;
    }
  }
  if (warm_dual) *warm_dual = std::move(pq);
  throw not_converged("tv_prox_dykstra", last_gap, tol, max_iter);
}

// --- l1 + quadratic ------------------------------------------------------

ElasticL1Regularizer::ElasticL1Regularizer(double l1_weight, double scale) : l1_weight_(l1_weight), scale_(scale) {
  if (!(scale > 0.0)) throw std::invalid_argument("ElasticL1Regularizer: scale must be positive");
  if (!(l1_weight >= 0.0)) throw std::invalid_argument("ElasticL1Regularizer: l1 weight must be nonnegative");
}

double ElasticL1Regularizer::value(const WeightedVector& x) const {
  return l1_weight_ * l1_norm(x) + 0.5 * scale_ * inner(x, x);
}

WeightedVector ElasticL1Regularizer::conj_grad(const WeightedVector& xi, ConjGradWorkspace*) const {
  WeightedVector x(xi.weights());
  for (std::size_t i = 0; i < xi.size(); ++i) {
    const double a = std::abs(xi[i]) - l1_weight_;
    x[i] = a > 0.0 ? std::copysign(a, xi[i]) / scale_ : 0.0;
  }
  return x;
}

// --- Bregman -------------------------------------------------------------

BregmanReport bregman(const Regularizer& reg, const WeightedVector& x, const WeightedVector& x0,
                      const WeightedVector& xi0) {
  BregmanReport rep{0.0, x, x0, xi0};
  const double rx = reg.value(x);
  if (std::isinf(rx)) {
    rep.value = kInf;
    return rep;
  }
  const double d = rx - reg.value(x0) - inner(xi0, x - x0);
  rep.value = std::max(0.0, d);
  return rep;
}

}  // namespace dualflow
