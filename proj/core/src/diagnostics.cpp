#include "dualflow/diagnostics.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "dualflow/regularizer.hpp"

namespace dualflow {

double dual_objective(const WeightedVector& lambda, const InverseProblem& problem) {
  validate(problem);
  const DualState s = make_state(0.0, lambda, problem);
  return dual_objective_at(s, problem);
}

std::vector<Probe> standard_probes(const InverseProblem& problem, std::size_t n_random, double scale,
                                   std::uint64_t seed) {
  std::vector<Probe> probes;
  probes.push_back({ProbeKind::fixed, WeightedVector(problem.op->range_weights())});
  probes.push_back({ProbeKind::lambda_t, {}});
  probes.push_back({ProbeKind::twice_lambda_t, {}});
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  for (std::size_t k = 0; k < n_random; ++k) {
    WeightedVector mu(problem.op->range_weights());
    for (std::size_t i = 0; i < mu.size(); ++i) mu[i] = normal(rng);
    const double n = l2_norm(mu);
    if (n > 0.0) mu *= scale / n;
    probes.push_back({ProbeKind::fixed, std::move(mu)});
  }
  return probes;
}

EnergyReport verify_energy_inequality(const Trajectory& trajectory, const InverseProblem& problem,
                                      std::span<const Probe> probes, double slack_rate, double t_min) {
  if (trajectory.lambdas.size() != trajectory.records.size()) {
    throw std::invalid_argument("verify_energy_inequality: trajectory must keep lambda snapshots");
  }
  std::vector<double> d_fixed(probes.size(), 0.0), mu_sq(probes.size(), 0.0);
  for (std::size_t p = 0; p < probes.size(); ++p) {
    if (probes[p].kind == ProbeKind::fixed) {
      d_fixed[p] = dual_objective(probes[p].mu, problem);
      mu_sq[p] = inner(probes[p].mu, probes[p].mu);
    }
  }

  EnergyReport rep;
  ConjGradWorkspace ws;
  for (std::size_t k = 0; k < trajectory.records.size(); ++k) {
    const TraceRecord& rec = trajectory.records[k];
    const double t = rec.t;
    if (!(t > 0.0) || t < t_min) continue;
    const WeightedVector& lam = trajectory.lambdas[k];
    const double lam_sq = inner(lam, lam);
    const double data_term = 0.5 * t * rec.residual_norm * rec.residual_norm;
    const double slack = slack_rate * (1.0 + t);

    for (std::size_t p = 0; p < probes.size(); ++p) {
      double dist_sq = 0.0, mu_norm_sq = 0.0, d_mu = 0.0;
      switch (probes[p].kind) {
        case ProbeKind::fixed: {
          const WeightedVector diff = lam - probes[p].mu;
          dist_sq = inner(diff, diff);
          mu_norm_sq = mu_sq[p];
          d_mu = d_fixed[p];
          break;
        }
        case ProbeKind::lambda_t:
          dist_sq = 0.0;
          mu_norm_sq = lam_sq;
          d_mu = rec.dual_objective;
          break;
        case ProbeKind::twice_lambda_t: {
          dist_sq = lam_sq;
          mu_norm_sq = 4.0 * lam_sq;
          const DualState s2 = make_state(t, 2.0 * lam, problem, &ws);
          d_mu = dual_objective_at(s2, problem);
          break;
        }
      }
      EnergyCheck row;
      row.t = t;
      row.mu_id = p;
      row.lhs = data_term + (dist_sq - mu_norm_sq) / (2.0 * t);
      row.rhs = d_mu - rec.dual_objective;
      row.violation = std::max(0.0, row.lhs - row.rhs);
      row.flagged = row.violation > slack;
      rep.flagged += row.flagged ? 1 : 0;
      rep.max_violation = std::max(rep.max_violation, row.violation);
      rep.rows.push_back(row);
    }
  }
  return rep;
}

double relative_error(const WeightedVector& x, const WeightedVector& truth, NormKind kind) {
  const double denom = norm(truth, kind);
  if (!(denom > 0.0)) throw std::invalid_argument("relative_error: ground truth has zero norm");
  return norm(x - truth, kind) / denom;
}

SemiConvergence semi_convergence_summary(const Trajectory& trajectory) {
  SemiConvergence out;
  out.re_min = std::numeric_limits<double>::infinity();
  bool any = false;
  for (std::size_t k = 0; k < trajectory.records.size(); ++k) {
    const double re = trajectory.records[k].relative_error;
    if (std::isnan(re)) continue;
    any = true;
    if (re < out.re_min) {
      out.re_min = re;
      out.t_opt = trajectory.records[k].t;
      out.index = k;
    }
  }
  if (!any) throw std::invalid_argument("semi_convergence_summary: no relative-error trace");
  out.is_interior = out.index > 0 && out.index + 1 < trajectory.records.size();
  return out;
}

RateFit fit_rate(std::span<const std::pair<double, double>> pairs) {
  if (pairs.size() < 3) throw std::invalid_argument("fit_rate: need at least three pairs");
  double sx = 0.0, sy = 0.0;
  for (const auto& [d, e] : pairs) {
    if (!(d > 0.0) || !(e > 0.0)) throw std::invalid_argument("fit_rate: entries must be positive");
    sx += std::log(d);
    sy += std::log(e);
  }
  const double n = static_cast<double>(pairs.size());
  const double mx = sx / n, my = sy / n;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& [d, e] : pairs) {
    const double dx = std::log(d) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(e) - my);
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("fit_rate: degenerate input (all deltas equal)");
  RateFit fit;
  fit.pairs.assign(pairs.begin(), pairs.end());
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss = 0.0;
  for (const auto& [d, e] : pairs) {
    const double r = std::log(e) - (fit.intercept + fit.slope * std::log(d));
    ss += r * r;
  }
  fit.residual = std::sqrt(ss / n);
  return fit;
}

double bregman_error(const InverseProblem& problem, const WeightedVector& truth, const DualState& state) {
  return bregman(*problem.reg, truth, state.x, state.xi).value;
}

}  // namespace dualflow
