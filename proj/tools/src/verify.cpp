#include <chrono>
#include <cmath>

#include <json.hpp>

#include "dualflow/diagnostics.hpp"
#include "dualflow/experiments.hpp"

namespace dualflow::experiments {

namespace {

VerifyCase verify_case(const std::string& name, const Problem& fx, double tau, const ExperimentConfig& c,
                       std::size_t energy_stride) {
  const auto t0 = std::chrono::steady_clock::now();
  VerifyCase v;
  v.name = name;
  v.delta = fx.delta;
  v.tau = tau;

  IntegrateOptions o = fx.options(c.scheme);
  if (c.dt) o.dt = *c.dt;
  o.t_max = c.t_max;
  o.stride = energy_stride;
  o.keep_lambda = true;
  DpConfig dp;
  dp.tau = tau;
  dp.delta = fx.delta;
  dp.crossing_tolerance = c.dp_crossing_tolerance;
  const StopOutcome out = dp_stop(fx.inverse, dp, o);
  const Trajectory& tr = out.trajectory;

  const double y_norm = l2_norm(fx.inverse.data);
  v.steps = tr.steps;
  v.t_stop = out.t_stop;
  v.max_residual_increase = tr.max_residual_increase;
  v.monotone_tolerance = 1e-9 * (1.0 + y_norm);

  const auto probes = standard_probes(fx.inverse, 3, std::max(1.0, l2_norm(out.state.lambda)), 0);
  const EnergyReport energy = verify_energy_inequality(tr, fx.inverse, probes);
  v.energy_rows = energy.rows.size();
  v.energy_flagged = energy.flagged;
  v.energy_max_violation = energy.max_violation;

  v.max_dual_increase = -std::numeric_limits<double>::infinity();
  bool dual_ok = true;
  for (std::size_t k = 1; k < tr.records.size(); ++k) {
    const double inc = tr.records[k].dual_objective - tr.records[k - 1].dual_objective;
    v.max_dual_increase = std::max(v.max_dual_increase, inc);
    dual_ok = dual_ok && inc <= 1e-12 * (1.0 + std::abs(tr.records[k - 1].dual_objective));
  }
  v.kappa_hat = check_noise_condition(tr, fx.delta);

  v.passed = v.max_residual_increase <= v.monotone_tolerance && v.energy_flagged == 0 && dual_ok;
  v.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return v;
}

nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace

VerifyReport verify_suite(const ExperimentConfig& c, std::size_t energy_stride) {
  VerifyReport rep;
  ExperimentConfig dc = c;
  dc.t_max = preset_config(Preset::deconvolution).t_max;
  for (double delta : {1e-1, 1e-2}) {
    const Problem fx = gaussian_deconvolution_fixture(c.grid_n, delta, 0);
    rep.cases.push_back(verify_case("deconvolution", fx, 1.1, dc, energy_stride));
  }
  ExperimentConfig tc = c;
  tc.t_max = preset_config(Preset::tomography).t_max;
  const Problem ct = shepp_logan_fixture(c.image_n, c.n_angles, c.n_detectors, 1e-2, 0, c.tv);
  rep.cases.push_back(verify_case("tomography", ct, 1.05, tc, energy_stride));

  rep.passed = true;
  for (const auto& v : rep.cases) rep.passed = rep.passed && v.passed;
  return rep;
}

std::string verify_json(const VerifyReport& rep) {
  nlohmann::json j;
  j["passed"] = rep.passed;
  j["cases"] = nlohmann::json::array();
  for (const auto& v : rep.cases) {
    j["cases"].push_back({{"name", v.name},
                          {"delta", v.delta},
                          {"tau", v.tau},
                          {"steps", v.steps},
                          {"t_stop", v.t_stop},
                          {"max_residual_increase", number_or_null(v.max_residual_increase)},
                          {"monotone_tolerance", v.monotone_tolerance},
                          {"energy_rows", v.energy_rows},
                          {"energy_flagged", v.energy_flagged},
                          {"energy_max_violation", v.energy_max_violation},
                          {"max_dual_increase", number_or_null(v.max_dual_increase)},
                          {"kappa_hat", v.kappa_hat},
                          {"passed", v.passed}});
  }
  return j.dump(2) + "\n";
}

}  // namespace dualflow::experiments
