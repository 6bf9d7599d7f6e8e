#include <atomic>
#include <chrono>
#include <cmath>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "dualflow/diagnostics.hpp"
#include "dualflow/experiments.hpp"

#ifndef DUALFLOW_VERSION
#define DUALFLOW_VERSION "unknown"
#endif

namespace dualflow::experiments {

namespace fs = std::filesystem;

Problem make_fixture(const ExperimentConfig& c, double delta, std::uint64_t seed) {
  if (c.preset == Preset::deconvolution) return gaussian_deconvolution_fixture(c.grid_n, delta, seed);
  return shepp_logan_fixture(c.image_n, c.n_angles, c.n_detectors, delta, seed, c.tv);
}

IntegrateOptions make_options(const ExperimentConfig& c, const Problem& fixture) {
  IntegrateOptions o = fixture.options(c.scheme);
  if (c.dt) o.dt = *c.dt;
  o.t_max = c.t_max;
  o.stride = c.stride;
  return o;
}

StopOutcome run_rule(const RuleSpec& rule, const Problem& fixture, const IntegrateOptions& options,
                     const ExperimentConfig& c) {
  switch (rule.kind) {
    case StopRule::dp: {
      DpConfig dp;
      dp.tau = rule.tau;
      dp.delta = fixture.delta;
      dp.crossing_tolerance = c.dp_crossing_tolerance;
      return dp_stop(fixture.inverse, dp, options);
    }
    case StopRule::hdp: {
      HdpConfig hdp;
      hdp.a = rule.a;
      hdp.t_max = c.t_max;
      hdp.stall_window = c.hdp_stall_window;
      IntegrateOptions o = options;
      o.theta_a = rule.a;
      return hdp_stop(fixture.inverse, hdp, o);
    }
    case StopRule::apriori:
      return apriori_stop(fixture.inverse, fixture.delta, rule.apriori, options);
    case StopRule::budget:
      break;
  }
  throw std::invalid_argument("run_rule: budget is not a rule");
}

namespace {

struct CellSpec {
  std::size_t delta_index;
  double delta;
  std::uint64_t seed;
  std::size_t rule_index;
};

CellResult run_cell(const ExperimentConfig& c, const CellSpec& spec) {
  CellResult r;
  r.id = "d" + std::to_string(spec.delta_index) + "_s" + std::to_string(spec.seed) + "_r" +
         std::to_string(spec.rule_index);
  r.delta = spec.delta;
  r.seed = spec.seed;
  const RuleSpec& rule = c.rules[spec.rule_index];
  r.rule = rule.label();
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const Problem fx = make_fixture(c, spec.delta, spec.seed);
    const StopOutcome out = run_rule(rule, fx, make_options(c, fx), c);
    r.t_stop = out.t_stop;
    r.re = relative_error(out.state.x, *fx.truth, fx.error_norm);
    r.stop_reason = to_string(out.rule);
    const double kappa = check_noise_condition(out.trajectory, fx.delta);

    const fs::path rel = fs::path("cells") / r.id;
    const fs::path dir = c.out / rel;
    io::write_text(dir / "outcome.json", io::outcome_json(out, r.re, kappa) + "\n");
    io::write_trace_csv(dir / "trace.csv", out.trajectory);
    r.files = {(rel / "outcome.json").generic_string(), (rel / "trace.csv").generic_string()};
    if (fx.image_rows > 0) {
      r.scaling = io::write_pgm16(dir / "x.pgm", out.state.x.values(), fx.image_rows, fx.image_cols);
      r.files.push_back((rel / "x.pgm").generic_string());
    } else {
      io::write_vector_csv(dir / "x.csv", out.state.x);
      r.files.push_back((rel / "x.csv").generic_string());
    }
    r.ok = true;
  } catch (const std::exception& e) {
    r.ok = false;
    r.error = e.what();
  }
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace

RunSummary run(const ExperimentConfig& c) {
  validate(c);
  std::vector<CellSpec> specs;
  for (std::size_t i = 0; i < c.deltas.size(); ++i) {
    for (auto seed : c.seeds) {
      for (std::size_t j = 0; j < c.rules.size(); ++j) specs.push_back({i, c.deltas[i], seed, j});
    }
  }

  const auto t0 = std::chrono::steady_clock::now();
  RunSummary summary;
  summary.cells.resize(specs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < specs.size(); k = next++) summary.cells[k] = run_cell(c, specs[k]);
  };
  const unsigned n_workers = std::max(1u, std::min<unsigned>(c.jobs, static_cast<unsigned>(specs.size())));
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < n_workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  nlohmann::json m;
  m["config_hash"] = config_hash(c);
  m["config"] = canonical_text(c);
  m["code_version"] = DUALFLOW_VERSION;
  m["preset"] = to_string(c.preset);
  m["delta_kind"] = c.preset == Preset::tomography ? "relative" : "absolute";
  m["deltas"] = c.deltas;
  m["seeds"] = c.seeds;
  nlohmann::json rules = nlohmann::json::array();
  for (const auto& r : c.rules) rules.push_back(r.label());
  m["rules"] = rules;
  nlohmann::json cells = nlohmann::json::array();
  nlohmann::json timing;
  timing["total_seconds"] = total;
  timing["jobs"] = n_workers;
  for (const auto& r : summary.cells) {
    nlohmann::json e;
    e["id"] = r.id;
    e["delta"] = r.delta;
    e["seed"] = r.seed;
    e["rule"] = r.rule;
    e["status"] = r.ok ? "ok" : "failed";
    if (r.ok) {
      e["t_stop"] = number_or_null(r.t_stop);
      e["re"] = number_or_null(r.re);
      e["stop_reason"] = r.stop_reason;
      e["files"] = r.files;
      if (r.scaling) e["pgm_scaling"] = {{"min", r.scaling->min}, {"max", r.scaling->max}};
    } else {
      e["error"] = r.error;
      ++summary.failed;
    }
    cells.push_back(std::move(e));
    timing["cells"][r.id] = r.wall_seconds;
  }
  m["cells"] = std::move(cells);
  m["partial"] = summary.failed > 0;
  m["timing_file"] = "timing.json";

  summary.manifest = c.out / "manifest.json";
  io::write_text(summary.manifest, m.dump(2) + "\n");
  io::write_text(c.out / "timing.json", timing.dump(2) + "\n");
  return summary;
}

}  // namespace dualflow::experiments
