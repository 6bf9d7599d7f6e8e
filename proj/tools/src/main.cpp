#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "dualflow/experiments.hpp"

namespace fs = std::filesystem;
using namespace dualflow::experiments;

namespace {

struct Overrides {
  std::string config;
  std::string out;
  unsigned jobs = 0;
  std::optional<std::uint64_t> seed;
  std::string scheme;
  std::optional<double> dt;
  bool check = false;
  std::string reference;
};

// preset < file < DUALFLOW_OUT < command line
ExperimentConfig resolve(const Overrides& o) {
  std::map<std::string, std::string> kv;
  if (!o.config.empty()) {
    std::string text;
    try {
      text = dualflow::io::read_text(o.config);
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
    try {
      kv = parse_key_values(text);
    } catch (const ConfigError& e) {
      throw ConfigError(o.config + ": " + e.what());
    }
  }
  ExperimentConfig c = config_from_key_values(kv);
  if (const char* env = std::getenv("DUALFLOW_OUT"); env && *env) c.out = env;
  if (!o.out.empty()) c.out = o.out;
  if (o.jobs > 0) c.jobs = o.jobs;
  if (o.seed) c.seeds = {*o.seed};
  if (!o.scheme.empty()) apply_key_value(c, "scheme", o.scheme);
  if (o.dt) c.dt = *o.dt;
  if (!o.reference.empty()) c.reference = o.reference;
  validate(c);
  return c;
}

int emit_table(const fs::path& run_dir, const Table& t) {
  const std::string text = format_table_text(t);
  dualflow::io::write_text(run_dir / "table.txt", text);
  dualflow::io::write_text(run_dir / "table.csv", format_table_csv(t));
  std::cout << text;
  return exit_ok;
}

int do_check(const Table& t, const fs::path& reference) {
  std::vector<ReferenceRow> rows;
  try {
    rows = load_reference(reference);
  } catch (const std::exception& e) {
    std::cerr << "check: " << e.what() << "\n";
    return exit_check;
  }
  const CheckResult res = check_table(t, rows);
  for (const auto& line : res.lines) std::cout << line << "\n";
  std::cout << "check " << (res.passed ? "passed" : "FAILED") << " (" << res.compared << " cells compared)\n";
  return res.passed ? exit_ok : exit_check;
}

fs::path reference_for(const ExperimentConfig& c, const Table& t) {
  return c.reference.empty() ? default_reference(t.preset) : c.reference;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dual gradient flow experiments"};
  app.require_subcommand(1);
  Overrides o;
  std::string seed_text, dt_text, table_path;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "key = value config file");
    sub->add_option("--out", o.out, "output directory (overrides DUALFLOW_OUT and the config)");
    sub->add_option("--scheme", o.scheme, "euler or rk4");
    sub->add_option("--dt", dt_text, "step size (overrides the preset step)");
  };

  auto* run_cmd = app.add_subcommand("run", "run every (delta, seed, rule) cell and write a manifest");
  add_common(run_cmd);
  run_cmd->add_option("--jobs", o.jobs, "worker threads");
  run_cmd->add_option("--seed", seed_text, "run a single noise seed");
  run_cmd->add_flag("--check", o.check, "compare the table with the reference (factor 3 bands)");
  run_cmd->add_option("--reference", o.reference, "reference CSV for --check");

  auto* table_cmd = app.add_subcommand("table", "format a finished run as a (t, RE) table");
  table_cmd->add_option("manifest", table_path, "run directory or manifest.json");
  table_cmd->add_option("--config", o.config, "config file, used to locate the run directory");
  table_cmd->add_option("--out", o.out, "run directory");
  table_cmd->add_flag("--check", o.check, "compare with the reference (factor 3 bands)");
  table_cmd->add_option("--reference", o.reference, "reference CSV for --check");

  auto* verify_cmd = app.add_subcommand("verify", "monotonicity, energy inequality and dual descent on the fixtures");
  add_common(verify_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_config;
  }

  ExperimentConfig c;
  try {
    if (!seed_text.empty()) {
      std::size_t used = 0;
      const unsigned long long s = std::stoull(seed_text, &used);
      if (used != seed_text.size()) throw ConfigError("--seed: not a non-negative integer");
      o.seed = s;
    }
    if (!dt_text.empty()) {
      std::size_t used = 0;
      o.dt = std::stod(dt_text, &used);
      if (used != dt_text.size()) throw ConfigError("--dt: not a number");
    }
    c = resolve(o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return exit_config;
  } catch (const std::logic_error&) {
    std::cerr << "config error: --seed and --dt must be numbers\n";
    return exit_config;
  }

  if (*run_cmd) {
    RunSummary s;
    try {
      s = run(c);
    } catch (const std::exception& e) {
      std::cerr << "run: " << e.what() << "\n";
      return exit_partial;
    }
    std::cout << "manifest: " << s.manifest.string() << "\n";
    for (const auto& cell : s.cells) {
      if (!cell.ok) std::cerr << "cell " << cell.id << " (" << cell.rule << ") failed: " << cell.error << "\n";
    }
    const Table t = load_table(s.manifest);
    emit_table(c.out, t);
    int code = o.check ? do_check(t, reference_for(c, t)) : exit_ok;
    return s.failed > 0 ? exit_partial : code;
  }

  if (*table_cmd) {
    const fs::path where = table_path.empty() ? c.out : fs::path(table_path);
    Table t;
    try {
      t = load_table(where);
    } catch (const std::exception& e) {
      std::cerr << "table: " << e.what() << "\n";
      return exit_config;
    }
    emit_table(fs::is_directory(where) ? where : where.parent_path(), t);
    return o.check ? do_check(t, reference_for(c, t)) : exit_ok;
  }

  if (o.out.empty() && std::getenv("DUALFLOW_OUT") == nullptr && c.out == preset_config(c.preset).out) {
    c.out = "results/verify";
  }
  try {
    const VerifyReport rep = verify_suite(c);
    for (const auto& v : rep.cases) {
      std::cout << (v.passed ? "PASS " : "FAIL ") << v.name << " delta=" << v.delta << " tau=" << v.tau
                << " steps=" << v.steps << " t=" << v.t_stop << " max_inc=" << v.max_residual_increase
                << " energy_flagged=" << v.energy_flagged << "/" << v.energy_rows << " kappa=" << v.kappa_hat
                << " (" << v.seconds << " s)\n";
    }
    dualflow::io::write_text(c.out / "verify.json", verify_json(rep));
    return rep.passed ? exit_ok : exit_check;
  } catch (const std::exception& e) {
    std::cerr << "verify: " << e.what() << "\n";
    return exit_check;
  }
}
