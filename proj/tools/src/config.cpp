#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "dualflow/experiments.hpp"

namespace dualflow::experiments {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

double parse_number(std::string_view s, const std::string& what) {
  s = trim(s);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ConfigError(what + ": not a number: '" + std::string(s) + "'");
  }
  return v;
}

std::uint64_t parse_unsigned(std::string_view s, const std::string& what) {
  s = trim(s);
  std::uint64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ConfigError(what + ": not a non-negative integer: '" + std::string(s) + "'");
  }
  return v;
}

// Splits on commas at parenthesis depth zero; empty input gives no items.
std::vector<std::string_view> split_top_level(std::string_view s) {
  std::vector<std::string_view> out;
  if (trim(s).empty()) return out;
  int depth = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || (s[i] == ',' && depth == 0)) {
      out.push_back(trim(s.substr(start, i - start)));
      start = i + 1;
    } else if (s[i] == '(') {
      ++depth;
    } else if (s[i] == ')') {
      --depth;
    }
  }
  return out;
}

std::vector<double> parse_number_list(std::string_view s, const std::string& what) {
  std::vector<double> out;
  for (auto item : split_top_level(s)) out.push_back(parse_number(item, what));
  return out;
}

std::string join_numbers(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + io::format_double(v[i]);
  return s;
}

}  // namespace

std::string RuleSpec::label() const {
  switch (kind) {
    case StopRule::dp:
      return "dp(tau=" + io::format_double(tau) + ")";
    case StopRule::hdp:
      return "hdp(a=" + io::format_double(a) + ")";
    case StopRule::apriori:
      return "apriori(omega=" + io::format_double(apriori.omega) + ",q=" + io::format_double(apriori.q) +
             ",c=" + io::format_double(apriori.c_scale) + ")";
    case StopRule::budget:
      break;
  }
  return "budget";
}

RuleSpec parse_rule(std::string_view text) {
  text = trim(text);
  const auto open = text.find('(');
  const std::string name(trim(text.substr(0, open)));
  std::string_view args;
  if (open != std::string_view::npos) {
    if (text.back() != ')') throw ConfigError("rule '" + std::string(text) + "': missing ')'");
    args = text.substr(open + 1, text.size() - open - 2);
  }

  RuleSpec r;
  if (name == "dp") {
    r.kind = StopRule::dp;
  } else if (name == "hdp") {
    r.kind = StopRule::hdp;
  } else if (name == "apriori") {
    r.kind = StopRule::apriori;
  } else {
    throw ConfigError("unknown rule '" + name + "' (expected dp, hdp or apriori)");
  }
  for (auto arg : split_top_level(args)) {
    const auto eq = arg.find('=');
    if (eq == std::string_view::npos) throw ConfigError("rule " + name + ": expected key=value, got '" + std::string(arg) + "'");
    const std::string key(trim(arg.substr(0, eq)));
    const double v = parse_number(arg.substr(eq + 1), "rule " + name + " " + key);
    if (r.kind == StopRule::dp && key == "tau") {
      r.tau = v;
    } else if (r.kind == StopRule::hdp && key == "a") {
      r.a = v;
    } else if (r.kind == StopRule::apriori && key == "omega") {
      r.apriori.omega = v;
    } else if (r.kind == StopRule::apriori && key == "q") {
      r.apriori.q = v;
    } else if (r.kind == StopRule::apriori && key == "c") {
      r.apriori.c_scale = v;
    } else {
      throw ConfigError("rule " + name + ": unknown parameter '" + key + "'");
    }
  }
  return r;
}

std::vector<RuleSpec> parse_rules(std::string_view text) {
  std::vector<RuleSpec> out;
  for (auto item : split_top_level(text)) out.push_back(parse_rule(item));
  return out;
}

const char* to_string(Preset p) { return p == Preset::tomography ? "tomography" : "deconvolution"; }

ExperimentConfig preset_config(Preset preset) {
  ExperimentConfig c;
  c.preset = preset;
  if (preset == Preset::deconvolution) {
    c.deltas = {1e-1, 1e-2, 1e-3};
    c.rules = parse_rules("dp(tau=1.1), dp(tau=6), hdp(a=0.1)");
    c.t_max = 1e5;
  } else {
    c.deltas = {5e-2, 1e-2, 5e-3};
    c.rules = parse_rules("dp(tau=1.05), dp(tau=3), hdp(a=0.1)");
    c.t_max = 20.0;
  }
  c.out = std::filesystem::path("results") / to_string(preset);
  return c;
}

std::map<std::string, std::string> parse_key_values(std::string_view text) {
  std::map<std::string, std::string> kv;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view l = line;
    if (const auto hash = l.find('#'); hash != std::string_view::npos) l = l.substr(0, hash);
    l = trim(l);
    if (l.empty()) continue;
    const auto eq = l.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    std::string key(trim(l.substr(0, eq)));
    std::string value(trim(l.substr(eq + 1)));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    if (!kv.emplace(key, value).second) throw ConfigError("line " + std::to_string(lineno) + ": repeated key '" + key + "'");
  }
  return kv;
}

void apply_key_value(ExperimentConfig& c, const std::string& key, const std::string& value) {
  auto size = [&] { return static_cast<std::size_t>(parse_unsigned(value, key)); };
  if (key == "preset") {
    if (value != to_string(c.preset)) throw ConfigError("preset must be set before other keys");
  } else if (key == "grid_n") {
    c.grid_n = size();
  } else if (key == "image_n") {
    c.image_n = size();
  } else if (key == "n_angles") {
    c.n_angles = size();
  } else if (key == "n_detectors") {
    c.n_detectors = size();
  } else if (key == "deltas") {
    c.deltas = parse_number_list(value, key);
  } else if (key == "seeds") {
    c.seeds.clear();
    for (auto item : split_top_level(value)) c.seeds.push_back(parse_unsigned(item, key));
  } else if (key == "rules") {
    c.rules = parse_rules(value);
  } else if (key == "scheme") {
    try {
      c.scheme = parse_scheme(value);
    } catch (const std::invalid_argument&) {
      throw ConfigError("scheme must be euler or rk4, got '" + value + "'");
    }
  } else if (key == "dt") {
    c.dt = parse_number(value, key);
  } else if (key == "t_max") {
    c.t_max = parse_number(value, key);
  } else if (key == "stride") {
    c.stride = size();
  } else if (key == "hdp_stall_window") {
    c.hdp_stall_window = size();
  } else if (key == "dp_crossing_tolerance") {
    c.dp_crossing_tolerance = parse_number(value, key);
  } else if (key == "tv_solver") {
    if (value == "dykstra") {
      c.tv.solver = TvSolver::dykstra;
    } else if (value == "pdhg") {
      c.tv.solver = TvSolver::pdhg;
    } else {
      throw ConfigError("tv_solver must be dykstra or pdhg, got '" + value + "'");
    }
  } else if (key == "tv_tolerance") {
    c.tv.relative_tolerance = parse_number(value, key);
  } else if (key == "tv_max_iter") {
    c.tv.max_iter = static_cast<int>(parse_unsigned(value, key));
  } else if (key == "tv_check_every") {
    c.tv.check_every = static_cast<int>(parse_unsigned(value, key));
  } else if (key == "out") {
    c.out = value;
  } else if (key == "jobs") {
    c.jobs = static_cast<unsigned>(parse_unsigned(value, key));
  } else if (key == "reference") {
    c.reference = value;
  } else {
    throw ConfigError("unknown key '" + key + "'");
  }
}

ExperimentConfig config_from_key_values(const std::map<std::string, std::string>& kv) {
  Preset preset = Preset::deconvolution;
  if (auto it = kv.find("preset"); it != kv.end()) {
    if (it->second == "tomography") {
      preset = Preset::tomography;
    } else if (it->second != "deconvolution") {
      throw ConfigError("preset must be deconvolution or tomography, got '" + it->second + "'");
    }
  }
  ExperimentConfig c = preset_config(preset);
  for (const auto& [k, v] : kv) apply_key_value(c, k, v);
  return c;
}

void validate(const ExperimentConfig& c) {
  if (c.rules.empty()) throw ConfigError("at least one rule is required");
  for (const auto& r : c.rules) {
    if (r.kind == StopRule::dp && !(r.tau > 1.0)) throw ConfigError(r.label() + ": tau must be > 1");
    if (r.kind == StopRule::hdp && !(r.a > 0.0)) throw ConfigError(r.label() + ": a must be > 0");
    if (r.kind == StopRule::apriori) {
      try {
        dualflow::validate(r.apriori);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(r.label() + ": " + e.what());
      }
    }
  }
  if (c.deltas.empty()) throw ConfigError("the delta ladder is empty");
  for (double d : c.deltas) {
    if (!(d > 0.0) || !std::isfinite(d)) throw ConfigError("deltas must be positive and finite");
  }
  if (c.seeds.empty()) throw ConfigError("at least one seed is required");
  if (c.preset == Preset::deconvolution && c.grid_n < 2) throw ConfigError("grid_n must be >= 2");
  if (c.preset == Preset::tomography && (c.image_n < 2 || c.n_angles < 1 || c.n_detectors < 1)) {
    throw ConfigError("image_n must be >= 2, n_angles and n_detectors >= 1");
  }
  if (c.dt && !(*c.dt > 0.0)) throw ConfigError("dt must be > 0");
  if (!(c.t_max > 0.0)) throw ConfigError("t_max must be > 0");
  if (c.stride < 1) throw ConfigError("stride must be >= 1");
  if (!(c.dp_crossing_tolerance > 0.0 && c.dp_crossing_tolerance < 1.0)) {
    throw ConfigError("dp_crossing_tolerance must lie in (0, 1)");
  }
  if (!(c.tv.relative_tolerance > 0.0) || c.tv.max_iter < 1 || c.tv.check_every < 1) {
    throw ConfigError("tv_tolerance must be > 0, tv_max_iter and tv_check_every >= 1");
  }
  if (c.jobs < 1) throw ConfigError("jobs must be >= 1");
}

std::string canonical_text(const ExperimentConfig& c) {
  std::string s;
  auto put = [&s](const char* key, const std::string& value) { s += std::string(key) + " = " + value + "\n"; };
  put("preset", to_string(c.preset));
  if (c.preset == Preset::deconvolution) {
    put("grid_n", std::to_string(c.grid_n));
  } else {
    put("image_n", std::to_string(c.image_n));
    put("n_angles", std::to_string(c.n_angles));
    put("n_detectors", std::to_string(c.n_detectors));
    put("tv_solver", dualflow::to_string(c.tv.solver));
    put("tv_tolerance", io::format_double(c.tv.relative_tolerance));
    put("tv_max_iter", std::to_string(c.tv.max_iter));
    put("tv_check_every", std::to_string(c.tv.check_every));
  }
  put("deltas", join_numbers(c.deltas));
  std::string seeds;
  for (std::size_t i = 0; i < c.seeds.size(); ++i) seeds += (i ? "," : "") + std::to_string(c.seeds[i]);
  put("seeds", seeds);
  std::string rules;
  for (std::size_t i = 0; i < c.rules.size(); ++i) rules += (i ? "," : "") + c.rules[i].label();
  put("rules", rules);
  put("scheme", dualflow::to_string(c.scheme));
  put("dt", c.dt ? io::format_double(*c.dt) : "preset");
  put("t_max", io::format_double(c.t_max));
  put("stride", std::to_string(c.stride));
  put("hdp_stall_window", std::to_string(c.hdp_stall_window));
  put("dp_crossing_tolerance", io::format_double(c.dp_crossing_tolerance));
  return s;
}

std::string config_hash(const ExperimentConfig& c) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : canonical_text(c)) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace dualflow::experiments
