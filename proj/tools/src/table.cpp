#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dualflow/experiments.hpp"

#ifndef DUALFLOW_DATA_DIR
#define DUALFLOW_DATA_DIR "data"
#endif

namespace dualflow::experiments {

namespace fs = std::filesystem;

namespace {

constexpr const char* kMissing = "—";

bool same_delta(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(std::abs(a), std::abs(b)); }

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
  return q + "\"";
}

// Display width in code points, so the em dash counts as one column.
std::size_t width(const std::string& s) {
  std::size_t n = 0;
  for (unsigned char ch : s) n += (ch & 0xC0) != 0x80;
  return n;
}

std::string pad(const std::string& s, std::size_t w) { return s + std::string(w > width(s) ? w - width(s) : 0, ' '); }

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_field(const std::string& s, const fs::path& path, int lineno) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (s.empty() || used != s.size()) {
    throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": bad number '" + s + "'");
  }
  return v;
}

}  // namespace

Table load_table(const fs::path& manifest_or_dir) {
  const fs::path path = fs::is_directory(manifest_or_dir) ? manifest_or_dir / "manifest.json" : manifest_or_dir;
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(io::read_text(path));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }

  Table t;
  try {
    t.preset = m.at("preset").get<std::string>();
    t.delta_label = m.value("delta_kind", "absolute") == "relative" ? "delta_rel" : "delta";
    t.deltas = m.at("deltas").get<std::vector<double>>();
    t.rules = m.at("rules").get<std::vector<std::string>>();
    std::vector<std::vector<int>> counts(t.deltas.size(), std::vector<int>(t.rules.size(), 0));
    t.cells.assign(t.deltas.size(), std::vector<TableCell>(t.rules.size()));
    for (const auto& e : m.at("cells")) {
      if (e.at("status") != "ok" || e.at("t_stop").is_null() || e.at("re").is_null()) continue;
      const double d = e.at("delta").get<double>();
      const std::string rule = e.at("rule").get<std::string>();
      for (std::size_t i = 0; i < t.deltas.size(); ++i) {
        if (!same_delta(t.deltas[i], d)) continue;
        for (std::size_t j = 0; j < t.rules.size(); ++j) {
          if (t.rules[j] != rule) continue;
          t.cells[i][j].t += e.at("t_stop").get<double>();
          t.cells[i][j].re += e.at("re").get<double>();
          ++counts[i][j];
        }
      }
    }
    for (std::size_t i = 0; i < t.deltas.size(); ++i) {
      for (std::size_t j = 0; j < t.rules.size(); ++j) {
        if (counts[i][j] == 0) continue;
        t.cells[i][j].present = true;
        t.cells[i][j].t /= counts[i][j];
        t.cells[i][j].re /= counts[i][j];
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path.string() + ": malformed manifest: " + e.what());
  }
  return t;
}

std::string format_table_text(const Table& t) {
  std::vector<std::vector<std::string>> grid;
  std::vector<std::string> head1{t.delta_label}, head2{""};
  for (const auto& r : t.rules) {
    head1.insert(head1.end(), {r, ""});
    head2.insert(head2.end(), {"t", "RE"});
  }
  grid.push_back(head1);
  grid.push_back(head2);
  for (std::size_t i = 0; i < t.deltas.size(); ++i) {
    std::vector<std::string> row{fmt("%g", t.deltas[i])};
    for (const auto& c : t.cells[i]) {
      row.push_back(c.present ? fmt("%.6g", c.t) : kMissing);
      row.push_back(c.present ? fmt("%.4e", c.re) : kMissing);
    }
    grid.push_back(row);
  }
  // A rule label spans its (t, RE) pair, so widen the pair when the label is long.
  std::vector<std::size_t> w(head1.size(), 0);
  for (const auto& row : grid) {
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (&row != &grid[0] || k == 0) w[k] = std::max(w[k], width(row[k]));
    }
  }
  for (std::size_t k = 1; k + 1 < head1.size(); k += 2) {
    const std::size_t need = width(head1[k]);
    if (w[k] + 2 + w[k + 1] < need) w[k + 1] = need - w[k] - 2;
  }
  std::string out;
  for (std::size_t r = 0; r < grid.size(); ++r) {
    std::string line;
    for (std::size_t k = 0; k < grid[r].size(); ++k) {
      if (k > 0) line += "  ";
      if (r == 0 && k % 2 == 1) {
        line += pad(grid[r][k], w[k] + 2 + w[k + 1]);
        ++k;
      } else {
        line += pad(grid[r][k], w[k]);
      }
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
  }
  return out;
}

std::string format_table_csv(const Table& t) {
  std::string out = t.delta_label;
  for (const auto& r : t.rules) out += "," + csv_field(r + " t") + "," + csv_field(r + " RE");
  out += "\n";
  for (std::size_t i = 0; i < t.deltas.size(); ++i) {
    out += io::format_double(t.deltas[i]);
    for (const auto& c : t.cells[i]) {
      out += "," + (c.present ? io::format_double(c.t) : std::string(kMissing));
      out += "," + (c.present ? io::format_double(c.re) : std::string(kMissing));
    }
    out += "\n";
  }
  return out;
}

std::vector<ReferenceRow> load_reference(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("reference table not found: " + path.string());
  std::vector<ReferenceRow> rows;
  std::string line;
  int lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto f = split_csv_line(line);
    if (!header) {
      if (f != std::vector<std::string>{"delta", "rule", "t", "re"}) {
        throw std::runtime_error(path.string() + ": expected header delta,rule,t,re");
      }
      header = true;
      continue;
    }
    if (f.size() != 4) throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected 4 fields");
    ReferenceRow r;
    r.delta = parse_field(f[0], path, lineno);
    try {
      r.rule = parse_rule(f[1]).label();
    } catch (const ConfigError& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (!f[2].empty()) r.t = parse_field(f[2], path, lineno);
    r.re = parse_field(f[3], path, lineno);
    rows.push_back(r);
  }
  if (!header) throw std::runtime_error(path.string() + ": empty reference table");
  return rows;
}

CheckResult check_table(const Table& t, const std::vector<ReferenceRow>& reference, double band) {
  CheckResult res;
  res.passed = true;
  auto within = [band](double v, double ref) { return v >= ref / band && v <= ref * band; };
  for (const auto& ref : reference) {
    std::size_t i = 0, j = 0;
    while (i < t.deltas.size() && !same_delta(t.deltas[i], ref.delta)) ++i;
    while (j < t.rules.size() && t.rules[j] != ref.rule) ++j;
    if (i == t.deltas.size() || j == t.rules.size()) continue;
    ++res.compared;
    const TableCell& c = t.cells[i][j];
    std::string line = fmt("%g", ref.delta) + " " + ref.rule + ": ";
    bool ok = c.present;
    if (!c.present) {
      line += "missing cell";
    } else {
      if (ref.t) {
        const bool t_ok = within(c.t, *ref.t);
        ok = ok && t_ok;
        line += "t " + fmt("%.6g", c.t) + " vs " + fmt("%.6g", *ref.t) + (t_ok ? " ok, " : " OUT, ");
      }
      const bool re_ok = within(c.re, ref.re);
      ok = ok && re_ok;
      line += "RE " + fmt("%.4e", c.re) + " vs " + fmt("%.4e", ref.re) + (re_ok ? " ok" : " OUT");
    }
    res.lines.push_back((ok ? "PASS " : "FAIL ") + line);
    res.passed = res.passed && ok;
  }
  if (res.compared == 0) {
    res.passed = false;
    res.lines.push_back("FAIL no reference row matches the table");
  }
  return res;
}

fs::path default_reference(std::string_view preset) {
  return fs::path(DUALFLOW_DATA_DIR) / "reference" / (std::string(preset) + ".csv");
}

}  // namespace dualflow::experiments
