#include "dualflow/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace dualflow::io {
namespace {

std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode = std::ios::out) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, mode | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

nlohmann::json number_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_trace_csv(const std::filesystem::path& path, const Trajectory& trajectory) {
  auto out = open_out(path);
  out << "t,residual_norm,R_value,relative_error,dual_objective,theta\n";
  for (const auto& r : trajectory.records) {
    out << format_double(r.t) << ',' << format_double(r.residual_norm) << ',' << format_double(r.r_value) << ','
        << format_double(r.relative_error) << ',' << format_double(r.dual_objective) << ','
        << format_double(r.theta) << '\n';
  }
  finish(out, path);
}

void write_vector_csv(const std::filesystem::path& path, const WeightedVector& v) {
  auto out = open_out(path);
  out << "index,weight,value\n";
  for (std::size_t i = 0; i < v.size(); ++i) {
    out << i << ',' << format_double(v.weights()[i]) << ',' << format_double(v[i]) << '\n';
  }
  finish(out, path);
}

void write_coo_csv(const std::filesystem::path& path, const ForwardOperator& op) {
  auto out = open_out(path);
  out << "row,col,value\n";
  if (const auto* sp = dynamic_cast<const SparseOperator*>(&op)) {
    const auto& m = sp->matrix();
    for (Eigen::Index r = 0; r < m.outerSize(); ++r) {
      for (SparseRowMatrix::InnerIterator it(m, r); it; ++it) {
        out << it.row() << ',' << it.col() << ',' << format_double(it.value()) << '\n';
      }
    }
  } else {
    // Dense storage, or anything else: probe column by column and emit row-major.
    RowMatrix m(op.rows(), op.cols());
    std::vector<double> e(op.cols(), 0.0), col(op.rows());
    for (std::size_t j = 0; j < op.cols(); ++j) {
      e[j] = 1.0;
      op.multiply(e, col);
      e[j] = 0.0;
      for (std::size_t i = 0; i < op.rows(); ++i) m(i, j) = col[i];
    }
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        if (m(i, j) != 0.0) out << i << ',' << j << ',' << format_double(m(i, j)) << '\n';
      }
    }
  }
  finish(out, path);
}

RowMatrix load_dense_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) {
      const auto b = field.find_first_not_of(" \t");
      const auto e = field.find_last_not_of(" \t");
      if (b == std::string::npos) throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": empty field");
      const std::string f = field.substr(b, e - b + 1);
      double v = 0.0;
      const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
      if (res.ec != std::errc() || res.ptr != f.data() + f.size()) {
        throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": not a number: " + f);
      }
      row.push_back(v);
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": ragged row");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error(path.string() + ": no data");
  RowMatrix m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  }
  return m;
}

void write_energy_csv(const std::filesystem::path& path, const EnergyReport& report) {
  auto out = open_out(path);
  out << "t,mu_id,lhs,rhs,violation\n";
  for (const auto& r : report.rows) {
    out << format_double(r.t) << ',' << r.mu_id << ',' << format_double(r.lhs) << ',' << format_double(r.rhs) << ','
        << format_double(r.violation) << '\n';
  }
  finish(out, path);
}

PgmScaling write_pgm16(const std::filesystem::path& path, std::span<const double> image, std::size_t rows,
                       std::size_t cols) {
  if (image.size() != rows * cols || image.empty()) throw std::invalid_argument("write_pgm16: bad image shape");
  const auto [lo, hi] = std::minmax_element(image.begin(), image.end());
  PgmScaling sc{*lo, *hi};
  auto out = open_out(path, std::ios::out | std::ios::binary);
  out << "P5\n" << cols << ' ' << rows << "\n65535\n";
  const double span = sc.max - sc.min;
  for (double v : image) {
    const double u = span > 0.0 ? (v - sc.min) / span : 0.0;
    const auto s = static_cast<unsigned>(std::lround(std::clamp(u, 0.0, 1.0) * 65535.0));
    const char bytes[2] = {static_cast<char>((s >> 8) & 0xff), static_cast<char>(s & 0xff)};
    out.write(bytes, 2);
  }
  finish(out, path);
  return sc;
}

PgmImage read_pgm16(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string magic;
  unsigned maxval = 0;
  PgmImage img;
  in >> magic >> img.cols >> img.rows >> maxval;
  if (magic != "P5" || maxval != 65535 || !in) throw std::runtime_error(path.string() + ": not a 16-bit P5 image");
  in.get();
  img.samples.resize(img.rows * img.cols);
  for (auto& s : img.samples) {
    unsigned char b[2];
    if (!in.read(reinterpret_cast<char*>(b), 2)) throw std::runtime_error(path.string() + ": truncated image");
    s = (static_cast<unsigned>(b[0]) << 8) | b[1];
  }
  return img;
}

std::string outcome_json(const StopOutcome& outcome, double relative_error, double kappa_hat) {
  nlohmann::json j;
  j["rule"] = to_string(outcome.rule);
  j["t_stop"] = number_or_null(outcome.t_stop);
  j["delta_star"] = number_or_null(outcome.delta_star);
  j["re"] = number_or_null(relative_error);
  j["theta_min"] = number_or_null(outcome.theta_min);
  j["kappa_hat"] = number_or_null(kappa_hat);
  j["refinements"] = outcome.refinements;
  return j.dump(2);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  auto out = open_out(path, std::ios::out | std::ios::binary);
  out << text;
  finish(out, path);
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace dualflow::io
