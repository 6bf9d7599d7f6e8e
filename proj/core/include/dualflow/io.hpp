#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dualflow/diagnostics.hpp"
#include "dualflow/operator.hpp"
#include "dualflow/rules.hpp"

namespace dualflow::io {

/// Shortest decimal string that round-trips to the same double.
std::string format_double(double v);

/// File writers throw std::runtime_error when the file cannot be written.

/// Header t,residual_norm,R_value,relative_error,dual_objective,theta.
void write_trace_csv(const std::filesystem::path& path, const Trajectory& trajectory);

/// Header index,weight,value.
void write_vector_csv(const std::filesystem::path& path, const WeightedVector& v);

/// Nonzero entries of the nodal matrix M as row,col,value.
void write_coo_csv(const std::filesystem::path& path, const ForwardOperator& op);

/// Comma-separated numeric rows without header. Throws std::runtime_error on
/// unreadable files, ragged rows or non-numeric fields.
RowMatrix load_dense_csv(const std::filesystem::path& path);

/// Header t,mu_id,lhs,rhs,violation.
void write_energy_csv(const std::filesystem::path& path, const EnergyReport& report);

struct PgmScaling {
  double min = 0.0;
  double max = 0.0;
};

/// Binary P5 with maxval 65535, big-endian samples, row-major. Values are
/// mapped linearly from [min, max] to [0, 65535]; a constant image maps to 0.
PgmScaling write_pgm16(const std::filesystem::path& path, std::span<const double> image, std::size_t rows,
                       std::size_t cols);

struct PgmImage {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<unsigned> samples;
};

/// Reads files produced by write_pgm16 (no comment lines).
PgmImage read_pgm16(const std::filesystem::path& path);

/// {rule, t_stop, delta_star, re, theta_min, kappa_hat, refinements} as a JSON
/// object with sorted keys. NaN fields become null.
std::string outcome_json(const StopOutcome& outcome, double relative_error, double kappa_hat);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace dualflow::io
