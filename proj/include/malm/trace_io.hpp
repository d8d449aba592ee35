#pragma once

#include <cstdio>
#include <optional>
#include <ostream>
#include <string>

#include "malm/outer.hpp"

namespace malm::io {

/// 17 significant digits in scientific notation; parses back to the same double.
inline std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.16e", v);
  return buf;
}

inline std::string format_optional(const std::optional<double>& v) {
  return v ? format_real(*v) : std::string();
}

inline std::string format_vector(const Vector& v, char sep = ' ') {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i > 0) out += sep;
    out += format_real(v(i));
  }
  return out;
}

inline constexpr const char* kTraceHeader = "k,f,c_norm,shifted_c_norm,inner_iters,cond,residual";

/// One row per outer iterate. Absent condition estimates are written as an empty field.
inline void write_csv(const SolveTrace& trace, std::ostream& os) {
  os << kTraceHeader << '\n';
  for (const auto& r : trace.records) {
    os << r.k << ',' << format_real(r.f_val) << ',' << format_real(r.c_norm) << ','
       << format_real(r.shifted_c_norm) << ',' << r.inner_iters << ','
       << format_optional(r.subproblem_condition) << ',' << format_real(r.terminal_residual) << '\n';
  }
}

/// `key = value` summary of a solve.
inline void write_summary(const SolveTrace& trace, std::ostream& os) {
  os << "method = " << to_string(trace.method) << '\n'
     << "status = " << to_string(trace.status) << '\n'
     << "omega = " << format_real(trace.cfg.omega) << '\n'
     << "omega_e = " << format_real(trace.cfg.omega_e) << '\n'
     << "outer_iters = " << trace.outer_iters() << '\n'
     << "inner_iters = " << trace.total_inner_iters() << '\n'
     << "max_condition = " << format_optional(trace.max_condition()) << '\n'
     << "residual = " << format_real(trace.final_residual()) << '\n'
     << "x_final = " << format_vector(trace.x_final) << '\n'
     << "lambda_final = " << format_vector(trace.lambda_final) << '\n';
}

}  // namespace malm::io
