#pragma once

#include <algorithm>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "malm/config.hpp"
#include "malm/oracle.hpp"
#include "malm/outer.hpp"
#include "malm/trace_io.hpp"

// Subcommands behind the `malm` executable. Each returns the process exit code.
namespace malm::cli {

inline constexpr int kExitConverged = 0;
inline constexpr int kExitConfigError = 1;
inline constexpr int kExitMaxOuter = 2;
inline constexpr int kExitInnerFailure = 3;

inline int exit_code(OuterStatus s) {
  switch (s) {
    case OuterStatus::Converged: return kExitConverged;
    case OuterStatus::MaxOuter: return kExitMaxOuter;
    case OuterStatus::InnerFailure: return kExitInnerFailure;
  }
  return kExitConfigError;
}

inline OuterOptions make_options(const config::RunConfig& rc, double omega_e) {
  OuterOptions o;
  o.cfg = {rc.omega, omega_e};
  o.max_outer = rc.max_outer;
  o.outer_tol = rc.outer_tol;
  o.warm_start = rc.warm_start;
  if (rc.inner_grad_tol) o.inner.grad_tol = *rc.inner_grad_tol;
  if (rc.inner_max_iters) o.inner.max_iters = *rc.inner_max_iters;
  return o;
}

inline SolveTrace run_method(config::MethodChoice method, const NlpProblem& p, const Vector& x0,
                             const Vector& lambda0, const OuterOptions& opts) {
  switch (method) {
    case config::MethodChoice::Alm: return alm_solve(p, x0, lambda0, opts);
    case config::MethodChoice::Malm: return malm_solve(p, x0, lambda0, opts);
    case config::MethodChoice::MalmRoot: return malm_solve_root_form(p, x0, lambda0, opts);
    case config::MethodChoice::Penalty: return penalty_direct_solve(p, x0, opts);
  }
  fail(ErrorCode::InvalidArgument, "bad method");
}

struct Start {
  Vector x0;
  Vector lambda0;
};

inline Start start_point(const config::RunConfig& rc, const NlpProblem& p) {
  Start s{rc.x0.value_or(p.x0), rc.lambda0.value_or(Vector::Zero(p.m))};
  if (s.x0.size() != p.n) fail(ErrorCode::ConfigError, "x0 needs " + std::to_string(p.n) + " entries");
  if (s.lambda0.size() != p.m) fail(ErrorCode::ConfigError, "lambda0 needs " + std::to_string(p.m) + " entries");
  return s;
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::ConfigError, "cannot write '" + path + "'");
  out << content;
}

inline std::string one_line_summary(const SolveTrace& t, const NlpProblem& p) {
  std::ostringstream os;
  os << "method=" << to_string(t.method) << " status=" << to_string(t.status)
     << " outer_iters=" << t.outer_iters() << " inner_iters=" << t.total_inner_iters()
     << " residual=" << io::format_real(t.final_residual())
     << " c_norm=" << io::format_real(eval_c(p, t.x_final).norm())
     << " x_final=[" << io::format_vector(t.x_final, ',') << "]";
  return os.str();
}

/// Runs the selected method, writes the CSV trace to rc.output_path (if set)
/// and prints a one-line summary.
inline int cmd_solve(const config::RunConfig& rc, std::ostream& out, std::ostream& err) {
  try {
    const NlpProblem p = config::resolve_problem(rc.problem);
    const Start s = start_point(rc, p);
    const SolveTrace t = run_method(rc.method, p, s.x0, s.lambda0, make_options(rc, rc.omega_e));
    for (const auto& w : t.warnings) err << "warning: " << w << '\n';
    if (!rc.output_path.empty()) {
      std::ostringstream csv;
      io::write_csv(t, csv);
      write_file(rc.output_path, csv.str());
    }
    out << one_line_summary(t, p) << '\n';
    return exit_code(t.status);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfigError;
  }
}

struct CompareRow {
  config::MethodChoice method;
  OuterStatus status;
  int outer_iters = 0;
  int total_inner_iters = 0;
  std::optional<double> max_condition;
  double upnp_residual = 0.0;
};

/// Runs every method in rc.methods on the same problem and omega_e.
inline std::vector<CompareRow> compare(const config::RunConfig& rc) {
  if (!(rc.omega_e > 0.0)) fail(ErrorCode::ConfigError, "compare needs omega_e > 0");
  if (rc.methods.empty()) fail(ErrorCode::ConfigError, "compare needs at least one method");
  const NlpProblem p = config::resolve_problem(rc.problem);
  const Start s = start_point(rc, p);
  const OuterOptions opts = make_options(rc, rc.omega_e);
  std::vector<CompareRow> rows;
  for (auto m : rc.methods) {
    const SolveTrace t = run_method(m, p, s.x0, s.lambda0, opts);
    rows.push_back({m, t.status, t.outer_iters(), t.total_inner_iters(), t.max_condition(),
                    upnp_residual(p, t.x_final, rc.omega_e)});
  }
  return rows;
}

inline constexpr const char* kCompareHeader =
    "method,status,outer_iters,total_inner_iters,max_condition,upnp_residual";

inline void write_compare_table(const std::vector<CompareRow>& rows, std::ostream& os) {
  os << kCompareHeader << '\n';
  for (const auto& r : rows) {
    os << config::method_name(r.method) << ',' << to_string(r.status) << ',' << r.outer_iters << ','
       << r.total_inner_iters << ',' << io::format_optional(r.max_condition) << ','
       << io::format_real(r.upnp_residual) << '\n';
  }
}

inline int cmd_compare(const config::RunConfig& rc, std::ostream& out, std::ostream& err) {
  try {
    const auto rows = compare(rc);
    std::ostringstream table;
    write_compare_table(rows, table);
    if (!rc.output_path.empty()) write_file(rc.output_path, table.str());
    out << table.str();
    int code = kExitConverged;
    for (const auto& r : rows) code = std::max(code, exit_code(r.status));
    return code;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfigError;
  }
}

struct SweepRow {
  double omega_e = 0.0;
  OuterStatus status;
  int outer_iters = 0;
  int inner_iters = 0;
  double f = 0.0;
  double c_norm = 0.0;
  std::optional<double> upnp_residual;
  std::optional<double> dist_closed_form;  // to the penalty solution at this omega_e (convex QP)
  std::optional<double> dist_limit;        // to the omega_e -> 0 limit (convex QP)
  Vector x;
};

/// Strictly decreasing, positive, with an optional trailing 0.
inline void validate_schedule(const std::vector<double>& schedule) {
  if (schedule.empty()) fail(ErrorCode::ConfigError, "empty omega_e schedule");
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    const double w = schedule[i];
    const bool last = i + 1 == schedule.size();
    if (!(w > 0.0) && !(last && w == 0.0)) {
      fail(ErrorCode::ConfigError, "schedule entries must be > 0 (only the last may be 0)");
    }
    if (i > 0 && !(w < schedule[i - 1])) fail(ErrorCode::ConfigError, "schedule must be strictly decreasing");
  }
}

/// Sequence of MALM solves along rc.schedule, each warm-started from the
/// previous (x, lambda) unless rc.warm_start is false.
inline std::vector<SweepRow> sweep(const config::RunConfig& rc) {
  validate_schedule(rc.schedule);
  const NlpProblem p = config::resolve_problem(rc.problem);
  const Start s = start_point(rc, p);

  const bool convex_qp = p.qp && is_convex(*p.qp);
  std::optional<Vector> limit;
  if (convex_qp) {
    try {
      limit = oracle::qp_bi_objective_limit(*p.qp).x_star;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::MultipleMinimizers) throw;
    }
  }

  std::vector<SweepRow> rows;
  Vector x = s.x0;
  Vector lambda = s.lambda0;
  for (double w : rc.schedule) {
    const SolveTrace t = malm_solve(p, rc.warm_start ? x : s.x0, rc.warm_start ? lambda : s.lambda0,
                                    make_options(rc, w));
    SweepRow row;
    row.omega_e = w;
    row.status = t.status;
    row.outer_iters = t.outer_iters();
    row.inner_iters = t.total_inner_iters();
    row.f = eval_f(p, t.x_final);
    row.c_norm = eval_c(p, t.x_final).norm();
    if (w > 0.0) row.upnp_residual = upnp_residual(p, t.x_final, w);
    if (convex_qp && w > 0.0) {
      row.dist_closed_form = (t.x_final - oracle::qp_upnp_closed_form(*p.qp, w)).norm();
    }
    if (limit) row.dist_limit = (t.x_final - *limit).norm();
    row.x = t.x_final;
    rows.push_back(std::move(row));
    x = t.x_final;
    lambda = t.lambda_final;
  }
  return rows;
}

inline constexpr const char* kSweepHeader =
    "omega_e,status,outer_iters,inner_iters,f,c_norm,upnp_residual,dist_closed_form,dist_limit,x";

inline void write_sweep_table(const std::vector<SweepRow>& rows, std::ostream& os) {
  os << kSweepHeader << '\n';
  for (const auto& r : rows) {
    os << io::format_real(r.omega_e) << ',' << to_string(r.status) << ',' << r.outer_iters << ','
       << r.inner_iters << ',' << io::format_real(r.f) << ',' << io::format_real(r.c_norm) << ','
       << io::format_optional(r.upnp_residual) << ',' << io::format_optional(r.dist_closed_form) << ','
       << io::format_optional(r.dist_limit) << ',' << io::format_vector(r.x) << '\n';
  }
}

inline int cmd_sweep(const config::RunConfig& rc, std::ostream& out, std::ostream& err) {
  try {
    const auto rows = sweep(rc);
    std::ostringstream table;
    write_sweep_table(rows, table);
    if (!rc.output_path.empty()) write_file(rc.output_path, table.str());
    out << table.str();
    int code = kExitConverged;
    for (const auto& r : rows) code = std::max(code, exit_code(r.status));
    return code;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfigError;
  }
}

}  // namespace malm::cli
