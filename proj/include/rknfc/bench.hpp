#pragma once

// Experiment runner: one plan -> one RunReport; grids of plans -> tables in
// markdown, CSV or JSON.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <future>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "coeffs.hpp"
#include "dirkn.hpp"
#include "error.hpp"
#include "iterate.hpp"
#include "problems.hpp"
#include "solver.hpp"

namespace rknfc {

enum class Method { RknTfcB, RknTfcBOuterInner, RknTfcF, RknTfcN, DirknF };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::RknTfcB: return "rkn-tfc-b";
    case Method::RknTfcBOuterInner: return "rkn-tfc-b-oi";
    case Method::RknTfcF: return "rkn-tfc-f";
    case Method::RknTfcN: return "rkn-tfc-n";
    case Method::DirknF: return "dirkn-f";
  }
  return "?";
}

inline Method parse_method(const std::string& s) {
  for (Method m : {Method::RknTfcB, Method::RknTfcBOuterInner, Method::RknTfcF, Method::RknTfcN,
                   Method::DirknF}) {
    if (s == to_string(m)) return m;
  }
  throw InvalidArgument("unknown method '" + s + "'");
}

/// Iteration scheme behind each collocation method flag.
inline IterationScheme scheme_for(Method m) {
  switch (m) {
    case Method::RknTfcB: return IterationScheme::BlendedSingleInner;
    case Method::RknTfcBOuterInner: return IterationScheme::BlendedOuterInner;
    case Method::RknTfcN: return IterationScheme::SimplifiedNewton;
    case Method::RknTfcF:
    case Method::DirknF: return IterationScheme::FixedPoint;
  }
  return IterationScheme::FixedPoint;
}

struct ExperimentPlan {
  std::string problem = "kepler";
  Method method = Method::RknTfcB;
  double t_end = 50.0;
  double h = 0.1;
  int k = 4;
  int r = 2;
  double tol = 1e-16;
  int max_iter = 10000;
  int inner_iter = 2;
  JacobianMode jacobian = JacobianMode::Analytic;
  std::optional<std::string> tableau_path;
  int repetitions = 3;
  /// Reference step for problems without an exact solution is h / refinement.
  int reference_refinement = 64;

  IterationConfig iteration() const {
    IterationConfig c;
    c.scheme = scheme_for(method);
    c.tol = tol;
    c.max_iter = max_iter;
    c.inner_iter = inner_iter;
    return c;
  }

  void validate(const ProblemRegistry& reg) const {
    if (!reg.contains(problem)) throw InvalidArgument("unknown problem '" + problem + "'");
    if (!(h > 0.0)) throw InvalidArgument("h must be > 0");
    if (!(t_end > 0.0)) throw InvalidArgument("t_end must be > 0");
    if (method != Method::DirknF && (r < 2 || r > k)) {
      throw InvalidArgument("need 2 <= r <= k");
    }
    if (repetitions < 1) throw InvalidArgument("repetitions must be >= 1");
    if (reference_refinement < 2) throw InvalidArgument("reference refinement must be >= 2");
    if (method == Method::DirknF && !tableau_path) {
      throw InvalidArgument("dirkn-f requires a tableau file (--tableau)");
    }
    iteration().validate();
    uniform_step_count(0.0, t_end, h);
  }
};

enum class RunStatus { Ok, NonConvergence, Invalid, Skipped };

inline const char* to_string(RunStatus s) {
  switch (s) {
    case RunStatus::Ok: return "ok";
    case RunStatus::NonConvergence: return "non-convergence";
    case RunStatus::Invalid: return "invalid";
    case RunStatus::Skipped: return "skipped";
  }
  return "?";
}

inline RunStatus parse_status(const std::string& s) {
  for (RunStatus st : {RunStatus::Ok, RunStatus::NonConvergence, RunStatus::Invalid,
                       RunStatus::Skipped}) {
    if (s == to_string(st)) return st;
  }
  throw InvalidArgument("unknown run status '" + s + "'");
}

struct RunReport {
  ExperimentPlan plan;
  RunStatus status = RunStatus::Ok;
  std::string message;
  std::optional<std::size_t> failed_step;
  double wall_time_s = 0.0;
  long long total_outer_iterations = 0;
  long long total_inner_iterations = 0;
  std::optional<double> log10_solution_error;
  /// log10 |I(t_end) − I(t0)| per invariant, in problem order.
  std::vector<std::pair<std::string, double>> log10_invariant_errors;
  /// log10 max_n |I(t_n) − I(t0)| per invariant.
  std::vector<std::pair<std::string, double>> log10_invariant_max_drift;
  std::map<std::string, std::string> metadata;
};

inline double safe_log10(double x) {
  return x > 0.0 ? std::log10(x) : -std::numeric_limits<double>::infinity();
}

inline std::map<std::string, std::string> report_conventions(bool exact_reference,
                                                             int refinement) {
  std::map<std::string, std::string> md;
  md["solution_error"] =
      exact_reference
          ? "log10 Euclidean norm of the position error at t_end against the exact solution"
          : "log10 Euclidean norm of the position error at t_end against RKN-TFC (blended, "
            "same k and r) with step h/" +
                std::to_string(refinement);
  md["invariant_error"] = "log10 |I(q_N, q_N') - I(q_0, q_0')| at t_end";
  md["invariant_max_drift"] = "log10 max over grid points of |I(q_n, q_n') - I(q_0, q_0')|";
  md["iterations"] =
      "total outer sweeps over all steps, one k-stage force evaluation each; initial guess and "
      "final stage evaluation not counted; inner iterations reported separately";
  md["gamma0"] = "Gamma f(Upsilon)";
  md["stopping"] =
      "max-norm of the realized update <= tol, or stagnation at round-off level after 3 sweeps "
      "without a new minimum";
  md["timing"] = "median wall time over repetitions; coefficients and reference excluded";
  return md;
}

namespace detail {

inline Trajectory run_once(const ExperimentPlan& plan, const SecondOrderIVP& ivp,
                           const MethodCoefficients* coeffs, const DIRKNTableau* tableau) {
  const IntegrateOptions opts{false};
  if (plan.method == Method::DirknF) {
    return dirkn_integrate(*tableau, ivp, plan.h, plan.iteration(), opts);
  }
  SolverConfig cfg;
  cfg.iteration = plan.iteration();
  cfg.jacobian = plan.jacobian;
  return integrate(ivp, plan.h, *coeffs, cfg, opts);
}

}  // namespace detail

/// Execute one plan. Errors are reported in the RunReport status, never thrown.
inline RunReport run(const ExperimentPlan& plan, const ProblemRegistry& reg = {}) {
  RunReport rep;
  rep.plan = plan;
  try {
    plan.validate(reg);
  } catch (const std::exception& e) {
    rep.status = RunStatus::Invalid;
    rep.message = e.what();
    return rep;
  }

  try {
    const ProblemSpec problem = reg.make(plan.problem, plan.t_end);
    rep.metadata = report_conventions(problem.ivp.exact.has_value(), plan.reference_refinement);
    rep.metadata["method"] = to_string(plan.method);
    rep.metadata["scheme"] = to_string(plan.iteration().scheme);
    rep.metadata["jacobian"] =
        plan.jacobian == JacobianMode::Analytic ? "analytic" : "finite-difference";

    std::optional<MethodCoefficients> coeffs;
    std::optional<DIRKNTableau> tableau;
    if (plan.method == Method::DirknF) {
      tableau = load_dirkn_tableau(*plan.tableau_path);
    } else {
      coeffs = build_coefficients(plan.k, plan.r);
    }

    std::vector<double> times;
    Trajectory traj;
    for (int rep_i = 0; rep_i < plan.repetitions; ++rep_i) {
      const auto t0 = std::chrono::steady_clock::now();
      traj = detail::run_once(plan, problem.ivp, coeffs ? &*coeffs : nullptr,
                              tableau ? &*tableau : nullptr);
      const auto t1 = std::chrono::steady_clock::now();
      times.push_back(std::chrono::duration<double>(t1 - t0).count());
    }
    std::sort(times.begin(), times.end());
    rep.wall_time_s = times[times.size() / 2];
    rep.total_outer_iterations = traj.cumulative_stats.outer_count;
    rep.total_inner_iterations = traj.cumulative_stats.inner_count;
    for (const auto& [name, v] : traj.invariant_endpoint_error) {
      rep.log10_invariant_errors.emplace_back(name, safe_log10(v));
    }
    for (const auto& [name, v] : traj.invariant_drift) {
      rep.log10_invariant_max_drift.emplace_back(name, safe_log10(v));
    }

    if (traj.endpoint_error) {
      rep.log10_solution_error = safe_log10(*traj.endpoint_error);
    } else {
      const MethodCoefficients ref_coeffs = coeffs ? *coeffs : build_coefficients(4, 2);
      SolverConfig ref_cfg;
      ref_cfg.iteration.scheme = IterationScheme::BlendedSingleInner;
      ref_cfg.iteration.tol = plan.tol;
      ref_cfg.iteration.max_iter = plan.max_iter;
      const Trajectory ref = integrate(problem.ivp, plan.h / plan.reference_refinement,
                                       ref_coeffs, ref_cfg, IntegrateOptions{false});
      rep.log10_solution_error = safe_log10((ref.states.back().q - traj.states.back().q).norm());
    }
  } catch (const NonConvergenceError& e) {
    rep.status = RunStatus::NonConvergence;
    rep.message = e.what();
    rep.failed_step = e.step_index();
  } catch (const SingularMatrixError& e) {
    rep.status = RunStatus::NonConvergence;
    rep.message = e.what();
  } catch (const ForceDomainError& e) {
    rep.status = RunStatus::NonConvergence;
    rep.message = e.what();
  } catch (const InvalidArgument& e) {
    rep.status = RunStatus::Invalid;
    rep.message = e.what();
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Tables

struct TableGrid {
  std::string problem;
  std::vector<Method> methods;
  std::vector<std::pair<double, double>> cells;  ///< (t_end, h)
  ExperimentPlan base;                           ///< k, r, tol, ... shared by all cells
};

/// The (t, h) grids and method lists of the two benchmark tables.
inline TableGrid benchmark_grid(const std::string& name) {
  TableGrid g;
  g.methods = {Method::RknTfcB, Method::RknTfcF, Method::DirknF};
  if (name == "table4") {
    g.problem = "kepler";
    g.cells = {{50, 0.4}, {50, 0.2}, {50, 0.1}, {100, 0.4}, {100, 0.2}, {100, 0.1}};
  } else if (name == "table5") {
    g.problem = "henon-heiles";
    g.cells = {{50, 0.1}, {50, 0.05}, {50, 0.025}, {100, 0.1}, {100, 0.05}, {100, 0.025}};
  } else {
    throw InvalidArgument("unknown benchmark grid '" + name + "' (expected table4 or table5)");
  }
  g.base.problem = g.problem;
  return g;
}

/// Plans of a grid in row order: for each (t, h) cell, each method.
inline std::vector<ExperimentPlan> expand(const TableGrid& g) {
  std::vector<ExperimentPlan> out;
  for (const auto& [t, h] : g.cells) {
    for (Method m : g.methods) {
      ExperimentPlan p = g.base;
      p.problem = g.problem;
      p.method = m;
      p.t_end = t;
      p.h = h;
      out.push_back(p);
    }
  }
  return out;
}

/// Run every cell; independent cells run concurrently on up to `jobs`
/// threads. DIRKN cells without a tableau are marked skipped.
inline std::vector<RunReport> run_table(const TableGrid& g, unsigned jobs = 0,
                                        const ProblemRegistry& reg = {}) {
  const std::vector<ExperimentPlan> plans = expand(g);
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  std::vector<RunReport> out(plans.size());
  std::size_t next = 0;
  while (next < plans.size()) {
    std::vector<std::pair<std::size_t, std::future<RunReport>>> batch;
    for (unsigned j = 0; j < jobs && next < plans.size(); ++j, ++next) {
      const ExperimentPlan& p = plans[next];
      if (p.method == Method::DirknF && !p.tableau_path) {
        out[next].plan = p;
        out[next].status = RunStatus::Skipped;
        out[next].message = "no DIRKN tableau supplied";
        continue;
      }
      batch.emplace_back(next, std::async(std::launch::async, [&reg, p] { return run(p, reg); }));
    }
    for (auto& [idx, fut] : batch) out[idx] = fut.get();
  }
  return out;
}

/// Union of invariant names over the reports, in first-seen order.
inline std::vector<std::string> invariant_columns(const std::vector<RunReport>& rows) {
  std::vector<std::string> names;
  for (const auto& r : rows) {
    for (const auto& [n, _] : r.log10_invariant_errors) {
      if (std::find(names.begin(), names.end(), n) == names.end()) names.push_back(n);
    }
  }
  return names;
}

namespace detail {

inline std::string fmt(double v, const char* spec) {
  if (std::isinf(v)) return v < 0 ? "-inf" : "inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

inline std::optional<double> lookup(const std::vector<std::pair<std::string, double>>& v,
                                    const std::string& name) {
  for (const auto& [n, x] : v) {
    if (n == name) return x;
  }
  return std::nullopt;
}

inline double parse_double(const std::string& s) {
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  std::size_t pos = 0;
  const double v = std::stod(s, &pos);
  if (pos != s.size()) throw InvalidArgument("bad number '" + s + "'");
  return v;
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace detail

/// Markdown table, one row per (method, t, h); errors as log10.
inline void emit_markdown(std::ostream& os, const std::vector<RunReport>& rows) {
  const auto inv = invariant_columns(rows);
  os << "| Method (t,h) | CPU time | Iterations | Solution error |";
  for (const auto& n : inv) os << ' ' << n << " error |";
  os << '\n' << "|---|---|---|---|";
  for (std::size_t i = 0; i < inv.size(); ++i) os << "---|";
  os << '\n';
  for (const auto& r : rows) {
    os << "| " << to_string(r.plan.method) << " (" << detail::fmt(r.plan.t_end, "%g") << ','
       << detail::fmt(r.plan.h, "%g") << ") | ";
    if (r.status != RunStatus::Ok) {
      os << to_string(r.status) << " | - | - |";
      for (std::size_t i = 0; i < inv.size(); ++i) os << " - |";
      os << '\n';
      continue;
    }
    os << detail::fmt(r.wall_time_s, "%.3f") << " | " << r.total_outer_iterations << " | "
       << (r.log10_solution_error ? detail::fmt(*r.log10_solution_error, "%.3f") : "-") << " |";
    for (const auto& n : inv) {
      const auto v = detail::lookup(r.log10_invariant_errors, n);
      os << ' ' << (v ? detail::fmt(*v, "%.3f") : "-") << " |";
    }
    os << '\n';
  }
}

/// One row of a table as read back from CSV.
struct TableRow {
  std::string problem;
  std::string method;
  double t_end = 0.0;
  double h = 0.0;
  std::string status;
  double cpu_time = 0.0;
  long long iterations = 0;
  long long inner_iterations = 0;
  std::optional<double> solution_error;
  std::vector<std::pair<std::string, std::optional<double>>> invariant_errors;

  bool operator==(const TableRow&) const = default;
};

inline TableRow to_row(const RunReport& r, const std::vector<std::string>& inv) {
  TableRow row;
  row.problem = r.plan.problem;
  row.method = to_string(r.plan.method);
  row.t_end = r.plan.t_end;
  row.h = r.plan.h;
  row.status = to_string(r.status);
  row.cpu_time = r.wall_time_s;
  row.iterations = r.total_outer_iterations;
  row.inner_iterations = r.total_inner_iterations;
  row.solution_error = r.log10_solution_error;
  for (const auto& n : inv) row.invariant_errors.emplace_back(n, detail::lookup(r.log10_invariant_errors, n));
  return row;
}

inline std::vector<TableRow> to_rows(const std::vector<RunReport>& reports) {
  const auto inv = invariant_columns(reports);
  std::vector<TableRow> rows;
  for (const auto& r : reports) rows.push_back(to_row(r, inv));
  return rows;
}

/// CSV with full precision so that parse_csv(emit_csv(x)) == x.
inline void emit_csv(std::ostream& os, const std::vector<TableRow>& rows,
                     const std::vector<std::string>& inv) {
  os << "problem,method,t_end,h,status,cpu_time,iterations,inner_iterations,solution_error";
  for (const auto& n : inv) os << ',' << n << "_error";
  os << '\n';
  for (const auto& r : rows) {
    os << r.problem << ',' << r.method << ',' << detail::fmt(r.t_end, "%.17g") << ','
       << detail::fmt(r.h, "%.17g") << ',' << r.status << ','
       << detail::fmt(r.cpu_time, "%.17g") << ',' << r.iterations << ',' << r.inner_iterations
       << ',' << (r.solution_error ? detail::fmt(*r.solution_error, "%.17g") : "");
    for (const auto& n : inv) {
      std::optional<double> v;
      for (const auto& [name, x] : r.invariant_errors) {
        if (name == n) v = x;
      }
      os << ',' << (v ? detail::fmt(*v, "%.17g") : "");
    }
    os << '\n';
  }
}

inline void emit_csv(std::ostream& os, const std::vector<RunReport>& reports) {
  emit_csv(os, to_rows(reports), invariant_columns(reports));
}

inline std::vector<TableRow> parse_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw InvalidArgument("parse_csv: missing header");
  const auto header = detail::split_csv(line);
  static const std::vector<std::string> fixed = {
      "problem", "method", "t_end", "h", "status", "cpu_time", "iterations", "inner_iterations",
      "solution_error"};
  if (header.size() < fixed.size() || !std::equal(fixed.begin(), fixed.end(), header.begin())) {
    throw InvalidArgument("parse_csv: unexpected header");
  }
  std::vector<std::string> inv;
  for (std::size_t i = fixed.size(); i < header.size(); ++i) {
    const std::string& col = header[i];
    const std::string suffix = "_error";
    if (col.size() <= suffix.size() || col.compare(col.size() - suffix.size(), suffix.size(), suffix) != 0) {
      throw InvalidArgument("parse_csv: bad invariant column '" + col + "'");
    }
    inv.push_back(col.substr(0, col.size() - suffix.size()));
  }
  std::vector<TableRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = detail::split_csv(line);
    if (f.size() != header.size()) throw InvalidArgument("parse_csv: wrong field count");
    TableRow r;
    r.problem = f[0];
    r.method = f[1];
    r.t_end = detail::parse_double(f[2]);
    r.h = detail::parse_double(f[3]);
    r.status = f[4];
    r.cpu_time = detail::parse_double(f[5]);
    r.iterations = std::stoll(f[6]);
    r.inner_iterations = std::stoll(f[7]);
    if (!f[8].empty()) r.solution_error = detail::parse_double(f[8]);
    for (std::size_t i = 0; i < inv.size(); ++i) {
      const std::string& cell = f[fixed.size() + i];
      r.invariant_errors.emplace_back(inv[i], cell.empty() ? std::nullopt
                                                           : std::optional(detail::parse_double(cell)));
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

inline nlohmann::json to_json(const RunReport& r) {
  auto num = [](double v) -> nlohmann::json {
    if (std::isfinite(v)) return v;
    return nullptr;
  };
  nlohmann::json j;
  j["plan"] = {{"problem", r.plan.problem},
               {"method", to_string(r.plan.method)},
               {"t_end", r.plan.t_end},
               {"h", r.plan.h},
               {"k", r.plan.k},
               {"r", r.plan.r},
               {"tol", r.plan.tol},
               {"max_iter", r.plan.max_iter},
               {"inner_iter", r.plan.inner_iter},
               {"jacobian", r.plan.jacobian == JacobianMode::Analytic ? "analytic" : "fd"},
               {"repetitions", r.plan.repetitions}};
  if (r.plan.tableau_path) j["plan"]["tableau"] = *r.plan.tableau_path;
  j["status"] = to_string(r.status);
  if (!r.message.empty()) j["message"] = r.message;
  if (r.failed_step) j["failed_step"] = *r.failed_step;
  j["wall_time_s"] = r.wall_time_s;
  j["total_outer_iterations"] = r.total_outer_iterations;
  j["total_inner_iterations"] = r.total_inner_iterations;
  j["log10_solution_error"] = r.log10_solution_error ? num(*r.log10_solution_error) : nullptr;
  j["log10_invariant_errors"] = nlohmann::json::object();
  for (const auto& [n, v] : r.log10_invariant_errors) j["log10_invariant_errors"][n] = num(v);
  j["log10_invariant_max_drift"] = nlohmann::json::object();
  for (const auto& [n, v] : r.log10_invariant_max_drift) j["log10_invariant_max_drift"][n] = num(v);
  j["metadata"] = r.metadata;
  return j;
}

inline nlohmann::json to_json(const std::vector<RunReport>& rows) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rows) arr.push_back(to_json(r));
  return arr;
}

}  // namespace rknfc
