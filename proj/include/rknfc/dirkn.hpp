#pragma once

// Diagonally implicit RKN reference stepper with externally supplied
// coefficients. Stages are solved one after the other by fixed-point
// iteration.
//
// Tableau file format (whitespace separated, '#' starts a comment line):
//
//   s order
//   c_1 ... c_s
//   a_11 ... a_ss                    (diagonal of Ā)
//   a_21                             (strictly lower rows of Ā)
//   a_31 a_32
//   ...
//   b̄_1 ... b̄_s
//   b_1 ... b_s

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "iterate.hpp"
#include "solver.hpp"

namespace rknfc {

struct DIRKNTableau {
  int s = 0;
  int order = 0;
  Vector c;
  Vector gamma_diag;
  Matrix A_bar;  ///< s×s lower triangular, diagonal = gamma_diag
  Vector b_bar;
  Vector b;
};

/// Largest violation of the order conditions that survive on q'' = λq,
/// up to the declared order. For an RKN step on that problem
///   q₁  = q₀ + h q₀' + Σₙ h^{2n+2} b̄ᵀĀⁿu q₀ + h^{2n+3} b̄ᵀĀⁿc q₀'
///   q₁' = q₀' + Σₙ h^{2n+1} bᵀĀⁿu q₀ + h^{2n+2} bᵀĀⁿc q₀'
/// which must match cosh/sinh through h^order.
inline double linear_order_defect(const DIRKNTableau& t) {
  const Vector u = Vector::Ones(t.s);
  Vector au = u;  // Āⁿ u
  Vector ac = t.c;
  double worst = 0.0;
  auto factorial = [](int m) {
    double f = 1.0;
    for (int i = 2; i <= m; ++i) f *= i;
    return f;
  };
  for (int n = 0; 2 * n + 1 <= t.order; ++n) {
    const int p_u_pos = 2 * n + 2;  // b̄ᵀĀⁿu  ~ 1/(2n+2)!
    const int p_c_pos = 2 * n + 3;  // b̄ᵀĀⁿc  ~ 1/(2n+3)!
    const int p_u_vel = 2 * n + 1;  // bᵀĀⁿu   ~ 1/(2n+1)!
    const int p_c_vel = 2 * n + 2;  // bᵀĀⁿc   ~ 1/(2n+2)!
    if (p_u_pos <= t.order) {
      worst = std::max(worst, std::abs(t.b_bar.dot(au) - 1.0 / factorial(p_u_pos)));
    }
    if (p_c_pos <= t.order) {
      worst = std::max(worst, std::abs(t.b_bar.dot(ac) - 1.0 / factorial(p_c_pos)));
    }
    if (p_u_vel <= t.order) {
      worst = std::max(worst, std::abs(t.b.dot(au) - 1.0 / factorial(p_u_vel)));
    }
    if (p_c_vel <= t.order) {
      worst = std::max(worst, std::abs(t.b.dot(ac) - 1.0 / factorial(p_c_vel)));
    }
    au = t.A_bar * au;
    ac = t.A_bar * ac;
  }
  return worst;
}

inline constexpr double kDirknOrderTolerance = 1e-10;

/// Structural checks plus the linear order conditions. Throws InvalidArgument.
inline void validate_dirkn_tableau(const DIRKNTableau& t) {
  if (t.s < 1) throw InvalidArgument("DIRKN tableau: s must be >= 1");
  if (t.order < 1) throw InvalidArgument("DIRKN tableau: order must be >= 1");
  if (t.c.size() != t.s || t.gamma_diag.size() != t.s || t.b_bar.size() != t.s ||
      t.b.size() != t.s || t.A_bar.rows() != t.s || t.A_bar.cols() != t.s) {
    throw InvalidArgument("DIRKN tableau: inconsistent dimensions");
  }
  for (int i = 0; i < t.s; ++i) {
    if (t.A_bar(i, i) != t.gamma_diag[i]) {
      throw InvalidArgument("DIRKN tableau: diagonal of A_bar differs from gamma_diag");
    }
    for (int j = i + 1; j < t.s; ++j) {
      if (t.A_bar(i, j) != 0.0) throw InvalidArgument("DIRKN tableau: A_bar is not lower triangular");
    }
  }
  const double defect = linear_order_defect(t);
  if (!(defect <= kDirknOrderTolerance)) {
    std::ostringstream msg;
    msg << "DIRKN tableau: order conditions for declared order " << t.order
        << " violated (defect " << defect << ")";
    throw InvalidArgument(msg.str());
  }
}

inline DIRKNTableau parse_dirkn_tableau(std::istream& is) {
  std::ostringstream clean;
  std::string line;
  while (std::getline(is, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    clean << line << '\n';
  }
  std::istringstream in(clean.str());
  auto next = [&](const char* what) {
    double v = 0.0;
    if (!(in >> v)) throw InvalidArgument(std::string("DIRKN tableau: cannot read ") + what);
    return v;
  };
  DIRKNTableau t;
  const double s = next("s");
  const double order = next("order");
  if (s < 1 || s != std::floor(s) || order < 1 || order != std::floor(order)) {
    throw InvalidArgument("DIRKN tableau: s and order must be positive integers");
  }
  t.s = static_cast<int>(s);
  t.order = static_cast<int>(order);
  auto read_vec = [&](const char* what) {
    Vector v(t.s);
    for (int i = 0; i < t.s; ++i) v[i] = next(what);
    return v;
  };
  t.c = read_vec("c");
  t.gamma_diag = read_vec("diagonal");
  t.A_bar = t.gamma_diag.asDiagonal();
  for (int i = 1; i < t.s; ++i) {
    for (int j = 0; j < i; ++j) t.A_bar(i, j) = next("A_bar");
  }
  t.b_bar = read_vec("b_bar");
  t.b = read_vec("b");
  std::string extra;
  if (in >> extra) throw InvalidArgument("DIRKN tableau: trailing data '" + extra + "'");
  validate_dirkn_tableau(t);
  return t;
}

inline DIRKNTableau load_dirkn_tableau(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InvalidArgument("cannot open tableau file '" + path + "'");
  return parse_dirkn_tableau(f);
}

inline void write_dirkn_tableau(std::ostream& os, const DIRKNTableau& t) {
  char buf[64];
  auto put = [&](double v, bool first) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << (first ? "" : " ") << buf;
  };
  os << t.s << ' ' << t.order << '\n';
  for (int i = 0; i < t.s; ++i) put(t.c[i], i == 0);
  os << '\n';
  for (int i = 0; i < t.s; ++i) put(t.gamma_diag[i], i == 0);
  os << '\n';
  for (int i = 1; i < t.s; ++i) {
    for (int j = 0; j < i; ++j) put(t.A_bar(i, j), j == 0);
    os << '\n';
  }
  for (int i = 0; i < t.s; ++i) put(t.b_bar[i], i == 0);
  os << '\n';
  for (int i = 0; i < t.s; ++i) put(t.b[i], i == 0);
  os << '\n';
}

/// One DIRKN step. Stage i solves
///   v_i = q + c_i h q' + h² Σ_{j<i} ā_ij f(v_j) + h² ā_ii f(v_i)
/// by fixed-point iteration from the explicit part. outer_count sums the
/// sweeps of all stages.
inline StepOutput dirkn_step(const DIRKNTableau& t, const SecondOrderIVP& ivp, const Vector& q,
                             const Vector& qp, double h, const IterationConfig& cfg) {
  cfg.validate();
  if (!(h > 0.0)) throw InvalidArgument("dirkn_step: h must be > 0");
  const Eigen::Index d = q.size();
  const double h2 = h * h;
  Matrix fs(d, t.s);
  StepOutput out;
  out.stats.effective_tol = cfg.tol;
  out.stats.converged = true;
  for (int i = 0; i < t.s; ++i) {
    Vector base = q + t.c[i] * h * qp;
    for (int j = 0; j < i; ++j) base += h2 * t.A_bar(i, j) * fs.col(j);
    const double a = t.A_bar(i, i);
    Vector v = base;
    if (a != 0.0) {
      IterationStats stage;
      detail::UpdateMonitor monitor(cfg);
      bool done = false;
      for (int m = 0; m < cfg.max_iter && !done; ++m) {
        Vector next = base + h2 * a * ivp.force(v);
        ++stage.outer_count;
        const Vector update = next - v;
        v = std::move(next);
        done = monitor.record(update, v, stage) != detail::UpdateMonitor::Status::Continue;
      }
      out.stats.outer_count += stage.outer_count;
      out.stats.corrections += stage.corrections;
      out.stats.force_sweeps += stage.outer_count;
      out.stats.final_update_norm = stage.final_update_norm;
      out.stats.stagnated = out.stats.stagnated || stage.stagnated;
      if (!stage.converged) {
        out.stats.converged = false;
        out.failed_stage = i;
        out.q1 = q;
        out.q1_prime = qp;
        return out;
      }
    }
    fs.col(i) = ivp.force(v);
  }
  out.q1 = q + h * qp + h2 * (fs * t.b_bar);
  out.q1_prime = qp + h * (fs * t.b);
  return out;
}

inline Trajectory dirkn_integrate(const DIRKNTableau& t, const SecondOrderIVP& ivp, double h,
                                  const IterationConfig& cfg, const IntegrateOptions& opts = {}) {
  cfg.validate();
  return integrate_fixed_step(
      ivp, h, [&](const Vector& q, const Vector& qp) { return dirkn_step(t, ivp, q, qp, h, cfg); },
      opts);
}

}  // namespace rknfc
