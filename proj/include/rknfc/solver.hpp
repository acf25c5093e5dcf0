#pragma once

// One-step map and fixed-step integration of q'' = f(q).

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "coeffs.hpp"
#include "error.hpp"
#include "iterate.hpp"

namespace rknfc {

/// (q, q') at one instant.
struct PhaseState {
  Vector q;
  Vector qp;
};

/// A scalar function of (q, q') that is conserved along exact solutions.
struct Invariant {
  std::string name;
  std::function<double(const Vector& q, const Vector& qp)> eval;
};

struct SecondOrderIVP {
  int dim = 0;
  ForceFn force;
  std::optional<JacobianFn> jacobian;
  Vector q0;
  Vector q0_prime;
  double t0 = 0.0;
  double t_end = 0.0;
  std::optional<std::function<PhaseState(double)>> exact;
  std::vector<Invariant> invariants;

  void validate() const {
    if (dim < 1) throw InvalidArgument("SecondOrderIVP: dim must be >= 1");
    if (!(t_end >= t0)) throw InvalidArgument("SecondOrderIVP: t_end must be >= t0");
    if (q0.size() != dim || q0_prime.size() != dim) {
      throw InvalidArgument("SecondOrderIVP: initial data must have size dim");
    }
    if (!force) throw InvalidArgument("SecondOrderIVP: missing force");
  }
};

enum class JacobianMode { Analytic, FiniteDifference };

struct SolverConfig {
  IterationConfig iteration;
  JacobianMode jacobian = JacobianMode::Analytic;
};

struct StepOutput {
  Vector q1;
  Vector q1_prime;
  Vector gamma;
  IterationStats stats;
  int failed_stage = -1;  ///< set by stage-wise solvers on non-convergence
};

/// Central differences, column by column, with ε_i = √eps · max(1, |q_i|).
inline Matrix finite_difference_jacobian(const ForceFn& force, const Vector& q) {
  const Eigen::Index d = q.size();
  const double root_eps = std::sqrt(std::numeric_limits<double>::epsilon());
  Matrix jac(d, d);
  Vector probe = q;
  for (Eigen::Index i = 0; i < d; ++i) {
    const double eps = root_eps * std::max(1.0, std::abs(q[i]));
    probe[i] = q[i] + eps;
    const Vector fp = force(probe);
    probe[i] = q[i] - eps;
    const Vector fm = force(probe);
    probe[i] = q[i];
    if (fp.size() != d || fm.size() != d) {
      throw InvalidArgument("finite_difference_jacobian: force returned wrong size");
    }
    jac.col(i) = (fp - fm) / (2.0 * eps);
  }
  return jac;
}

inline Matrix step_jacobian(const SecondOrderIVP& ivp, const Vector& q, JacobianMode mode) {
  if (mode == JacobianMode::Analytic && ivp.jacobian) return (*ivp.jacobian)(q);
  return finite_difference_jacobian(ivp.force, q);
}

/// q₁ from the converged coefficients: q + h q' + h²(½γ₀ − γ₁/(2√3)).
inline Vector gamma_position_update(const Vector& q, const Vector& qp, double h,
                                    const Vector& gamma) {
  const Eigen::Index d = q.size();
  return q + h * qp +
         h * h * (0.5 * gamma.segment(0, d) - gamma.segment(d, d) / (2.0 * std::sqrt(3.0)));
}

/// One step of the k-stage method from (q, q').
///
/// `core` is the r×r Newton matrix; pass newton_core_matrix(coeffs).
inline StepOutput step(const SecondOrderIVP& ivp, const Vector& q, const Vector& qp, double h,
                       const MethodCoefficients& coeffs, const Matrix& core,
                       const SolverConfig& cfg) {
  if (!(h > 0.0)) throw InvalidArgument("step: h must be > 0");
  std::optional<Matrix> J0;
  if (needs_jacobian(cfg.iteration.scheme)) J0 = step_jacobian(ivp, q, cfg.jacobian);
  const BlendedOperators ops(coeffs, h, q, qp, std::move(J0));
  IterationResult it = solve_gamma(ops, ivp.force, core, cfg.iteration);

  StepOutput out;
  out.stats = it.stats;
  out.gamma = std::move(it.gamma);
  if (!out.stats.converged) {
    out.q1 = q;
    out.q1_prime = qp;
    return out;
  }
  const Eigen::Index d = q.size();
  const Vector v = ops.stages(out.gamma);
  const Vector fv = evaluate_stages(ivp.force, v, d);
  const auto F = as_blocks(fv, d);
  out.q1 = q + h * qp + h * h * (F * coeffs.b_bar);
  out.q1_prime = qp + h * (F * coeffs.b);
  return out;
}

inline StepOutput step(const SecondOrderIVP& ivp, const Vector& q, const Vector& qp, double h,
                       const MethodCoefficients& coeffs, const SolverConfig& cfg) {
  return step(ivp, q, qp, h, coeffs, newton_core_matrix(coeffs), cfg);
}

struct Trajectory {
  std::vector<double> times;
  std::vector<PhaseState> states;
  IterationStats cumulative_stats;
  /// max |I(qₙ, qₙ') − I(q₀, q₀')| over the grid, per invariant, in ivp order.
  std::vector<std::pair<std::string, double>> invariant_drift;
  /// |I(q_N, q_N') − I(q₀, q₀')| at the final grid point, per invariant.
  std::vector<std::pair<std::string, double>> invariant_endpoint_error;
  /// ‖q(t_end) − q_N‖₂ when an exact solution is available.
  std::optional<double> endpoint_error;
};

struct IntegrateOptions {
  bool store_states = true;
};

/// Number of uniform steps covering [t0, t_end]; the ratio must be an
/// integer to within 1e-8.
inline std::size_t uniform_step_count(double t0, double t_end, double h) {
  if (!(h > 0.0)) throw InvalidArgument("integrate: h must be > 0");
  const double ratio = (t_end - t0) / h;
  const double n = std::round(ratio);
  if (std::abs(ratio - n) > 1e-8) {
    throw InvalidArgument("integrate: (t_end - t0)/h = " + std::to_string(ratio) +
                          " is not an integer");
  }
  return static_cast<std::size_t>(n);
}

/// Fixed-step driver shared by all one-step maps. `advance(q, qp)` must
/// return a StepOutput; a non-converged step aborts with NonConvergenceError.
template <class StepFn>
Trajectory integrate_fixed_step(const SecondOrderIVP& ivp, double h, StepFn&& advance,
                                const IntegrateOptions& opts = {}) {
  ivp.validate();
  const std::size_t n = uniform_step_count(ivp.t0, ivp.t_end, h);

  Trajectory traj;
  std::vector<double> initial(ivp.invariants.size());
  for (std::size_t i = 0; i < ivp.invariants.size(); ++i) {
    initial[i] = ivp.invariants[i].eval(ivp.q0, ivp.q0_prime);
    traj.invariant_drift.emplace_back(ivp.invariants[i].name, 0.0);
  }
  if (opts.store_states) {
    traj.times.reserve(n + 1);
    traj.states.reserve(n + 1);
    traj.times.push_back(ivp.t0);
    traj.states.push_back({ivp.q0, ivp.q0_prime});
  }

  Vector q = ivp.q0;
  Vector qp = ivp.q0_prime;
  for (std::size_t s = 0; s < n; ++s) {
    StepOutput out = advance(q, qp);
    traj.cumulative_stats += out.stats;
    if (!out.stats.converged) {
      std::string what = "iteration did not converge (last update norm " +
                         std::to_string(out.stats.final_update_norm) + ")";
      if (out.failed_stage >= 0) what += " in stage " + std::to_string(out.failed_stage);
      throw NonConvergenceError(what, s);
    }
    q = std::move(out.q1);
    qp = std::move(out.q1_prime);
    for (std::size_t i = 0; i < ivp.invariants.size(); ++i) {
      const double dev = std::abs(ivp.invariants[i].eval(q, qp) - initial[i]);
      traj.invariant_drift[i].second = std::max(traj.invariant_drift[i].second, dev);
    }
    if (opts.store_states) {
      traj.times.push_back(ivp.t0 + static_cast<double>(s + 1) * h);
      traj.states.push_back({q, qp});
    }
  }
  if (!opts.store_states) {
    traj.times = {ivp.t0 + static_cast<double>(n) * h};
    traj.states = {{q, qp}};
  }
  traj.cumulative_stats.converged = true;
  for (std::size_t i = 0; i < ivp.invariants.size(); ++i) {
    traj.invariant_endpoint_error.emplace_back(
        ivp.invariants[i].name, std::abs(ivp.invariants[i].eval(q, qp) - initial[i]));
  }
  if (ivp.exact) {
    const PhaseState ref = (*ivp.exact)(ivp.t0 + static_cast<double>(n) * h);
    traj.endpoint_error = (ref.q - q).norm();
  }
  return traj;
}

/// Fixed-step integration over [ivp.t0, ivp.t_end] with the collocation
/// method. Throws NonConvergenceError on the first step whose iteration fails.
inline Trajectory integrate(const SecondOrderIVP& ivp, double h, const MethodCoefficients& coeffs,
                            const SolverConfig& cfg, const IntegrateOptions& opts = {}) {
  cfg.iteration.validate();
  const Matrix core = newton_core_matrix(coeffs);
  return integrate_fixed_step(
      ivp, h,
      [&](const Vector& q, const Vector& qp) { return step(ivp, q, qp, h, coeffs, core, cfg); },
      opts);
}

}  // namespace rknfc
