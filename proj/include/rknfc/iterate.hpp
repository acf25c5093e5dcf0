#pragma once

// Iteration engines for the per-step nonlinear system in the Legendre
// coefficients γ:
//
//   F(γ) = γ − (PᵀΩ ⊗ I_d) f(u⊗q₀ + h c⊗q₀' + h²(L ⊗ I_d) γ) = 0.
//
// Three engines are provided: plain fixed-point, simplified Newton with the
// rd×rd matrix I − h² C ⊗ J₀, and the blended iteration that only factorizes
// the d×d matrix I − ρ²h²J₀.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "coeffs.hpp"
#include "error.hpp"
#include "kron.hpp"

namespace rknfc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// q ↦ f(q). May throw ForceDomainError.
using ForceFn = std::function<Vector(const Vector&)>;
/// q ↦ ∂f/∂q.
using JacobianFn = std::function<Matrix(const Vector&)>;

enum class IterationScheme { FixedPoint, SimplifiedNewton, BlendedOuterInner, BlendedSingleInner };

inline const char* to_string(IterationScheme s) {
  switch (s) {
    case IterationScheme::FixedPoint: return "fixed-point";
    case IterationScheme::SimplifiedNewton: return "simplified-newton";
    case IterationScheme::BlendedOuterInner: return "blended-outer-inner";
    case IterationScheme::BlendedSingleInner: return "blended-single-inner";
  }
  return "?";
}

inline bool needs_jacobian(IterationScheme s) { return s != IterationScheme::FixedPoint; }

struct IterationConfig {
  IterationScheme scheme = IterationScheme::BlendedSingleInner;
  double tol = 1e-16;
  int max_iter = 10000;
  int inner_iter = 2;  ///< BlendedOuterInner only
  /// Sweeps without a new smallest update before the iteration is declared
  /// stagnated at round-off level. 0 disables the exit.
  int stagnation_patience = 3;
  /// A stagnated iteration only counts as converged if its smallest update is
  /// below stagnation_ceiling · max(1, ‖γ‖∞).
  double stagnation_ceiling = 1e-12;

  void validate() const {
    if (!(tol > 0.0)) throw InvalidArgument("IterationConfig: tol must be > 0");
    if (max_iter < 1) throw InvalidArgument("IterationConfig: max_iter must be >= 1");
    if (inner_iter < 1) throw InvalidArgument("IterationConfig: inner_iter must be >= 1");
    if (stagnation_patience < 0) {
      throw InvalidArgument("IterationConfig: stagnation_patience must be >= 0");
    }
  }
};

struct IterationStats {
  int outer_count = 0;   ///< sweeps; each costs one k-stage force evaluation
  int inner_count = 0;   ///< blended inner iterations
  int corrections = 0;   ///< sweeps whose update exceeded tol
  int force_sweeps = 0;  ///< k-stage force evaluations, including the initial guess
  bool converged = false;
  bool stagnated = false;
  double final_update_norm = std::numeric_limits<double>::infinity();
  /// tol, or the round-off level at which a stagnated iteration stopped.
  double effective_tol = 0.0;
  int factorization_dim = 0;  ///< size of the largest matrix factorized

  IterationStats& operator+=(const IterationStats& o) {
    outer_count += o.outer_count;
    inner_count += o.inner_count;
    corrections += o.corrections;
    force_sweeps += o.force_sweeps;
    factorization_dim = std::max(factorization_dim, o.factorization_dim);
    return *this;
  }
};

/// Evaluate f at each of the k blocks of a stage vector.
inline Vector evaluate_stages(const ForceFn& f, const Vector& v, Eigen::Index d) {
  const Eigen::Index k = v.size() / d;
  Vector out(v.size());
  for (Eigen::Index l = 0; l < k; ++l) {
    out.segment(l * d, d) = f(v.segment(l * d, d));
  }
  return out;
}

/// The linear maps of one step. The blended parts (θ, M̃, J) exist only when
/// a Jacobian J₀ is supplied.
class BlendedOperators {
public:
  BlendedOperators(const MethodCoefficients& coeffs, double h, const Vector& q0,
                   const Vector& qp0, std::optional<Matrix> J0 = std::nullopt)
      : coeffs_(&coeffs), h_(h), d_(q0.size()), J0_(std::move(J0)) {
    if (!(h > 0.0)) throw InvalidArgument("BlendedOperators: h must be > 0");
    if (qp0.size() != d_) throw InvalidArgument("BlendedOperators: q0/q0' size mismatch");
    const int k = coeffs.k;
    gamma_mat_ = coeffs.P.transpose() * coeffs.Omega;
    upsilon_.resize(k * d_);
    for (int l = 0; l < k; ++l) {
      upsilon_.segment(l * d_, d_) = q0 + h * coeffs.c[l] * qp0;
    }
    if (J0_) {
      if (J0_->rows() != d_ || J0_->cols() != d_) {
        throw InvalidArgument("BlendedOperators: J0 must be d×d");
      }
      J_ = coeffs.rho2 * h * h * (*J0_);
      const Matrix n = Matrix::Identity(d_, d_) - J_;
      theta_lu_ = n.partialPivLu();
      if (!(theta_lu_.rcond() > 16 * std::numeric_limits<double>::epsilon())) {
        throw SingularMatrixError("I - rho^2 h^2 J0 is singular", h);
      }
    }
  }

  const MethodCoefficients& coeffs() const { return *coeffs_; }
  double h() const { return h_; }
  Eigen::Index d() const { return d_; }
  int r() const { return coeffs_->r; }
  int k() const { return coeffs_->k; }
  bool has_jacobian() const { return J0_.has_value(); }
  const Matrix& J0() const { return require_jacobian(), *J0_; }
  /// ρ²h²J₀
  const Matrix& J_scaled() const { return require_jacobian(), J_; }

  /// Υ = u⊗q₀ + h c⊗q₀'
  const Vector& upsilon() const { return upsilon_; }

  /// Γ: stage-block vector ↦ (PᵀΩ ⊗ I_d) f
  Vector gamma_map(const Vector& fv) const { return kron_identity_apply(gamma_mat_, fv, d_); }

  /// Θ: γ ↦ h²(L ⊗ I_d) γ
  Vector theta_map(const Vector& gamma) const {
    return h_ * h_ * kron_identity_apply(coeffs_->L, gamma, d_);
  }

  /// v = Υ + Θγ
  Vector stages(const Vector& gamma) const { return upsilon_ + theta_map(gamma); }

  /// Λ: η ↦ ρ²(X⁻¹ ⊗ I_d) η
  Vector lambda(const Vector& eta) const {
    return coeffs_->rho2 * kron_identity_apply(coeffs_->X_inv, eta, d_);
  }

  /// θ = I_r ⊗ (I_d − ρ²h²J₀)⁻¹ applied blockwise.
  Vector theta_solve(const Vector& w) const {
    require_jacobian();
    return flatten(theta_lu_.solve(Matrix(as_blocks(w, d_))));
  }

  /// M̃Δ = θ(I − h²X⊗J₀)Δ + (I − θ)(Λ − I_r⊗J)Δ
  Vector apply_M_tilde(const Vector& delta) const {
    require_jacobian();
    const auto D = as_blocks(delta, d_);
    const Matrix a = D - h_ * h_ * (*J0_) * D * coeffs_->X.transpose();
    const Matrix b = coeffs_->rho2 * D * coeffs_->X_inv.transpose() - J_ * D;
    const Vector bv = flatten(b);
    return bv + theta_solve(flatten(a) - bv);
  }

private:
  void require_jacobian() const {
    if (!J0_) throw InvalidArgument("BlendedOperators: operation requires a Jacobian J0");
  }

  const MethodCoefficients* coeffs_;
  double h_;
  Eigen::Index d_;
  std::optional<Matrix> J0_;
  Matrix gamma_mat_;
  Vector upsilon_;
  Matrix J_;
  Eigen::PartialPivLU<Matrix> theta_lu_;
};

struct ResidualEval {
  Vector F;   ///< F(γ)
  Vector v;   ///< stage vector Υ + Θγ
  Vector fv;  ///< f at each stage
};

/// F(γ) together with the stages and force values it was built from.
inline ResidualEval residual(const Vector& gamma, const BlendedOperators& ops, const ForceFn& f) {
  ResidualEval out;
  out.v = ops.stages(gamma);
  out.fv = evaluate_stages(f, out.v, ops.d());
  out.F = gamma - ops.gamma_map(out.fv);
  return out;
}

struct IterationResult {
  Vector gamma;
  IterationStats stats;
};

namespace detail {

/// Shared stopping logic: update norm ≤ tol, or stagnation at round-off level.
class UpdateMonitor {
public:
  explicit UpdateMonitor(const IterationConfig& cfg) : cfg_(cfg) {}

  enum class Status { Continue, Converged, Failed };

  Status record(const Vector& update, const Vector& gamma, IterationStats& stats) {
    const double norm = update.lpNorm<Eigen::Infinity>();
    stats.final_update_norm = norm;
    if (!std::isfinite(norm) || !gamma.allFinite()) return Status::Failed;
    if (norm <= cfg_.tol) {
      stats.converged = true;
      stats.effective_tol = cfg_.tol;
      return Status::Converged;
    }
    ++stats.corrections;
    if (norm < best_) {
      best_ = norm;
      best_scale_ = std::max(1.0, gamma.lpNorm<Eigen::Infinity>());
      stall_ = 0;
      recent_max_ = norm;
    } else {
      ++stall_;
      recent_max_ = std::max(recent_max_, norm);
    }
    if (cfg_.stagnation_patience > 0 && stall_ >= cfg_.stagnation_patience) {
      if (best_ <= cfg_.stagnation_ceiling * best_scale_ &&
          recent_max_ <= cfg_.stagnation_ceiling * best_scale_) {
        stats.converged = true;
        stats.stagnated = true;
        stats.effective_tol = recent_max_;
        return Status::Converged;
      }
    }
    return Status::Continue;
  }

private:
  const IterationConfig& cfg_;
  double best_ = std::numeric_limits<double>::infinity();
  double best_scale_ = 1.0;
  double recent_max_ = 0.0;
  int stall_ = 0;
};

}  // namespace detail

/// γ⁰ = Γ f(Υ)
inline Vector initial_guess(const BlendedOperators& ops, const ForceFn& f, IterationStats& stats) {
  ++stats.force_sweeps;
  return ops.gamma_map(evaluate_stages(f, ops.upsilon(), ops.d()));
}

/// γ^{m+1} = Γ f(Υ + Θγ^m)
inline IterationResult fixed_point_solve(const BlendedOperators& ops, const ForceFn& f,
                                         const IterationConfig& cfg) {
  cfg.validate();
  IterationResult res;
  res.stats.effective_tol = cfg.tol;
  res.gamma = initial_guess(ops, f, res.stats);
  detail::UpdateMonitor monitor(cfg);
  for (int m = 0; m < cfg.max_iter; ++m) {
    Vector next = ops.gamma_map(evaluate_stages(f, ops.stages(res.gamma), ops.d()));
    ++res.stats.force_sweeps;
    ++res.stats.outer_count;
    const Vector update = next - res.gamma;
    res.gamma = std::move(next);
    if (monitor.record(update, res.gamma, res.stats) != detail::UpdateMonitor::Status::Continue) {
      break;
    }
  }
  return res;
}

/// [I − h² C ⊗ J₀] Δᵐ = −F(γᵐ), γ^{m+1} = γᵐ + Δᵐ. The rd×rd matrix is
/// factorized once.
inline IterationResult simplified_newton_solve(const BlendedOperators& ops, const ForceFn& f,
                                               const Matrix& J0, const Matrix& core,
                                               const IterationConfig& cfg) {
  cfg.validate();
  const Eigen::Index d = ops.d();
  const int r = ops.r();
  if (core.rows() != r || core.cols() != r) {
    throw InvalidArgument("simplified_newton_solve: core must be r×r");
  }
  if (J0.rows() != d || J0.cols() != d) {
    throw InvalidArgument("simplified_newton_solve: J0 must be d×d");
  }
  const double h = ops.h();
  const Matrix newton = Matrix::Identity(r * d, r * d) - h * h * kron(core, J0);
  Eigen::PartialPivLU<Matrix> lu(newton);
  if (!(lu.rcond() > 16 * std::numeric_limits<double>::epsilon())) {
    throw SingularMatrixError("simplified Newton matrix I - h^2 C (x) J0 is singular", h);
  }

  IterationResult res;
  res.stats.effective_tol = cfg.tol;
  res.stats.factorization_dim = static_cast<int>(r * d);
  res.gamma = initial_guess(ops, f, res.stats);
  detail::UpdateMonitor monitor(cfg);
  for (int m = 0; m < cfg.max_iter; ++m) {
    const ResidualEval ev = residual(res.gamma, ops, f);
    ++res.stats.force_sweeps;
    ++res.stats.outer_count;
    const Vector delta = lu.solve(-ev.F);
    const Vector next = res.gamma + delta;
    const Vector update = next - res.gamma;
    res.gamma = next;
    if (monitor.record(update, res.gamma, res.stats) != detail::UpdateMonitor::Status::Continue) {
      break;
    }
  }
  return res;
}

/// Blended iteration. BlendedSingleInner performs
///   Δˡ = θ(η₂ˡ + θ(η₁ˡ − η₂ˡ));
/// BlendedOuterInner runs cfg.inner_iter sweeps of
///   Δ^{l,j+1} = Δ^{l,j} − θ(M̃Δ^{l,j} − η₂ˡ − θ(η₁ˡ − η₂ˡ)),  Δ^{l,0} = 0.
inline IterationResult blended_solve(const BlendedOperators& ops, const ForceFn& f,
                                     const IterationConfig& cfg) {
  cfg.validate();
  if (cfg.scheme != IterationScheme::BlendedOuterInner &&
      cfg.scheme != IterationScheme::BlendedSingleInner) {
    throw InvalidArgument("blended_solve: scheme must be one of the blended schemes");
  }
  if (!ops.has_jacobian()) throw InvalidArgument("blended_solve: operators need J0");
  const bool single = cfg.scheme == IterationScheme::BlendedSingleInner;

  IterationResult res;
  res.stats.effective_tol = cfg.tol;
  res.stats.factorization_dim = static_cast<int>(ops.d());
  res.gamma = initial_guess(ops, f, res.stats);
  detail::UpdateMonitor monitor(cfg);
  for (int l = 0; l < cfg.max_iter; ++l) {
    const ResidualEval ev = residual(res.gamma, ops, f);
    ++res.stats.force_sweeps;
    ++res.stats.outer_count;
    const Vector eta1 = -ev.F;
    const Vector eta2 = ops.lambda(eta1);
    const Vector blend = ops.theta_solve(eta1 - eta2);
    Vector delta;
    if (single) {
      delta = ops.theta_solve(eta2 + blend);
      ++res.stats.inner_count;
    } else {
      delta = Vector::Zero(eta1.size());
      for (int j = 0; j < cfg.inner_iter; ++j) {
        delta = delta - ops.theta_solve(ops.apply_M_tilde(delta) - eta2 - blend);
        ++res.stats.inner_count;
      }
    }
    const Vector next = res.gamma + delta;
    const Vector update = next - res.gamma;
    res.gamma = next;
    if (monitor.record(update, res.gamma, res.stats) != detail::UpdateMonitor::Status::Continue) {
      break;
    }
  }
  return res;
}

/// Dispatch on cfg.scheme. `core` is only used by SimplifiedNewton.
inline IterationResult solve_gamma(const BlendedOperators& ops, const ForceFn& f,
                                   const Matrix& core, const IterationConfig& cfg) {
  switch (cfg.scheme) {
    case IterationScheme::FixedPoint: return fixed_point_solve(ops, f, cfg);
    case IterationScheme::SimplifiedNewton:
      return simplified_newton_solve(ops, f, ops.J0(), core, cfg);
    case IterationScheme::BlendedOuterInner:
    case IterationScheme::BlendedSingleInner: return blended_solve(ops, f, cfg);
  }
  throw InvalidArgument("solve_gamma: unknown scheme");
}

/// Iteration matrix I − θM̃ of the blended scheme on q'' = −μ²q with
/// nu2 = (hμ)², for a given blending parameter.
inline Matrix blended_iteration_matrix(const MethodCoefficients& coeffs, double nu2) {
  const Vector zero = Vector::Zero(1);
  const BlendedOperators ops(coeffs, 1.0, zero, zero, Matrix::Constant(1, 1, -nu2));
  const int r = coeffs.r;
  Matrix z(r, r);
  for (int i = 0; i < r; ++i) {
    const Vector e = Vector::Unit(r, i);
    z.col(i) = e - ops.theta_solve(ops.apply_M_tilde(e));
  }
  return z;
}

/// Spectral radius of the blended iteration on the scalar test equation,
/// using ρ² = rho2 (defaults to the minimum eigenvalue modulus of X).
inline double blended_spectral_radius(int r, double nu2, std::optional<double> rho2 = std::nullopt) {
  if (r < 2) throw InvalidArgument("blended_spectral_radius: r must be >= 2");
  if (!(nu2 >= 0.0)) throw InvalidArgument("blended_spectral_radius: nu2 must be >= 0");
  MethodCoefficients coeffs = build_coefficients(r + 1, r);
  if (rho2) coeffs.rho2 = *rho2;
  return spectral_radius(blended_iteration_matrix(coeffs, nu2));
}

}  // namespace rknfc
