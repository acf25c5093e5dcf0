#pragma once

// Collocation matrices of the RKN-type Fourier collocation method, the
// Butcher tableau they induce, and structural diagnostics (determinant
// recursion, spectrum, fundamental/silent stage split).

#include <algorithm>
#include <complex>
#include <cstdio>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "legendre.hpp"

namespace rknfc {

/// Everything the integrator needs for a given (k, r, quadrature rule).
///
/// Index conventions: row i of L and P is stage i (0-based), column j is the
/// polynomial index j = 0..r-1.
struct MethodCoefficients {
  int k = 0;
  int r = 0;
  QuadratureRule rule;
  Eigen::MatrixXd L;      ///< k×r, L(i,j) = ∫₀^{c_i} P̂_j(x)(c_i − x) dx
  Eigen::MatrixXd P;      ///< k×r, P(i,j) = P̂_j(c_i)
  Eigen::MatrixXd P_ext;  ///< k×(r+2)
  Eigen::MatrixXd Omega;  ///< k×k, diag(b)
  Eigen::MatrixXd X;      ///< r×r
  Eigen::MatrixXd Xhat;   ///< (r+2)×r, X stacked over the two closing rows
  Eigen::MatrixXd X_inv;  ///< r×r
  double rho2 = 0.0;      ///< min |λ(X)|
  Eigen::MatrixXd A_bar;  ///< k×k
  Eigen::VectorXd b_bar;  ///< (1 − c_l) b_l
  Eigen::VectorXd b;      ///< quadrature weights
  Eigen::VectorXd c;      ///< quadrature nodes
};

/// The (r+2)×r matrix expressing ∫₀^x P̂_j(t)(x − t) dt, j < r, in the basis
/// P̂_0..P̂_{r+1}. Column j is read off the double integration recurrence.
inline Eigen::MatrixXd build_Xhat(int r) {
  if (r < 2) {
    throw InvalidArgument("build_Xhat: r must be >= 2, got " + std::to_string(r));
  }
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(r + 2, r);
  const double x1 = xi(1);
  H(0, 0) = 0.25 - x1 * x1;
  H(1, 0) = x1 / 2.0;
  H(2, 0) = x1 * xi(2);
  H(0, 1) = -x1 / 2.0;
  H(1, 1) = -x1 * x1 - xi(2) * xi(2);
  H(3, 1) = xi(2) * xi(3);
  for (int j = 2; j < r; ++j) {
    H(j - 2, j) = xi(j - 1) * xi(j);
    H(j, j) = -xi(j) * xi(j) - xi(j + 1) * xi(j + 1);
    H(j + 2, j) = xi(j + 1) * xi(j + 2);
  }
  return H;
}

/// X_{r,r}: the leading r×r block of build_Xhat(r).
inline Eigen::MatrixXd build_X(int r) {
  if (r < 2) {
    throw InvalidArgument("build_X: r must be >= 2, got " + std::to_string(r));
  }
  return build_Xhat(r).topRows(r);
}

/// det(X_{r,r}) through the two-term recursion on even/odd orders.
inline double det_recursion(int r) {
  if (r < 1) {
    throw InvalidArgument("det_recursion: r must be >= 1, got " + std::to_string(r));
  }
  double s = 0.25 - xi(1) * xi(1);
  for (int m = 2; m <= r; ++m) {
    double prod = (m % 2 == 0) ? 1.0 : 0.25;
    // even m: ξ₁⁴ξ₃⁴…ξ_{m−1}⁴; odd m: ¼ ξ₂⁴ξ₄⁴…ξ_{m−1}⁴
    for (int i = (m % 2 == 0) ? 1 : 2; i < m; i += 2) {
      const double x2 = xi(i) * xi(i);
      prod *= x2 * x2;
    }
    s = -xi(m) * xi(m) * s + prod;
  }
  return s;
}

/// Eigenvalues of a real square matrix, sorted by real part then imaginary part.
inline std::vector<std::complex<double>> sorted_eigenvalues(const Eigen::MatrixXd& m) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(m, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success) {
    throw std::runtime_error("sorted_eigenvalues: eigen decomposition failed");
  }
  std::vector<std::complex<double>> ev(es.eigenvalues().begin(), es.eigenvalues().end());
  std::sort(ev.begin(), ev.end(), [](const auto& a, const auto& b) {
    if (a.real() != b.real()) return a.real() < b.real();
    return a.imag() < b.imag();
  });
  return ev;
}

inline double spectral_radius(const Eigen::MatrixXd& m) {
  double out = 0.0;
  for (const auto& l : sorted_eigenvalues(m)) out = std::max(out, std::abs(l));
  return out;
}

/// min |λ| over the spectrum of a square matrix.
inline double min_eigenvalue_modulus(const Eigen::MatrixXd& m) {
  const auto ev = sorted_eigenvalues(m);
  double out = std::abs(ev.front());
  for (const auto& l : ev) out = std::min(out, std::abs(l));
  return out;
}

/// Blending parameter ρ² = min |λ(X_{r,r})|.
inline double rho_squared(int r) { return min_eigenvalue_modulus(build_X(r)); }

/// Assemble all method matrices. L is formed as P_ext · Xhat.
inline MethodCoefficients build_coefficients(int k, int r, const QuadratureRule& rule) {
  if (r < 2 || r > k) {
    throw InvalidArgument("build_coefficients: need 2 <= r <= k, got k=" + std::to_string(k) +
                          ", r=" + std::to_string(r));
  }
  if (rule.k() != k || rule.b.size() != k) {
    throw InvalidArgument("build_coefficients: rule has " + std::to_string(rule.k()) +
                          " nodes, expected k=" + std::to_string(k));
  }
  MethodCoefficients m;
  m.k = k;
  m.r = r;
  m.rule = rule;
  m.c = rule.c;
  m.b = rule.b;
  m.P_ext.resize(k, r + 2);
  for (int i = 0; i < k; ++i) {
    m.P_ext.row(i) = legendre_values(r + 1, rule.c[i]).transpose();
  }
  m.P = m.P_ext.leftCols(r);
  m.Omega = rule.b.asDiagonal();
  m.Xhat = build_Xhat(r);
  m.X = m.Xhat.topRows(r);
  m.X_inv = m.X.partialPivLu().inverse();
  m.rho2 = min_eigenvalue_modulus(m.X);
  m.L = m.P_ext * m.Xhat;
  m.A_bar = m.L * m.P.transpose() * m.Omega;
  m.b_bar = (Eigen::VectorXd::Ones(k) - rule.c).cwiseProduct(rule.b);
  return m;
}

inline MethodCoefficients build_coefficients(int k, int r) {
  return build_coefficients(k, r, gauss_legendre_rule(k));
}

/// Pᵀ Ω L, the r×r matrix of the simplified Newton system. Equal to X when
/// k > r and the rule is exact to degree 2k − 1.
inline Eigen::MatrixXd newton_core_matrix(const MethodCoefficients& m) {
  return m.P.transpose() * m.Omega * m.L;
}

/// Split of the stages into r fundamental and k − r silent ones.
struct StagePartition {
  std::vector<int> fundamental_indices;
  std::vector<int> silent_indices;
  Eigen::MatrixXd A1;       ///< (k−r)×r, L⁽²⁾(L⁽¹⁾)⁻¹
  Eigen::MatrixXd B1;       ///< r×r, L⁽¹⁾P⁽¹⁾ᵀΩ⁽¹⁾
  Eigen::MatrixXd B2;       ///< r×(k−r), L⁽¹⁾P⁽²⁾ᵀΩ⁽²⁾
  Eigen::MatrixXd C_tilde;  ///< B1 + B2·A1
  double condition_number = 0.0;  ///< 2-norm condition number of C_tilde
};

inline double condition_number(const Eigen::MatrixXd& m) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& s = svd.singularValues();
  if (s[s.size() - 1] == 0.0) return std::numeric_limits<double>::infinity();
  return s[0] / s[s.size() - 1];
}

/// Reduce the stage system to the fundamental stages. Indices are 0-based.
/// Throws SingularMatrixError if the fundamental block of L is singular.
inline StagePartition silent_stage_split(const MethodCoefficients& m,
                                         const std::vector<int>& fundamental) {
  const int k = m.k;
  const int r = m.r;
  if (static_cast<int>(fundamental.size()) != r) {
    throw InvalidArgument("silent_stage_split: expected " + std::to_string(r) +
                          " fundamental indices, got " + std::to_string(fundamental.size()));
  }
  std::vector<bool> taken(k, false);
  for (int idx : fundamental) {
    if (idx < 0 || idx >= k || taken[idx]) {
      throw InvalidArgument("silent_stage_split: invalid or repeated stage index " +
                            std::to_string(idx));
    }
    taken[idx] = true;
  }
  StagePartition part;
  part.fundamental_indices = fundamental;
  for (int i = 0; i < k; ++i) {
    if (!taken[i]) part.silent_indices.push_back(i);
  }
  const int s = k - r;

  Eigen::MatrixXd L1(r, r), P1(r, r), L2(s, r), P2(s, r);
  Eigen::VectorXd w1(r), w2(s);
  for (int a = 0; a < r; ++a) {
    const int i = fundamental[a];
    L1.row(a) = m.L.row(i);
    P1.row(a) = m.P.row(i);
    w1[a] = m.b[i];
  }
  for (int a = 0; a < s; ++a) {
    const int i = part.silent_indices[a];
    L2.row(a) = m.L.row(i);
    P2.row(a) = m.P.row(i);
    w2[a] = m.b[i];
  }

  Eigen::FullPivLU<Eigen::MatrixXd> lu(L1);
  if (!lu.isInvertible()) {
    throw SingularMatrixError("silent_stage_split: fundamental block of L is singular", 0.0);
  }
  // A1 = L2 L1⁻¹  <=>  L1ᵀ A1ᵀ = L2ᵀ
  part.A1 = s > 0 ? Eigen::MatrixXd(L1.transpose().fullPivLu().solve(L2.transpose()).transpose())
                  : Eigen::MatrixXd(0, r);
  part.B1 = L1 * P1.transpose() * w1.asDiagonal();
  part.B2 = L1 * P2.transpose() * w2.asDiagonal();
  part.C_tilde = part.B1 + part.B2 * part.A1;
  part.condition_number = condition_number(part.C_tilde);
  return part;
}

// ---------------------------------------------------------------------------
// Plain-text matrix format
//
//   matrix <name> <rows> <cols>
//   <row 0 values, space separated, 17 significant digits>
//   ...
//
// Lines starting with '#' are comments. Vectors are written as 1×n matrices.

inline void write_matrix(std::ostream& os, const std::string& name, const Eigen::MatrixXd& m) {
  os << "matrix " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
  char buf[64];
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
      os << (j ? " " : "") << buf;
    }
    os << '\n';
  }
}

inline std::map<std::string, Eigen::MatrixXd> read_matrices(std::istream& is) {
  std::map<std::string, Eigen::MatrixXd> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream hdr(line);
    std::string tag, name;
    Eigen::Index rows = 0, cols = 0;
    if (!(hdr >> tag >> name >> rows >> cols) || tag != "matrix" || rows < 0 || cols < 0) {
      throw InvalidArgument("read_matrices: malformed header '" + line + "'");
    }
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      if (!std::getline(is, line)) {
        throw InvalidArgument("read_matrices: truncated matrix " + name);
      }
      std::istringstream row(line);
      for (Eigen::Index j = 0; j < cols; ++j) {
        if (!(row >> m(i, j))) {
          throw InvalidArgument("read_matrices: bad row " + std::to_string(i) + " of " + name);
        }
      }
    }
    out.emplace(name, std::move(m));
  }
  return out;
}

/// All coefficient matrices of a method in the text format.
inline void dump_coefficients(std::ostream& os, const MethodCoefficients& m) {
  os << "# rknfc method coefficients k=" << m.k << " r=" << m.r << '\n';
  write_matrix(os, "c", m.c.transpose());
  write_matrix(os, "b", m.b.transpose());
  write_matrix(os, "b_bar", m.b_bar.transpose());
  write_matrix(os, "L", m.L);
  write_matrix(os, "P", m.P);
  write_matrix(os, "P_ext", m.P_ext);
  write_matrix(os, "Omega", m.Omega);
  write_matrix(os, "X", m.X);
  write_matrix(os, "Xhat", m.Xhat);
  write_matrix(os, "A_bar", m.A_bar);
  write_matrix(os, "rho2", Eigen::MatrixXd::Constant(1, 1, m.rho2));
}

}  // namespace rknfc
