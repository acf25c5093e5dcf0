#pragma once

// Kronecker-structured products on block vectors. A block vector with n
// blocks of size d is viewed column-major as a d×n matrix, so that
// (A ⊗ B) x = vec(B · mat(x) · Aᵀ).

#include <Eigen/Dense>

namespace rknfc {

inline Eigen::Map<const Eigen::MatrixXd> as_blocks(const Eigen::VectorXd& x, Eigen::Index d) {
  return {x.data(), d, x.size() / d};
}

inline Eigen::VectorXd flatten(const Eigen::MatrixXd& m) {
  return Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
}

/// (A ⊗ I_d) x
inline Eigen::VectorXd kron_identity_apply(const Eigen::MatrixXd& a, const Eigen::VectorXd& x,
                                           Eigen::Index d) {
  return flatten(as_blocks(x, d) * a.transpose());
}

/// (A ⊗ B) x
inline Eigen::VectorXd kron_apply(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                  const Eigen::VectorXd& x) {
  return flatten(b * as_blocks(x, b.cols()) * a.transpose());
}

/// Dense A ⊗ B.
inline Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

}  // namespace rknfc
