#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <stdexcept>

namespace expprod {

template <class Scalar>
using DenseMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// [a, b] = ab - ba
template <class DerivedA, class DerivedB>
auto commutator(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  DenseMatrix<Scalar> out = a * b - b * a;
  return out;
}

/// Inner derivation applied k times: delta_A^k X = [A, [A, ... [A, X]]].
template <class DerivedA, class DerivedX>
auto inner_derivation(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedX>& x, int k = 1) {
  using Scalar = typename DerivedA::Scalar;
  DenseMatrix<Scalar> out = x;
  for (int j = 0; j < k; ++j) out = commutator(a, out);
  return out;
}

/// Directional derivative of the matrix exponential at `a` along `da`.
///
/// exp([[A, dA], [0, A]]) = [[exp(A), L(A, dA)], [0, exp(A)]], so the
/// upper-right block of the doubled-dimension exponential is the answer.
template <class DerivedA, class DerivedD>
auto frechet_exp(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedD>& da) {
  using Scalar = typename DerivedA::Scalar;
  if (a.rows() != a.cols() || da.rows() != da.cols() || a.rows() != da.rows())
    throw std::invalid_argument("frechet_exp: A and dA must be square of equal size");
  const Eigen::Index n = a.rows();
  DenseMatrix<Scalar> block = DenseMatrix<Scalar>::Zero(2 * n, 2 * n);
  block.topLeftCorner(n, n) = a;
  block.topRightCorner(n, n) = da;
  block.bottomRightCorner(n, n) = a;
  DenseMatrix<Scalar> e = block.exp();
  DenseMatrix<Scalar> out = e.topRightCorner(n, n);
  return out;
}

}  // namespace expprod
