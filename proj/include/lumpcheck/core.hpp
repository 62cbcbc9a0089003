#pragma once

#include <complex>
#include <memory>
#include <variant>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "lumpcheck/errors.hpp"

namespace lumpcheck {

using Index = Eigen::Index;
using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using ComplexMatrix = Eigen::MatrixXcd;
using SparseMatrix = Eigen::SparseMatrix<double>;

/// A system matrix held either densely or in compressed sparse column form.
/// Assembly produces sparse matrices; reduced models are dense.
class SystemMatrix {
 public:
  SystemMatrix() = default;
  SystemMatrix(Matrix dense);        // NOLINT(google-explicit-constructor)
  SystemMatrix(SparseMatrix sparse);  // NOLINT(google-explicit-constructor)

  static SystemMatrix identity(Index n, bool sparse);

  Index rows() const;
  Index cols() const;
  bool is_sparse() const { return std::holds_alternative<SparseMatrix>(data_); }

  /// Dense copy (or reference-equivalent copy when already dense).
  Matrix dense() const;
  SparseMatrix sparse() const;

  const Matrix* dense_ptr() const { return std::get_if<Matrix>(&data_); }
  const SparseMatrix* sparse_ptr() const { return std::get_if<SparseMatrix>(&data_); }

  Matrix operator*(const Matrix& x) const;
  ComplexMatrix operator*(const ComplexMatrix& x) const;

  double norm() const;  // Frobenius

 private:
  std::variant<Matrix, SparseMatrix> data_{Matrix()};
};

/// M q'' + R q' + K q = F h,  y = Cout q.
///
/// Constructed through the validating constructor: M, K and R must be square
/// of equal size and symmetric to 1e-12 relative Frobenius (they are
/// symmetrized after the check), M positive definite, K and R positive
/// semidefinite.
class SecondOrderSystem {
 public:
  SecondOrderSystem(SparseMatrix M, SparseMatrix K, SparseMatrix R, Matrix F,
                    Matrix Cout);

  Index dofs() const { return M_.rows(); }
  Index inputs() const { return F_.cols(); }
  Index outputs() const { return Cout_.rows(); }

  const SparseMatrix& M() const { return M_; }
  const SparseMatrix& K() const { return K_; }
  const SparseMatrix& R() const { return R_; }
  const Matrix& F() const { return F_; }
  const Matrix& Cout() const { return Cout_; }

  SecondOrderSystem with_input(Matrix F) const;
  SecondOrderSystem with_output(Matrix Cout) const;

 private:
  struct Trusted {};
  SecondOrderSystem(Trusted, SparseMatrix M, SparseMatrix K, SparseMatrix R,
                    Matrix F, Matrix Cout);

  SparseMatrix M_, K_, R_;
  Matrix F_, Cout_;
};

/// Descriptor system E x' = A x + B h, y = C x with E nonsingular and no
/// feedthrough.
class StateSpaceSystem {
 public:
  StateSpaceSystem(SystemMatrix E, SystemMatrix A, Matrix B, Matrix C);

  Index states() const { return A_.rows(); }
  Index inputs() const { return B_.cols(); }
  Index outputs() const { return C_.rows(); }

  const SystemMatrix& E() const { return E_; }
  const SystemMatrix& A() const { return A_; }
  const Matrix& B() const { return B_; }
  const Matrix& C() const { return C_; }

  StateSpaceSystem with_input(Matrix B) const;
  StateSpaceSystem with_output(Matrix C) const;

 private:
  SystemMatrix E_, A_;
  Matrix B_, C_;
};

/// Factorization of alpha*E + beta*A, reused across right-hand sides.
/// Dense pencils use partial-pivot LU with a reciprocal-condition check;
/// sparse pencils use SparseLU with a residual check on every solve.
template <typename Scalar>
class PencilFactorization {
 public:
  using MatrixType = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  PencilFactorization(const SystemMatrix& E, Scalar alpha, const SystemMatrix& A,
                      Scalar beta);
  ~PencilFactorization();
  PencilFactorization(PencilFactorization&&) noexcept;
  PencilFactorization& operator=(PencilFactorization&&) noexcept;

  MatrixType solve(const MatrixType& rhs) const;
  Index size() const { return n_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  Index n_ = 0;
};

extern template class PencilFactorization<double>;
extern template class PencilFactorization<Complex>;

/// Relative Frobenius asymmetry ||X - X^T|| / ||X|| (0 for the zero matrix).
double relative_asymmetry(const SparseMatrix& X);

/// E = blockdiag(I, M), A = [[0, I], [-K, -R]], B = [0; F], C = [Cout, 0].
StateSpaceSystem second_order_to_state_space(const SecondOrderSystem& sys);

/// C (sE - A)^{-1} B, one factorization and one solve per input column.
ComplexMatrix eval_transfer(const StateSpaceSystem& sys, Complex s);

/// Dense E^{-1}A and E^{-1}B, used by the small-system algorithms.
struct StandardForm {
  Matrix A;
  Matrix B;
};
StandardForm to_standard_form(const StateSpaceSystem& sys);

}  // namespace lumpcheck
