#pragma once

// Thin wrappers over the LAPACK kernels the dense solvers rely on.

#include <optional>

#include "lumpcheck/core.hpp"

namespace lumpcheck::detail {

struct RealSchurForm {
  Matrix T;  // quasi upper triangular
  Matrix U;  // orthogonal, A = U T U^T
  Eigen::VectorXcd eigenvalues;
};

RealSchurForm real_schur(Matrix A);

/// Solves T1 X + X T2^T = Q for quasi-triangular T1, T2.
Matrix solve_quasi_triangular_sylvester(const Matrix& T1, const Matrix& T2, Matrix Q,
                                        bool* exact = nullptr);

/// Solves T X + X T^T = Q for quasi-triangular T. Returns false in `exact`
/// when LAPACK had to perturb nearly coincident eigenvalues.
Matrix solve_quasi_triangular_lyapunov(const Matrix& T, Matrix Q, bool* exact = nullptr);

struct SymmetricDefiniteEigen {
  Vector eigenvalues;  // ascending
  Matrix vectors;      // M-orthonormal columns
};

/// K phi = lambda M phi with K symmetric and M symmetric positive definite.
SymmetricDefiniteEigen symmetric_definite_eigen(Matrix K, Matrix M);

struct ProjectedEigen {
  Vector eigenvalues;  // ascending
  Matrix projected;    // rows * Phi
};

/// Banded K phi = lambda M phi (half bandwidth kd) returning only rows * Phi
/// for M-orthonormal Phi. Eigenvalues come from the band reduction, vectors
/// from inverse iteration on the banded pencil, so the cost is
/// O(n^2 (kd^2 + rows)). nullopt when an eigenvector fails its residual test.
std::optional<ProjectedEigen> banded_definite_eigen(const SparseMatrix& K, const SparseMatrix& M, Index kd,
                                     const Matrix& rows);

}  // namespace lumpcheck::detail
