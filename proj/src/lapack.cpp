#include "lapack.hpp"

#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

namespace lumpcheck::detail {

RealSchurForm real_schur(Matrix A) {
  const auto n = static_cast<lapack_int>(A.rows());
  RealSchurForm out;
  out.U.resize(n, n);
  Vector wr(n), wi(n);
  lapack_int sdim = 0;
  if (n == 0) return out;
  const lapack_int info = LAPACKE_dgees(LAPACK_COL_MAJOR, 'V', 'N', nullptr, n, A.data(),
                                        n, &sdim, wr.data(), wi.data(), out.U.data(), n);
  if (info != 0) {
    throw Error("real Schur decomposition failed (dgees info " + std::to_string(info) +
                ")");
  }
  out.T = std::move(A);
  out.eigenvalues.resize(n);
  for (lapack_int i = 0; i < n; ++i) out.eigenvalues(i) = Complex(wr(i), wi(i));
  return out;
}

Matrix solve_quasi_triangular_sylvester(const Matrix& T1, const Matrix& T2, Matrix Q,
                                        bool* exact) {
  const auto n1 = static_cast<lapack_int>(T1.rows());
  const auto n2 = static_cast<lapack_int>(T2.rows());
  if (n1 == 0 || n2 == 0) return Q;
  double scale = 1.0;
  const lapack_int info = LAPACKE_dtrsyl(LAPACK_COL_MAJOR, 'N', 'T', 1, n1, n2, T1.data(), n1,
                                         T2.data(), n2, Q.data(), n1, &scale);
  if (info < 0) {
    throw Error("triangular Sylvester solve failed (dtrsyl info " +
                std::to_string(info) + ")");
  }
  if (exact) *exact = (info == 0);
  if (scale != 1.0) Q /= scale;
  return Q;
}

Matrix solve_quasi_triangular_lyapunov(const Matrix& T, Matrix Q, bool* exact) {
  return solve_quasi_triangular_sylvester(T, T, std::move(Q), exact);
}

SymmetricDefiniteEigen symmetric_definite_eigen(Matrix K, Matrix M) {
  const auto n = static_cast<lapack_int>(K.rows());
  SymmetricDefiniteEigen out;
  out.eigenvalues.resize(n);
  if (n == 0) return out;
  const lapack_int info = LAPACKE_dsygvd(LAPACK_COL_MAJOR, 1, 'V', 'L', n, K.data(), n,
                                         M.data(), n, out.eigenvalues.data());
  if (info != 0) {
    throw Error("symmetric-definite eigensolver failed (dsygvd info " +
                std::to_string(info) + ")");
  }
  out.vectors = std::move(K);
  return out;
}

namespace {

// LAPACK lower band storage: ab[(i - j) + j * (kd + 1)] = X(i, j) for i >= j.
std::vector<double> lower_band(const SparseMatrix& X, Index kd) {
  std::vector<double> ab(static_cast<std::size_t>((kd + 1) * X.cols()), 0.0);
  for (Index j = 0; j < X.outerSize(); ++j) {
    for (SparseMatrix::InnerIterator it(X, j); it; ++it) {
      const Index i = it.row();
      if (i < j) continue;
      if (i - j > kd) throw Error("matrix entry outside the declared band");
      ab[static_cast<std::size_t>((i - j) + j * (kd + 1))] += it.value();
    }
  }
  return ab;
}

void check_info(lapack_int info, const char* routine) {
  if (info != 0) {
    throw Error(std::string("banded eigensolver failed (") + routine + " info " +
                std::to_string(info) + ")");
  }
}

}  // namespace

std::optional<ProjectedEigen> banded_definite_eigen(const SparseMatrix& K, const SparseMatrix& M,
                                                   Index kd, const Matrix& rows) {
  const auto n = static_cast<lapack_int>(K.rows());
  ProjectedEigen out;
  out.eigenvalues.resize(n);
  out.projected.resize(rows.rows(), n);
  if (n == 0) return out;
  const auto k = static_cast<lapack_int>(kd);
  const lapack_int ld = k + 1;

  // Eigenvalues: split Cholesky, band to tridiagonal, root-free QR.
  {
    std::vector<double> ab = lower_band(K, kd), bb = lower_band(M, kd);
    lapack_int info = LAPACKE_dpbstf(LAPACK_COL_MAJOR, 'L', n, k, bb.data(), ld);
    if (info > 0) throw Error("mass matrix is not positive definite (dpbstf)");
    check_info(info, "dpbstf");
    check_info(LAPACKE_dsbgst(LAPACK_COL_MAJOR, 'N', 'L', n, k, k, ab.data(), ld, bb.data(), ld,
                              nullptr, 1),
               "dsbgst");
    Vector e(std::max<lapack_int>(n, 1));
    check_info(LAPACKE_dsbtrd(LAPACK_COL_MAJOR, 'N', 'L', n, k, ab.data(), ld,
                              out.eigenvalues.data(), e.data(), nullptr, 1),
               "dsbtrd");
    check_info(LAPACKE_dsterf(n, out.eigenvalues.data(), e.data()), "dsterf");
  }

  // Eigenvectors one at a time by inverse iteration on the banded pencil
  // K - sigma M, M-orthogonalized within clusters. Tridiagonal pencils use
  // the tridiagonal LU, wider bands the general band LU.
  const double scale = std::max(out.eigenvalues.cwiseAbs().maxCoeff(), 1e-300);
  const double k_norm = K.norm(), m_norm = M.norm();
  const bool tridiagonal = k <= 1;
  const lapack_int kl = k, ku = k, ldg = 3 * k + 1;
  std::vector<double> kb, mb, gb;  // band of K, M and K - sigma M in the LU layout
  std::vector<double> kd0(n), kd1(n), md0(n), md1(n), dl(n), dd(n), du(n), du2(n);
  if (tridiagonal) {
    for (Index j = 0; j < n; ++j) {
      kd0[j] = K.coeff(j, j);
      md0[j] = M.coeff(j, j);
      if (j + 1 < n) {
        kd1[j] = K.coeff(j + 1, j);
        md1[j] = M.coeff(j + 1, j);
      }
    }
  } else {
    kb.assign(static_cast<std::size_t>(ldg * n), 0.0);
    mb = kb;
    gb = kb;
    for (Index j = 0; j < n; ++j) {
      for (SparseMatrix::InnerIterator it(K, j); it; ++it) {
        kb[static_cast<std::size_t>(kl + ku + it.row() - j + j * ldg)] += it.value();
      }
      for (SparseMatrix::InnerIterator it(M, j); it; ++it) {
        mb[static_cast<std::size_t>(kl + ku + it.row() - j + j * ldg)] += it.value();
      }
    }
  }
  std::vector<lapack_int> ipiv(n);
  auto factor = [&](double sigma) {
    if (tridiagonal) {
      for (lapack_int j = 0; j < n; ++j) {
        dd[j] = kd0[j] - sigma * md0[j];
        if (j + 1 < n) dl[j] = du[j] = kd1[j] - sigma * md1[j];
      }
      return LAPACKE_dgttrf(n, dl.data(), dd.data(), du.data(), du2.data(), ipiv.data());
    }
    for (std::size_t q = 0; q < gb.size(); ++q) gb[q] = kb[q] - sigma * mb[q];
    return LAPACKE_dgbtrf(LAPACK_COL_MAJOR, n, n, kl, ku, gb.data(), ldg, ipiv.data());
  };
  auto solve = [&](Vector& x) {
    if (tridiagonal) {
      return LAPACKE_dgttrs(LAPACK_COL_MAJOR, 'N', n, 1, dl.data(), dd.data(), du.data(),
                            du2.data(), ipiv.data(), x.data(), n);
    }
    return LAPACKE_dgbtrs(LAPACK_COL_MAJOR, 'N', n, kl, ku, 1, gb.data(), ldg, ipiv.data(),
                          x.data(), n);
  };

  Vector start(n);
  std::mt19937_64 rng(20240611);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (lapack_int r = 0; r < n; ++r) start(r) = unit(rng);
  const Vector m_start = M * start;
  std::vector<Vector> cluster;
  Vector lambda_refined(n);

  for (lapack_int i = 0; i < n; ++i) {
    const double lambda = out.eigenvalues(i);
    if (i > 0 && lambda - out.eigenvalues(i - 1) > 1e-7 * scale) cluster.clear();
    double sigma = lambda;
    lapack_int info = factor(sigma);
    for (int tries = 0; info > 0 && tries < 8; ++tries) {
      sigma += 1e-13 * scale * (1 << tries);
      info = factor(sigma);
    }
    if (info != 0) return std::nullopt;

    Vector phi = start;
    if (!cluster.empty()) {
      for (lapack_int r = 0; r < n; ++r) phi(r) = unit(rng);
    }
    bool converged = false;
    for (int it = 0; it < 6 && !converged; ++it) {
      Vector x = (it == 0 && cluster.empty()) ? m_start : Vector(M * phi);
      if (solve(x) != 0) return std::nullopt;
      for (int pass = 0; pass < 2 && !cluster.empty(); ++pass) {
        for (const Vector& q : cluster) x -= q.dot(M * x) * q;
      }
      const Vector Mx = M * x;
      const double mnorm = std::sqrt(x.dot(Mx));
      if (!(mnorm > 0.0) || !std::isfinite(mnorm)) return std::nullopt;
      phi = x / mnorm;
      const Vector Kphi = K * phi;
      const double rq = phi.dot(Kphi);
      const double residual = (Kphi - (rq / mnorm) * Mx).norm();
      lambda_refined(i) = rq;
      converged = residual <= 1e-12 * (k_norm + std::abs(rq) * m_norm) &&
                  std::abs(rq - lambda) <= 1e-9 * scale;
    }
    if (!converged) return std::nullopt;
    out.projected.col(i) = rows * phi;
    cluster.push_back(std::move(phi));
  }
  out.eigenvalues = lambda_refined;
  return out;
}

}  // namespace lumpcheck::detail
