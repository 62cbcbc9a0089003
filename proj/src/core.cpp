#include "lumpcheck/core.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

namespace lumpcheck {

// ---------------------------------------------------------------- SystemMatrix

SystemMatrix::SystemMatrix(Matrix dense) : data_(std::move(dense)) {}
SystemMatrix::SystemMatrix(SparseMatrix sparse) : data_(std::move(sparse)) {
  std::get<SparseMatrix>(data_).makeCompressed();
}

SystemMatrix SystemMatrix::identity(Index n, bool sparse) {
  if (sparse) {
    SparseMatrix I(n, n);
    I.setIdentity();
    return SystemMatrix(std::move(I));
  }
  return SystemMatrix(Matrix(Matrix::Identity(n, n)));
}

Index SystemMatrix::rows() const {
  return std::visit([](const auto& m) { return m.rows(); }, data_);
}

Index SystemMatrix::cols() const {
  return std::visit([](const auto& m) { return m.cols(); }, data_);
}

Matrix SystemMatrix::dense() const {
  if (const auto* d = dense_ptr()) return *d;
  return Matrix(*sparse_ptr());
}

SparseMatrix SystemMatrix::sparse() const {
  if (const auto* s = sparse_ptr()) return *s;
  return dense_ptr()->sparseView();
}

Matrix SystemMatrix::operator*(const Matrix& x) const {
  return std::visit([&](const auto& m) -> Matrix { return m * x; }, data_);
}

ComplexMatrix SystemMatrix::operator*(const ComplexMatrix& x) const {
  return std::visit(
      [&](const auto& m) -> ComplexMatrix { return m.template cast<Complex>() * x; },
      data_);
}

double SystemMatrix::norm() const {
  return std::visit([](const auto& m) { return m.norm(); }, data_);
}

// ------------------------------------------------------------ model invariants

double relative_asymmetry(const SparseMatrix& X) {
  const double scale = X.norm();
  if (scale == 0.0) return 0.0;
  SparseMatrix Xt = X.transpose();
  return SparseMatrix(X - Xt).norm() / scale;
}

namespace {

constexpr double kSymmetryTol = 1e-12;
constexpr Index kDenseCheckLimit = 400;

SparseMatrix symmetrized(const SparseMatrix& X) {
  SparseMatrix Xt = X.transpose();
  SparseMatrix S = 0.5 * (X + Xt);
  S.prune(0.0);
  S.makeCompressed();
  return S;
}

// Smallest eigenvalue for small matrices; for large ones a shifted LDLT
// decides definiteness.
enum class Definiteness { positive, semidefinite, indefinite };

Definiteness classify(const SparseMatrix& X) {
  const double scale = X.norm();
  if (scale == 0.0) return Definiteness::semidefinite;
  const double tol = 1e-10 * scale;
  if (X.rows() <= kDenseCheckLimit) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(Matrix(X), Eigen::EigenvaluesOnly);
    const double lmin = es.eigenvalues().minCoeff();
    if (lmin > tol) return Definiteness::positive;
    if (lmin >= -tol) return Definiteness::semidefinite;
    return Definiteness::indefinite;
  }
  Eigen::SimplicialLDLT<SparseMatrix> ldlt(X);
  if (ldlt.info() == Eigen::Success && (ldlt.vectorD().array() > 0.0).all()) {
    return Definiteness::positive;
  }
  SparseMatrix I(X.rows(), X.cols());
  I.setIdentity();
  SparseMatrix shifted = X + tol * I;
  Eigen::SimplicialLDLT<SparseMatrix> ldlt2(shifted);
  if (ldlt2.info() == Eigen::Success && (ldlt2.vectorD().array() > 0.0).all()) {
    return Definiteness::semidefinite;
  }
  return Definiteness::indefinite;
}

void require_square(const SparseMatrix& X, Index n, const char* name) {
  if (X.rows() != n || X.cols() != n) {
    std::ostringstream os;
    os << name << " must be " << n << "x" << n << ", got " << X.rows() << "x"
       << X.cols();
    throw InvalidModelError(os.str());
  }
}

void require_symmetric(const SparseMatrix& X, const char* name) {
  const double asym = relative_asymmetry(X);
  if (asym > kSymmetryTol) {
    std::ostringstream os;
    os << name << " is not symmetric (relative asymmetry " << asym << " > "
       << kSymmetryTol << ")";
    throw InvalidModelError(os.str());
  }
}

}  // namespace

SecondOrderSystem::SecondOrderSystem(SparseMatrix M, SparseMatrix K, SparseMatrix R,
                                     Matrix F, Matrix Cout) {
  const Index n = M.rows();
  require_square(M, n, "M");
  require_square(K, n, "K");
  require_square(R, n, "R");
  if (F.rows() != n) {
    throw InvalidModelError("F must have " + std::to_string(n) + " rows, got " +
                            std::to_string(F.rows()));
  }
  if (Cout.cols() != n) {
    throw InvalidModelError("Cout must have " + std::to_string(n) +
                            " columns, got " + std::to_string(Cout.cols()));
  }
  require_symmetric(M, "M");
  require_symmetric(K, "K");
  require_symmetric(R, "R");
  M_ = symmetrized(M);
  K_ = symmetrized(K);
  R_ = symmetrized(R);
  if (n == 0 || classify(M_) != Definiteness::positive) {
    throw InvalidModelError("M is not positive definite");
  }
  if (classify(K_) == Definiteness::indefinite) {
    throw InvalidModelError("K is not positive semidefinite");
  }
  if (classify(R_) == Definiteness::indefinite) {
    throw InvalidModelError("R is not positive semidefinite");
  }
  F_ = std::move(F);
  Cout_ = std::move(Cout);
}

SecondOrderSystem::SecondOrderSystem(Trusted, SparseMatrix M, SparseMatrix K,
                                     SparseMatrix R, Matrix F, Matrix Cout)
    : M_(std::move(M)),
      K_(std::move(K)),
      R_(std::move(R)),
      F_(std::move(F)),
      Cout_(std::move(Cout)) {}

SecondOrderSystem SecondOrderSystem::with_input(Matrix F) const {
  if (F.rows() != dofs()) throw DimensionError("input map row count mismatch");
  return SecondOrderSystem(Trusted{}, M_, K_, R_, std::move(F), Cout_);
}

SecondOrderSystem SecondOrderSystem::with_output(Matrix Cout) const {
  if (Cout.cols() != dofs()) throw DimensionError("output map column count mismatch");
  return SecondOrderSystem(Trusted{}, M_, K_, R_, F_, std::move(Cout));
}

// ------------------------------------------------------------ StateSpaceSystem

StateSpaceSystem::StateSpaceSystem(SystemMatrix E, SystemMatrix A, Matrix B, Matrix C)
    : E_(std::move(E)), A_(std::move(A)), B_(std::move(B)), C_(std::move(C)) {
  const Index n = A_.rows();
  if (A_.cols() != n || E_.rows() != n || E_.cols() != n) {
    throw DimensionError("E and A must be square and of equal size");
  }
  if (B_.rows() != n) throw DimensionError("B row count must equal state dimension");
  if (C_.cols() != n) throw DimensionError("C column count must equal state dimension");
}

StateSpaceSystem StateSpaceSystem::with_input(Matrix B) const {
  return StateSpaceSystem(E_, A_, std::move(B), C_);
}

StateSpaceSystem StateSpaceSystem::with_output(Matrix C) const {
  return StateSpaceSystem(E_, A_, B_, std::move(C));
}

// --------------------------------------------------------- PencilFactorization

namespace {
// Small pencils are factored densely so the condition estimate is available.
constexpr Index kDenseSolveLimit = 256;
}  // namespace

template <typename Scalar>
struct PencilFactorization<Scalar>::Impl {
  using Dense = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Sparse = Eigen::SparseMatrix<Scalar>;

  bool sparse = false;
  Eigen::PartialPivLU<Dense> dense_lu;
  Sparse pencil;
  Eigen::SparseLU<Sparse> sparse_lu;
};

template <typename Scalar>
PencilFactorization<Scalar>::PencilFactorization(const SystemMatrix& E, Scalar alpha,
                                                 const SystemMatrix& A, Scalar beta)
    : impl_(std::make_unique<Impl>()), n_(A.rows()) {
  using Dense = typename Impl::Dense;
  using Sparse = typename Impl::Sparse;
  if (!E.is_sparse() || !A.is_sparse() || n_ <= kDenseSolveLimit) {
    Dense P = alpha * E.dense().template cast<Scalar>() +
              beta * A.dense().template cast<Scalar>();
    impl_->dense_lu.compute(P);
    const double rc = impl_->dense_lu.rcond();
    if (!(rc > 1e-14)) {
      std::ostringstream os;
      os << "pencil alpha*E + beta*A is singular (rcond " << rc << ")";
      throw SingularSolveError(os.str());
    }
    return;
  }
  impl_->sparse = true;
  Sparse P = alpha * E.sparse_ptr()->template cast<Scalar>() +
             beta * A.sparse_ptr()->template cast<Scalar>();
  P.makeCompressed();
  impl_->pencil = std::move(P);
  impl_->sparse_lu.analyzePattern(impl_->pencil);
  impl_->sparse_lu.factorize(impl_->pencil);
  if (impl_->sparse_lu.info() != Eigen::Success) {
    throw SingularSolveError("pencil alpha*E + beta*A is singular: " +
                             impl_->sparse_lu.lastErrorMessage());
  }
}

template <typename Scalar>
PencilFactorization<Scalar>::~PencilFactorization() = default;
template <typename Scalar>
PencilFactorization<Scalar>::PencilFactorization(PencilFactorization&&) noexcept = default;
template <typename Scalar>
PencilFactorization<Scalar>& PencilFactorization<Scalar>::operator=(
    PencilFactorization&&) noexcept = default;

template <typename Scalar>
typename PencilFactorization<Scalar>::MatrixType PencilFactorization<Scalar>::solve(
    const MatrixType& rhs) const {
  if (rhs.rows() != n_) throw DimensionError("right-hand side has wrong row count");
  if (!impl_->sparse) return impl_->dense_lu.solve(rhs);
  MatrixType x = impl_->sparse_lu.solve(rhs);
  const double rhs_norm = rhs.norm();
  if (!x.allFinite() ||
      (impl_->pencil * x - rhs).norm() > 1e-6 * std::max(rhs_norm, 1e-300)) {
    throw SingularSolveError("pencil solve lost accuracy; point is at or near a pole");
  }
  return x;
}

template class PencilFactorization<double>;
template class PencilFactorization<Complex>;

// ------------------------------------------------------------------ operations

StateSpaceSystem second_order_to_state_space(const SecondOrderSystem& sys) {
  const Index n = sys.dofs();
  const Index m = sys.inputs();
  const Index p = sys.outputs();

  std::vector<Eigen::Triplet<double>> e, a;
  e.reserve(n + sys.M().nonZeros());
  a.reserve(n + sys.K().nonZeros() + sys.R().nonZeros());
  for (Index i = 0; i < n; ++i) {
    e.emplace_back(i, i, 1.0);
    a.emplace_back(i, n + i, 1.0);
  }
  auto stamp = [n](std::vector<Eigen::Triplet<double>>& out, const SparseMatrix& X,
                   double sign) {
    for (Index k = 0; k < X.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(X, k); it; ++it) {
        out.emplace_back(n + it.row(), n + it.col(), sign * it.value());
      }
    }
  };
  stamp(e, sys.M(), 1.0);
  stamp(a, sys.R(), -1.0);
  for (Index k = 0; k < sys.K().outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(sys.K(), k); it; ++it) {
      a.emplace_back(n + it.row(), it.col(), -it.value());
    }
  }
  SparseMatrix E(2 * n, 2 * n), A(2 * n, 2 * n);
  E.setFromTriplets(e.begin(), e.end());
  A.setFromTriplets(a.begin(), a.end());

  Matrix B = Matrix::Zero(2 * n, m);
  B.bottomRows(n) = sys.F();
  Matrix C = Matrix::Zero(p, 2 * n);
  C.leftCols(n) = sys.Cout();
  return StateSpaceSystem(std::move(E), std::move(A), std::move(B), std::move(C));
}

ComplexMatrix eval_transfer(const StateSpaceSystem& sys, Complex s) {
  try {
    PencilFactorization<Complex> lu(sys.E(), s, sys.A(), Complex(-1.0));
    ComplexMatrix X = lu.solve(sys.B().cast<Complex>());
    return sys.C().cast<Complex>() * X;
  } catch (const SingularSolveError& e) {
    std::ostringstream os;
    os << "transfer function undefined at s = " << s.real()
       << (s.imag() < 0 ? " - " : " + ") << std::abs(s.imag()) << "j: " << e.what();
    throw SingularSolveError(os.str());
  }
}

StandardForm to_standard_form(const StateSpaceSystem& sys) {
  const Matrix E = sys.E().dense();
  Eigen::PartialPivLU<Matrix> lu(E);
  if (!(lu.rcond() > 1e-14)) throw InvalidModelError("descriptor matrix E is singular");
  return StandardForm{lu.solve(sys.A().dense()), lu.solve(sys.B())};
}

}  // namespace lumpcheck
