#include "lumpcheck/h2.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <queue>
#include <tuple>
#include <sstream>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "lapack.hpp"
#include "lumpcheck/mor.hpp"

namespace lumpcheck {

namespace {

constexpr double kStabilityMargin = 1e-12;
constexpr double kResidualWarn = 1e-8;

void require_stable(const Eigen::VectorXcd& eigenvalues) {
  double radius = 0.0;
  for (Index i = 0; i < eigenvalues.size(); ++i) {
    radius = std::max(radius, std::abs(eigenvalues(i)));
  }
  for (Index i = 0; i < eigenvalues.size(); ++i) {
    if (!(eigenvalues(i).real() < -kStabilityMargin * radius)) {
      std::ostringstream os;
      os.precision(6);
      os << "pencil is not stable: eigenvalue " << eigenvalues(i).real()
         << (eigenvalues(i).imag() < 0 ? " - " : " + ") << std::abs(eigenvalues(i).imag())
         << "j has nonnegative real part; the Lyapunov equation has no solution";
      throw UnstableSystemError(os.str());
    }
  }
}

}  // namespace

LyapunovSolution solve_generalized_lyapunov(const Matrix& A, const Matrix& E,
                                            const Matrix& B) {
  const Index n = A.rows();
  if (A.cols() != n || E.rows() != n || E.cols() != n || B.rows() != n) {
    throw DimensionError("Lyapunov equation: A, E must be square and B must have n rows");
  }
  if (n > kDenseH2Limit) {
    throw Error("Lyapunov equation of order " + std::to_string(n) +
                " exceeds the dense solver limit " + std::to_string(kDenseH2Limit));
  }
  LyapunovSolution out;
  if (n == 0) return out;

  Eigen::PartialPivLU<Matrix> lu(E);
  if (!(lu.rcond() > 1e-14)) throw InvalidModelError("descriptor matrix E is singular");
  const Matrix As = lu.solve(A);
  const Matrix Bs = lu.solve(B);

  auto schur = detail::real_schur(As);
  require_stable(schur.eigenvalues);

  const Matrix UB = schur.U.transpose() * Bs;
  Matrix Q = -(UB * UB.transpose());
  bool exact = true;
  const Matrix X = detail::solve_quasi_triangular_lyapunov(schur.T, std::move(Q), &exact);
  Matrix P = schur.U * X * schur.U.transpose();
  out.P = 0.5 * (P + P.transpose());

  const Matrix residual =
      A * out.P * E.transpose() + E * out.P * A.transpose() + B * B.transpose();
  const double scale =
      2.0 * A.norm() * out.P.norm() * E.norm() + B.squaredNorm();
  out.relative_residual = scale > 0.0 ? residual.norm() / scale : 0.0;
  out.ill_conditioned = !exact || out.relative_residual > kResidualWarn;
  return out;
}

namespace {

// Schur data of the standard form E^{-1}A, E^{-1}B.
struct SchurData {
  Matrix T, U, UB;
};

SchurData schur_data(const StateSpaceSystem& sys) {
  const Matrix E = sys.E().dense();
  Eigen::PartialPivLU<Matrix> lu(E);
  if (!(lu.rcond() > 1e-14)) throw InvalidModelError("descriptor matrix E is singular");
  auto schur = detail::real_schur(lu.solve(sys.A().dense()));
  require_stable(schur.eigenvalues);
  SchurData out;
  out.UB = schur.U.transpose() * lu.solve(sys.B());
  out.T = std::move(schur.T);
  out.U = std::move(schur.U);
  return out;
}

// trace(C1 X C2^T) with A1 X E2^T + E1 X A2^T + B1 B2^T = 0.
double cross_gramian_trace(const SchurData& s1, const Matrix& C1, const SchurData& s2,
                           const Matrix& C2) {
  const Matrix Y =
      detail::solve_quasi_triangular_sylvester(s1.T, s2.T, -(s1.UB * s2.UB.transpose()));
  return ((C1 * s1.U) * Y * (C2 * s2.U).transpose()).trace();
}

void require_dense_size(Index n) {
  if (n > kDenseH2Limit) {
    throw Error("H2 norm of a " + std::to_string(n) +
                "-state system exceeds the dense Gramian limit");
  }
}

}  // namespace

double h2_norm(const StateSpaceSystem& sys) {
  require_dense_size(sys.states());
  if (sys.states() == 0) return 0.0;
  const SchurData s = schur_data(sys);
  return std::sqrt(std::max(cross_gramian_trace(s, sys.C(), s, sys.C()), 0.0));
}

namespace {

struct ModalForm {
  Vector w;  // squared undamped frequencies
  Vector d;  // modal damping Phi^T R Phi diagonal
  Matrix offdiag_check;
  double offdiag_ratio = 0.0;
  Matrix Phi;
};

ModalForm modal_form(const SecondOrderSystem& sys) {
  auto eig = detail::symmetric_definite_eigen(Matrix(sys.K()), Matrix(sys.M()));
  ModalForm out;
  out.w = eig.eigenvalues;
  const Matrix D = eig.vectors.transpose() * (sys.R() * eig.vectors);
  out.d = D.diagonal();
  const double total = D.norm();
  const double off = std::sqrt(std::max(D.squaredNorm() - out.d.squaredNorm(), 0.0));
  out.offdiag_ratio = total > 0.0 ? off / total : 0.0;
  out.Phi = std::move(eig.vectors);
  return out;
}

constexpr double kClassicalTol = 1e-9;

}  // namespace

bool is_classically_damped(const SecondOrderSystem& sys) {
  return modal_form(sys).offdiag_ratio <= kClassicalTol;
}

namespace {

Index half_bandwidth(const SparseMatrix& X) {
  Index kd = 0;
  for (Index j = 0; j < X.outerSize(); ++j) {
    for (SparseMatrix::InnerIterator it(X, j); it; ++it) kd = std::max(kd, std::abs(it.row() - j));
  }
  return kd;
}

double frobenius_dot(const SparseMatrix& X, const SparseMatrix& Y) {
  return X.cwiseProduct(Y).sum();
}

// (alpha, beta) with R = alpha M + beta K to 1e-12 relative, if any.
std::optional<std::pair<double, double>> rayleigh_coefficients(const SecondOrderSystem& sys) {
  const SparseMatrix &M = sys.M(), &K = sys.K(), &R = sys.R();
  const double mm = frobenius_dot(M, M), mk = frobenius_dot(M, K), kk = frobenius_dot(K, K);
  const double rm = frobenius_dot(R, M), rk = frobenius_dot(R, K);
  const double det = mm * kk - mk * mk;
  double alpha = 0.0, beta = 0.0;
  if (det > 1e-14 * mm * kk) {
    alpha = (rm * kk - rk * mk) / det;
    beta = (rk * mm - rm * mk) / det;
  } else {
    alpha = rm / mm;  // K proportional to M
  }
  const SparseMatrix residual = R - alpha * M - beta * K;
  if (residual.norm() > 1e-12 * std::max(R.norm(), 1e-300)) return std::nullopt;
  return std::make_pair(alpha, beta);
}

// sum over mode pairs of G(s) = sum_i c_i b_i^T / (s^2 + d_i s + w_i); the H2
// inner product of two modal terms has the closed form kappa_ij below.
double modal_h2(const Vector& w, const Vector& d, const Matrix& Cm, const Matrix& Bm) {
  const Index n = w.size();
  if (n == 0) return 0.0;
  const double wmax = w.cwiseAbs().maxCoeff();
  for (Index i = 0; i < n; ++i) {
    if (!(w(i) > kStabilityMargin * wmax) || !(d(i) > 0.0)) {
      std::ostringstream os;
      os << "second-order system is not stable: mode " << i << " has stiffness " << w(i)
         << " and damping " << d(i);
      throw UnstableSystemError(os.str());
    }
  }
  double sum = 0.0;
  for (Index j = 0; j < n; ++j) {
    double col = 0.0;
    for (Index i = 0; i < n; ++i) {
      const double s = d(i) + d(j);
      const double dw = w(i) - w(j);
      const double kappa = s / (dw * dw + s * (d(i) * w(j) + d(j) * w(i)));
      col += Cm.col(i).dot(Cm.col(j)) * Bm.col(i).dot(Bm.col(j)) * kappa;
    }
    sum += col;
  }
  return std::sqrt(std::max(sum, 0.0));
}

}  // namespace

double h2_norm(const SecondOrderSystem& sys) {
  const Index n = sys.dofs();
  const Index kd = std::max(half_bandwidth(sys.M()), half_bandwidth(sys.K()));
  if (n >= kBandedMinDofs && n <= kBandedH2Limit && kd * 8 <= n) {
    if (const auto rayleigh = rayleigh_coefficients(sys)) {
      Matrix rows(sys.outputs() + sys.inputs(), n);
      rows << sys.Cout(), sys.F().transpose();
      if (const auto eig = detail::banded_definite_eigen(sys.K(), sys.M(), kd, rows)) {
        const Vector d = (rayleigh->first + rayleigh->second * eig->eigenvalues.array()).matrix();
        return modal_h2(eig->eigenvalues, d, eig->projected.topRows(sys.outputs()),
                        eig->projected.bottomRows(sys.inputs()));
      }
    }
  }
  require_dense_size(2 * n);
  const ModalForm modes = modal_form(sys);
  if (modes.offdiag_ratio > kClassicalTol) {
    return h2_norm(second_order_to_state_space(sys));
  }
  return modal_h2(modes.w, modes.d, sys.Cout() * modes.Phi, sys.F().transpose() * modes.Phi);
}

StateSpaceSystem difference_system(const StateSpaceSystem& sys1,
                                   const StateSpaceSystem& sys2) {
  if (sys1.inputs() != sys2.inputs() || sys1.outputs() != sys2.outputs()) {
    throw DimensionError("H2 error needs matching input and output dimensions (" +
                         std::to_string(sys1.inputs()) + "x" +
                         std::to_string(sys1.outputs()) + " vs " +
                         std::to_string(sys2.inputs()) + "x" +
                         std::to_string(sys2.outputs()) + ")");
  }
  const Index n1 = sys1.states();
  const Index n2 = sys2.states();
  const Index n = n1 + n2;
  Matrix E = Matrix::Zero(n, n), A = Matrix::Zero(n, n);
  E.topLeftCorner(n1, n1) = sys1.E().dense();
  E.bottomRightCorner(n2, n2) = sys2.E().dense();
  A.topLeftCorner(n1, n1) = sys1.A().dense();
  A.bottomRightCorner(n2, n2) = sys2.A().dense();
  Matrix B(n, sys1.inputs());
  B << sys1.B(), sys2.B();
  Matrix C(sys1.outputs(), n);
  C << sys1.C(), -sys2.C();
  return StateSpaceSystem(std::move(E), std::move(A), std::move(B), std::move(C));
}

double h2_error(const StateSpaceSystem& sys1, const StateSpaceSystem& sys2) {
  if (sys1.inputs() != sys2.inputs() || sys1.outputs() != sys2.outputs()) {
    difference_system(sys1, sys2);  // throws with the dimensions
  }
  require_dense_size(sys1.states() + sys2.states());
  // Gramian of the difference system block by block: the diagonal blocks
  // and the coupling block come from the same triangular solver, so identical
  // systems cancel exactly.
  const SchurData s1 = schur_data(sys1);
  const SchurData s2 = schur_data(sys2);
  const double t11 = sys1.states() ? cross_gramian_trace(s1, sys1.C(), s1, sys1.C()) : 0.0;
  const double t22 = sys2.states() ? cross_gramian_trace(s2, sys2.C(), s2, sys2.C()) : 0.0;
  const double t12 = (sys1.states() && sys2.states())
                         ? cross_gramian_trace(s1, sys1.C(), s2, sys2.C())
                         : 0.0;
  return std::sqrt(std::max(t11 - 2.0 * t12 + t22, 0.0));
}

double h2_norm_quadrature(const StateSpaceSystem& sys, double tol) {
  if (!(tol > 0.0)) throw Error("quadrature tolerance must be positive");
  if (sys.B().norm() == 0.0 || sys.C().norm() == 0.0) return 0.0;

  const Eigen::VectorXcd lambda = poles(sys);
  require_stable(lambda);
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  std::vector<double> breaks;
  for (Index i = 0; i < lambda.size(); ++i) {
    const double mag = std::abs(lambda(i));
    lo = std::min(lo, mag);
    hi = std::max(hi, mag);
    const double wd = std::abs(lambda(i).imag());
    const double width = std::abs(lambda(i).real());
    if (wd > 0.0) {
      breaks.push_back(wd);
      if (wd - width > 0.0) breaks.push_back(wd - width);
      breaks.push_back(wd + width);
    }
  }
  const double w_begin = 1e-4 * lo;
  const double w_end = 1e4 * hi;
  for (double w = w_begin; w < w_end; w *= 10.0) breaks.push_back(w);
  breaks.push_back(w_begin);
  breaks.push_back(w_end);
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::remove_if(breaks.begin(), breaks.end(),
                              [&](double w) { return w < w_begin || w > w_end; }),
               breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end(),
                           [](double a, double b) { return b <= a * (1.0 + 1e-12); }),
               breaks.end());

  std::size_t evaluations = 0;
  constexpr std::size_t kBudget = 2'000'000;
  auto f = [&](double w) {
    if (++evaluations > kBudget) {
      throw QuadratureError("H2 quadrature exceeded its evaluation budget");
    }
    return eval_transfer(sys, Complex(0.0, w)).squaredNorm();
  };
  using GK = boost::math::quadrature::gauss_kronrod<double, 15>;

  // Globally adaptive: the panel with the largest error estimate is bisected
  // until the summed estimate meets the tolerance.
  struct Panel {
    double a, b, value, error;
    bool log_scale;
    bool operator<(const Panel& other) const { return error < other.error; }
  };
  auto rule = [&](double a, double b, bool log_scale) {
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    double err = 0.0;
    const double value = GK::integrate(
        [&](double t) {
          const double x = mid + half * t;
          if (!log_scale) return f(x);
          const double w = std::exp(x);
          return f(w) * w;
        },
        -1.0, 1.0, 0, tol, &err);
    return Panel{a, b, half * value, half * err, log_scale};
  };
  std::priority_queue<Panel> queue;
  queue.push(rule(0.0, w_begin, false));
  for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
    queue.push(rule(std::log(breaks[k]), std::log(breaks[k + 1]), true));
  }
  auto sums = [&] {
    double value = 0.0, error = 0.0;
    auto copy = queue;
    while (!copy.empty()) {
      value += copy.top().value;
      error += copy.top().error;
      copy.pop();
    }
    return std::pair{value, error};
  };
  auto [total, err_total] = sums();
  constexpr double kMinWidth = 1e-13;
  while (err_total > tol * total) {
    const Panel worst = queue.top();
    const double mid = 0.5 * (worst.a + worst.b);
    if (worst.b - worst.a <= kMinWidth * std::max(1.0, std::abs(mid))) break;
    queue.pop();
    const Panel left = rule(worst.a, mid, worst.log_scale);
    const Panel right = rule(mid, worst.b, worst.log_scale);
    queue.push(left);
    queue.push(right);
    total += left.value + right.value - worst.value;
    err_total += left.error + right.error - worst.error;
    if (queue.size() % 256 == 0) std::tie(total, err_total) = sums();
  }
  std::tie(total, err_total) = sums();
  const double f1 = f(w_end);
  const double f2 = f(2.0 * w_end);
  if (f1 > 0.0) {
    const double decay = std::log2(f1 / f2);
    if (!(decay > 1.5)) {
      throw QuadratureError("transfer function does not decay fast enough for a finite H2 norm");
    }
    total += w_end * f1 / (decay - 1.0);
  }
  if (!(err_total <= 1e3 * tol * std::max(total, 1e-300))) {
    throw QuadratureError("H2 quadrature did not reach the requested tolerance");
  }
  return std::sqrt(total / std::numbers::pi);
}

}  // namespace lumpcheck
