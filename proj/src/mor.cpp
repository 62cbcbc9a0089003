#include "lumpcheck/mor.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <sstream>

#include <Eigen/SparseCholesky>

#include "lumpcheck/h2.hpp"

namespace lumpcheck {

// ------------------------------------------------------------------- stability

Eigen::VectorXcd poles(const StateSpaceSystem& sys) {
  if (sys.states() == 0) return Eigen::VectorXcd();
  const StandardForm sf = to_standard_form(sys);
  Eigen::EigenSolver<Matrix> es(sf.A, false);
  if (es.info() != Eigen::Success) throw Error("eigenvalue computation failed");
  return es.eigenvalues();
}

namespace {

constexpr double kStabilityMargin = 1e-12;

bool all_in_left_half_plane(const Eigen::VectorXcd& lambda) {
  const double radius = lambda.size() ? lambda.cwiseAbs().maxCoeff() : 0.0;
  for (Index i = 0; i < lambda.size(); ++i) {
    if (!(lambda(i).real() < -kStabilityMargin * radius)) return false;
  }
  return true;
}

bool cholesky_succeeds(const SparseMatrix& X) {
  if (X.norm() == 0.0) return false;
  Eigen::SimplicialLLT<SparseMatrix> llt(X);
  return llt.info() == Eigen::Success;
}

}  // namespace

bool is_stable(const StateSpaceSystem& sys) { return all_in_left_half_plane(poles(sys)); }

bool is_stable(const SecondOrderSystem& sys) {
  if (cholesky_succeeds(sys.K()) && cholesky_succeeds(sys.R())) return true;
  return is_stable(second_order_to_state_space(sys));
}

// ---------------------------------------------------------------------- shifts

std::array<Complex, 2> ShiftPair::shifts() const {
  if (zeta < 1.0) {
    const double im = omega * std::sqrt(1.0 - zeta * zeta);
    return {Complex(zeta * omega, im), Complex(zeta * omega, -im)};
  }
  const double root = omega * std::sqrt(zeta * zeta - 1.0);
  return {Complex(zeta * omega + root, 0.0), Complex(zeta * omega - root, 0.0)};
}

namespace {

struct ShiftGroup {
  Complex sigma;  // Im >= 0
  int order = 0;
};

// Merges repeated points (multiplicity raises the order) and pairs conjugates.
std::vector<ShiftGroup> group_shifts(std::span<const Complex> shifts, int order) {
  if (order < 1) throw Error("order per shift must be at least 1");
  auto close = [](Complex a, Complex b) {
    return std::abs(a - b) <= 1e-12 * std::max({std::abs(a), std::abs(b), 1e-300});
  };
  std::vector<ShiftGroup> groups;
  std::vector<std::pair<Complex, int>> lower;  // conjugate partners, counted
  for (const Complex s : shifts) {
    if (!std::isfinite(s.real()) || !std::isfinite(s.imag())) {
      throw Error("expansion points must be finite");
    }
    const bool is_real = std::abs(s.imag()) <= 1e-14 * std::abs(s);
    if (!is_real && s.imag() < 0.0) {
      auto it = std::find_if(lower.begin(), lower.end(),
                             [&](const auto& e) { return close(e.first, s); });
      if (it == lower.end()) {
        lower.emplace_back(s, 1);
      } else {
        ++it->second;
      }
      continue;
    }
    const Complex key = is_real ? Complex(s.real(), 0.0) : s;
    auto it = std::find_if(groups.begin(), groups.end(),
                           [&](const ShiftGroup& g) { return close(g.sigma, key); });
    if (it == groups.end()) {
      groups.push_back({key, order});
    } else {
      it->order += order;
    }
  }
  for (const auto& g : groups) {
    if (g.sigma.imag() == 0.0) continue;
    const int upper = g.order / order;
    auto it = std::find_if(lower.begin(), lower.end(),
                           [&](const auto& e) { return close(e.first, std::conj(g.sigma)); });
    if (it == lower.end() || it->second != upper) {
      throw Error("complex expansion points must be closed under conjugation");
    }
    lower.erase(it);
  }
  if (!lower.empty()) throw Error("complex expansion points must be closed under conjugation");
  return groups;
}

// Raw (non-orthogonal) Krylov directions, real and imaginary parts split.
Matrix raw_krylov(const SystemMatrix& E, const SystemMatrix& A, const Matrix& B,
                  const std::vector<ShiftGroup>& groups) {
  std::vector<Matrix> blocks;
  Index total = 0;
  for (const auto& g : groups) {
    if (g.sigma.imag() == 0.0) {
      // (A - sigma E) w = B spans the same space as (sigma E - A)^{-1} B.
      PencilFactorization<double> lu(E, -g.sigma.real(), A, 1.0);
      Matrix w = lu.solve(B);
      for (int k = 0; k < g.order; ++k) {
        if (k > 0) w = lu.solve(E * w);
        blocks.push_back(w);
        total += w.cols();
      }
    } else {
      PencilFactorization<Complex> lu(E, -g.sigma, A, Complex(1.0));
      ComplexMatrix w = lu.solve(B.cast<Complex>());
      for (int k = 0; k < g.order; ++k) {
        if (k > 0) w = lu.solve(E * w);
        blocks.push_back(w.real());
        blocks.push_back(w.imag());
        total += 2 * w.cols();
      }
    }
  }
  Matrix W(A.rows(), total);
  Index c = 0;
  for (const auto& b : blocks) {
    W.middleCols(c, b.cols()) = b;
    c += b.cols();
  }
  return W;
}

constexpr double kRankTol = 1e-10;

// Appends the columns of W to the orthonormal V by twice-iterated modified
// Gram-Schmidt, dropping columns whose new component is below rank_tol.
Matrix orthonormal_extend(const Matrix& V, const Matrix& W,
                          std::vector<std::string>* warnings, double rank_tol = kRankTol) {
  std::vector<Vector> cols;
  cols.reserve(V.cols() + W.cols());
  for (Index j = 0; j < V.cols(); ++j) cols.emplace_back(V.col(j));
  Index dropped = 0;
  for (Index j = 0; j < W.cols(); ++j) {
    Vector w = W.col(j);
    const double original = w.norm();
    if (original == 0.0 || !std::isfinite(original)) {
      ++dropped;
      continue;
    }
    w /= original;
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& q : cols) w -= q.dot(w) * q;
    }
    const double remaining = w.norm();
    if (remaining < rank_tol) {
      ++dropped;
      continue;
    }
    cols.emplace_back(w / remaining);
  }
  if (dropped > 0 && warnings) {
    warnings->push_back("rank deficiency: dropped " + std::to_string(dropped) +
                        " nearly dependent Krylov direction(s)");
  }
  Matrix out(W.rows(), static_cast<Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.col(static_cast<Index>(j)) = cols[j];
  return out;
}

}  // namespace

KrylovBasis extend_krylov_basis(const StateSpaceSystem& sys, const Matrix& B,
                                const Matrix& V, std::span<const Complex> shifts,
                                int order_per_shift) {
  if (B.rows() != sys.states() || V.rows() != sys.states()) {
    throw DimensionError("Krylov basis: B and V must have one row per state");
  }
  const auto groups = group_shifts(shifts, order_per_shift);
  KrylovBasis out;
  try {
    const Matrix W = raw_krylov(sys.E(), sys.A(), B, groups);
    out.V = orthonormal_extend(V, W, &out.warnings);
  } catch (const SingularSolveError& e) {
    throw SingularSolveError(std::string("expansion point is a pole: ") + e.what());
  }
  return out;
}

KrylovBasis rational_krylov_basis(const StateSpaceSystem& sys,
                                  std::span<const Complex> shifts, int order_per_shift) {
  return extend_krylov_basis(sys, sys.B(), Matrix(sys.states(), 0), shifts,
                             order_per_shift);
}

// ----------------------------------------------------------- pseudo-optimality

namespace {

constexpr double kRelationTol = 1e-8;
constexpr double kInvarianceTol = 1e-9;
constexpr double kPythagoreanSlack = 1e-8;

// sqrt(||G||^2 - ||G_r||^2) widened by the rounding allowance
// n eps (||G||^2 + ||G_r||^2) of the subtraction, so that an exact model still
// certifies a bound no smaller than the floating-point error of its norms.
double certified_deficit(double fom_sq, double rom_sq, Index states) {
  const double allowance =
      double(states) * std::numeric_limits<double>::epsilon() * (fom_sq + rom_sq);
  return std::sqrt(std::max(fom_sq - rom_sq, 0.0) + allowance);
}

// Exact model when span(V) is invariant under E^{-1}A and contains E^{-1}B:
// the one-sided projection then realizes G.
std::optional<ReducedModel> galerkin_if_invariant(const SystemMatrix& E, const SystemMatrix& A,
                                                  const Matrix& B, const Matrix& C,
                                                  const Matrix& V, const Matrix& EV,
                                                  const Matrix& AV) {
  const Index n = V.rows(), r = V.cols(), m = B.cols();
  (void)A;
  (void)E;
  Eigen::HouseholderQR<Matrix> qr_ev(EV);
  const Matrix Qe = qr_ev.householderQ() * Matrix::Identity(n, r);
  const double b_out = (B - Qe * (Qe.transpose() * B)).norm();
  const double a_out = (AV - Qe * (Qe.transpose() * AV)).norm();
  if (b_out > kInvarianceTol * std::max(B.norm(), 1e-300) ||
      a_out > kInvarianceTol * std::max(AV.norm(), 1e-300)) {
    return std::nullopt;
  }
  const Matrix Er = V.transpose() * EV;
  Eigen::PartialPivLU<Matrix> lu(Er);
  const Matrix Ar = lu.solve(V.transpose() * AV);
  ReducedModel out{StateSpaceSystem(Matrix(Matrix::Identity(r, r)), Ar, lu.solve(V.transpose() * B),
                                    C * V),
                   0.0, V, Matrix(), Matrix::Zero(m, r), true};
  out.Br = out.rom.B();
  out.h2_norm_sq = std::pow(h2_norm(out.rom), 2);
  return out;
}

ReducedModel reduce_from_relation(const Matrix& C, const Matrix& V, const Matrix& S,
                                  const Matrix& L, std::optional<double> fom_h2);

ReducedModel reduce_impl(const SystemMatrix& E, const SystemMatrix& A, const Matrix& B,
                         const Matrix& C, const Matrix& V, std::optional<double> fom_h2) {
  const Index n = A.rows();
  const Index r = V.cols();
  const Index m = B.cols();
  if (V.rows() != n) throw DimensionError("projection basis has the wrong row count");
  if (r == 0) throw ReductionError("projection basis is empty");
  const double orth = (V.transpose() * V - Matrix::Identity(r, r)).norm();
  if (orth > 1e-10) {
    throw ReductionError("projection basis is not orthonormal (||V^T V - I|| = " +
                         std::to_string(orth) + ")");
  }

  const Matrix EV = E * V;
  const Matrix AV = A * V;
  if (auto exact = galerkin_if_invariant(E, A, B, C, V, EV, AV)) return *std::move(exact);

  // Recover the Sylvester relation A V = E V S + B L.
  Matrix G(n, r + m);
  G << EV, B;
  Vector scale = G.colwise().norm().transpose();
  for (Index j = 0; j < scale.size(); ++j) scale(j) = scale(j) > 0.0 ? 1.0 / scale(j) : 1.0;
  const Matrix Gs = G * scale.asDiagonal();
  Eigen::ColPivHouseholderQR<Matrix> qr(Gs);
  const Matrix Z = scale.asDiagonal() * qr.solve(AV);
  const double relation = (G * Z - AV).norm() / std::max(AV.norm(), 1e-300);
  if (!(relation <= kRelationTol)) {
    std::ostringstream os;
    os << "basis does not span an input rational Krylov space (Sylvester residual "
       << relation << ")";
    throw ReductionError(os.str());
  }
  return reduce_from_relation(C, V, Z.topRows(r), Z.bottomRows(m), fom_h2);
}

// Pseudo-optimal model from a basis V with A V = E V S + B L.
ReducedModel reduce_from_relation(const Matrix& C, const Matrix& V, const Matrix& S,
                                  const Matrix& L, std::optional<double> fom_h2) {
  const Index r = V.cols();
  const Index m = L.rows();
  ReducedModel out{StateSpaceSystem(Matrix(), Matrix(), Matrix(0, m), Matrix(C.rows(), 0)),
                   0.0, V, Matrix(), Matrix(), false};

  // P S + S^T P = L^T L, i.e. (-S^T) P + P (-S) + L^T L = 0.
  LyapunovSolution lyap;
  try {
    lyap = solve_generalized_lyapunov(-S.transpose(), Matrix::Identity(r, r), L.transpose());
  } catch (const UnstableSystemError&) {
    throw ReductionError("expansion points must lie in the open right half plane");
  }
  Eigen::LLT<Matrix> llt(lyap.P);
  if (llt.info() != Eigen::Success) {
    throw ReductionError("pseudo-optimal reduction: Gramian of the expansion points is "
                         "not positive definite");
  }
  out.Br = -llt.solve(L.transpose());
  out.L = L;
  const Matrix Ar = S + out.Br * L;
  const Matrix Cr = C * V;
  out.rom = StateSpaceSystem(Matrix(Matrix::Identity(r, r)), Ar, out.Br, Cr);

  if (!is_stable(out.rom)) {
    throw ReductionError("pseudo-optimal reduced model is not stable");
  }
  // ||G_r||^2 through the reduced model's own Gramian; P^{-1} must agree.
  const auto gram = solve_generalized_lyapunov(Ar, Matrix::Identity(r, r), out.Br);
  out.h2_norm_sq = std::max((Cr * gram.P * Cr.transpose()).trace(), 0.0);
  const double via_p = (Cr * llt.solve(Cr.transpose())).trace();
  if (std::abs(via_p - out.h2_norm_sq) > 1e-6 * std::max(out.h2_norm_sq, 1e-300)) {
    std::ostringstream os;
    os << "pseudo-optimal reduction lost accuracy: ROM norm " << out.h2_norm_sq
       << " vs mirrored-Gramian norm " << via_p;
    throw ReductionError(os.str());
  }
  if (fom_h2) {
    const double full = (*fom_h2) * (*fom_h2);
    if (full - out.h2_norm_sq < -kPythagoreanSlack * full) {
      std::ostringstream os;
      os << "Pythagorean certificate violated: ||G||^2 = " << full
         << " < ||G_r||^2 = " << out.h2_norm_sq;
      throw ReductionError(os.str());
    }
  }
  return out;
}

}  // namespace

ReducedModel pseudo_optimal_reduce(const StateSpaceSystem& sys, const Matrix& V,
                                   std::optional<double> fom_h2) {
  return reduce_impl(sys.E(), sys.A(), sys.B(), sys.C(), V, fom_h2);
}

ReducedModel pseudo_optimal_reduce(const StateSpaceSystem& sys, std::span<const Complex> shifts,
                                   int order_per_shift, std::optional<double> fom_h2) {
  const auto groups = group_shifts(shifts, order_per_shift);
  const Index n = sys.states(), m = sys.inputs();
  Index r = 0;
  for (const auto& g : groups) r += (g.sigma.imag() == 0.0 ? 1 : 2) * g.order * m;
  if (r > n) throw ReductionError("more Krylov directions than states");
  const Matrix& B = sys.B();
  const Matrix I = Matrix::Identity(m, m);

  // Column blocks w_k with (A - sigma E) w_0 = B and (A - sigma E) w_k = E w_{k-1},
  // so A w_k = sigma E w_k + E w_{k-1} (+ B for k = 0). Complex blocks are split
  // into real and imaginary parts.
  Matrix V(n, r), S = Matrix::Zero(r, r), L = Matrix::Zero(m, r);
  Index c = 0;
  try {
    for (const auto& g : groups) {
      const double a = g.sigma.real(), b = g.sigma.imag();
      if (b == 0.0) {
        PencilFactorization<double> lu(sys.E(), -a, sys.A(), 1.0);
        Matrix w = lu.solve(B);
        for (int k = 0; k < g.order; ++k, c += m) {
          if (k > 0) {
            w = lu.solve(sys.E() * w);
            S.block(c - m, c, m, m) = I;
          } else {
            L.middleCols(c, m) = I;
          }
          V.middleCols(c, m) = w;
          S.block(c, c, m, m) = a * I;
        }
      } else {
        PencilFactorization<Complex> lu(sys.E(), -g.sigma, sys.A(), Complex(1.0));
        ComplexMatrix w = lu.solve(B.cast<Complex>());
        for (int k = 0; k < g.order; ++k, c += 2 * m) {
          if (k > 0) {
            w = lu.solve(sys.E() * w);
            S.block(c - 2 * m, c, m, m) = I;
            S.block(c - m, c + m, m, m) = I;
          } else {
            L.middleCols(c, m) = I;
          }
          V.middleCols(c, m) = w.real();
          V.middleCols(c + m, m) = w.imag();
          S.block(c, c, m, m) = a * I;
          S.block(c + m, c, m, m) = -b * I;
          S.block(c, c + m, m, m) = b * I;
          S.block(c + m, c + m, m, m) = a * I;
        }
      }
    }
  } catch (const SingularSolveError& e) {
    throw SingularSolveError(std::string("expansion point is a pole: ") + e.what());
  }

  // Unit columns: V D, D^{-1} S D, L D.
  Vector d = V.colwise().norm().transpose();
  for (Index j = 0; j < r; ++j) {
    if (!(d(j) > 0.0) || !std::isfinite(d(j))) throw ReductionError("degenerate Krylov direction");
    d(j) = 1.0 / d(j);
  }
  V = V * d.asDiagonal();
  S = d.cwiseInverse().asDiagonal() * S * d.asDiagonal();
  L = L * d.asDiagonal();
  return reduce_from_relation(sys.C(), V, S, L, fom_h2);
}

// ---------------------------------------------------------------- shift search

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double golden_section(const std::function<double(double)>& f, double a, double b,
                      int evals, double* best_x, double* best_f) {
  constexpr double g = 0.6180339887498949;
  if (evals < 2) return *best_f;
  double x1 = b - g * (b - a), x2 = a + g * (b - a);
  double f1 = f(x1), f2 = f(x2);
  evals -= 2;
  auto record = [&](double x, double fx) {
    if (fx < *best_f) {
      *best_f = fx;
      *best_x = x;
    }
  };
  record(x1, f1);
  record(x2, f2);
  while (evals-- > 0) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - g * (b - a);
      f1 = f(x1);
      record(x1, f1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + g * (b - a);
      f2 = f(x2);
      record(x2, f2);
    }
  }
  return *best_f;
}

}  // namespace

ShiftSearchResult adaptive_shift_search(
    const std::function<std::optional<double>(const ShiftPair&)>& step_error,
    const ShiftSearchOptions& options) {
  if (options.budget < 1) throw Error("shift search budget must be at least 1");
  if (!(options.scale > 0.0) || !std::isfinite(options.scale)) {
    throw Error("shift search scale must be positive");
  }
  const int nm = std::max(options.seed_magnitudes, 1);
  static constexpr double kZetaSeeds[] = {1.0, 2.0, 0.3, 0.1, 0.03};
  const double step_decades = nm > 1 ? 2.0 * options.half_width_decades / (nm - 1) : 1.0;

  // Seed grid ordered by distance from the centre magnitude, then zeta order.
  std::vector<ShiftPair> grid;
  std::vector<std::pair<int, int>> order;
  for (int i = 0; i < nm; ++i) {
    for (int z = 0; z < 5; ++z) order.emplace_back(i, z);
  }
  const int centre = (nm - 1) / 2;
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
    return std::abs(a.first - centre) < std::abs(b.first - centre);
  });
  const int refine = options.budget >= 16 ? std::min(12, options.budget / 4) : 0;
  const int seeds = std::min<int>(options.budget - refine, static_cast<int>(order.size()));
  for (int k = 0; k < seeds; ++k) {
    const auto [i, z] = order[k];
    const double decade = nm > 1 ? -options.half_width_decades + i * step_decades : 0.0;
    grid.push_back({options.scale * std::pow(10.0, decade), kZetaSeeds[z]});
  }

  std::vector<std::optional<double>> values(grid.size());
  if (options.threads > 1) {
    std::size_t next = 0;
    while (next < grid.size()) {
      std::vector<std::future<std::optional<double>>> batch;
      const std::size_t end = std::min(grid.size(), next + options.threads);
      for (std::size_t k = next; k < end; ++k) {
        batch.push_back(std::async(std::launch::async, [&, k] { return step_error(grid[k]); }));
      }
      for (std::size_t k = next; k < end; ++k) values[k] = batch[k - next].get();
      next = end;
    }
  } else {
    for (std::size_t k = 0; k < grid.size(); ++k) values[k] = step_error(grid[k]);
  }

  ShiftSearchResult result;
  result.evaluations = static_cast<int>(grid.size());
  double best = kInf;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (values[k] && *values[k] < best) {
      best = *values[k];
      result.best = grid[k];
    }
  }
  if (!std::isfinite(best)) {
    throw ReductionError("shift search failed: every candidate expansion point was infeasible");
  }
  result.step_error = best;

  const int remaining = options.budget - result.evaluations;
  if (remaining >= 4) {
    const int for_omega = remaining / 2;
    const int for_zeta = remaining - for_omega;
    const double zeta = result.best.zeta;
    double best_x = std::log(result.best.omega);
    auto f_omega = [&](double x) {
      ++result.evaluations;
      const auto v = step_error({std::exp(x), zeta});
      return v ? *v : kInf;
    };
    const double half = step_decades * std::log(10.0);
    golden_section(f_omega, best_x - half, best_x + half, for_omega, &best_x, &best);
    const double omega = std::exp(best_x);
    double best_z = std::log(zeta);
    auto f_zeta = [&](double x) {
      ++result.evaluations;
      const auto v = step_error({omega, std::exp(x)});
      return v ? *v : kInf;
    };
    golden_section(f_zeta, best_z - std::log(10.0), std::min(best_z + std::log(10.0), std::log(4.0)),
                   for_zeta, &best_z, &best);
    result.best = {omega, std::exp(best_z)};
    result.step_error = best;
  }
  return result;
}

double spectral_scale(const StateSpaceSystem& sys, const Matrix& B) {
  try {
    PencilFactorization<double> lu(sys.E(), 0.0, sys.A(), 1.0);
    const Matrix x0 = lu.solve(B);
    const Matrix x1 = lu.solve(sys.E() * x0);
    const Matrix x2 = lu.solve(sys.E() * x1);
    const double m0 = (sys.C() * x0).norm();
    const double m1 = (sys.C() * x1).norm();
    const double m2 = (sys.C() * x2).norm();
    if (m0 > 0.0 && m2 > 0.0 && std::isfinite(m2)) return std::sqrt(m0 / m2);
    if (m0 > 0.0 && m1 > 0.0 && std::isfinite(m1)) return m0 / m1;
  } catch (const SingularSolveError&) {
  }
  return 1.0;
}

// ------------------------------------------------------------------------ CURE

RomFamily cure_accumulate(const StateSpaceSystem& sys, const CureOptions& options) {
  if (!(options.target_rel > 0.0 && options.target_rel < 1.0)) {
    throw Error("target relative H2 error must lie in (0, 1)");
  }
  RomFamily family;
  family.fom_ref = options.fom_ref;
  family.target_rel = options.target_rel;
  family.fom_h2 = options.fom_h2 ? *options.fom_h2 : h2_norm(sys);
  const double fom_sq = family.fom_h2 * family.fom_h2;
  if (family.fom_h2 == 0.0) {
    family.target_met = true;
    family.stop_reason = "system has zero H2 norm";
    return family;
  }

  const Index n = sys.states();
  const Index m = sys.inputs();
  const Index p = sys.outputs();
  Matrix V(n, 0);  // span of all directions used so far
  Matrix b_residual = sys.B();
  double certified = family.fom_h2;
  ShiftSearchOptions search = options.search;

  // The accumulated model is a cascade: step k sees the input filtered by the
  // all-pass factors I + L_j (sI - A_j)^{-1} B_j of the earlier steps.
  Matrix acc_A(0, 0), acc_B(0, m), acc_C(p, 0), acc_L(m, 0);

  while (true) {
    if (!family.steps.empty() && certified <= options.target_rel * family.fom_h2) {
      family.target_met = true;
      family.stop_reason = "target reached";
      break;
    }
    if (V.cols() >= n) {
      family.stop_reason = "basis spans the state space";
      break;
    }
    if (acc_A.rows() + 2 * m > options.max_order) {
      family.stop_reason = "maximum order reached";
      break;
    }

    search.scale = spectral_scale(sys, b_residual);
    const double err_sq = certified * certified;
    const StateSpaceSystem residual = sys.with_input(b_residual);
    auto step_model = [&](const ShiftPair& pair) {
      const auto pts = pair.shifts();
      return pseudo_optimal_reduce(residual, pts, 1, certified);
    };
    auto objective = [&](const ShiftPair& pair) -> std::optional<double> {
      try {
        return std::sqrt(std::max(err_sq - step_model(pair).h2_norm_sq, 0.0));
      } catch (const SingularSolveError&) {
        return std::nullopt;
      } catch (const ReductionError&) {
        return std::nullopt;
      } catch (const UnstableSystemError&) {
        return std::nullopt;
      }
    };
    const auto found = adaptive_shift_search(objective, search);
    const auto red = step_model(found.best);
    const Index r0 = acc_A.rows();
    const Index rk = red.rom.states();

    Matrix A(r0 + rk, r0 + rk);
    A.setZero();
    A.topLeftCorner(r0, r0) = acc_A;
    A.bottomLeftCorner(rk, r0) = red.Br * acc_L;
    A.bottomRightCorner(rk, rk) = red.rom.A().dense();
    Matrix B(r0 + rk, m);
    B << acc_B, red.Br;
    Matrix C(p, r0 + rk);
    C << acc_C, red.rom.C();
    Matrix L(m, r0 + rk);
    L << acc_L, red.L;
    StateSpaceSystem rom(Matrix(Matrix::Identity(r0 + rk, r0 + rk)), A, B, C);
    if (!is_stable(rom)) throw ReductionError("accumulated reduced model is not stable");

    const double rom_h2 = h2_norm(rom);
    double next = certified_deficit(fom_sq, rom_h2 * rom_h2, n);
    if (next > certified + kPythagoreanSlack * family.fom_h2) {
      std::ostringstream os;
      os << "certified error increased from " << certified << " to " << next
         << " at order " << r0 + rk;
      throw ReductionError(os.str());
    }
    next = std::min(next, certified);

    const auto pts = found.best.shifts();
    acc_A = std::move(A);
    acc_B = std::move(B);
    acc_C = std::move(C);
    acc_L = std::move(L);
    V = orthonormal_extend(V, red.V, nullptr);
    b_residual -= sys.E() * Matrix(red.V * red.Br);
    std::optional<ReducedModel> whole;
    if (!red.exact) {
      whole = galerkin_if_invariant(sys.E(), sys.A(), sys.B(), sys.C(), V, sys.E() * V,
                                    sys.A() * V);
    }
    if (whole) {
      const double exact_error =
          std::min(certified_deficit(fom_sq, whole->h2_norm_sq, n), certified);
      family.steps.push_back(RomStep{V.cols(), whole->rom, exact_error, std::sqrt(whole->h2_norm_sq),
                                     std::vector<Complex>(pts.begin(), pts.end())});
      family.target_met = true;
      family.stop_reason = "reduced model is exact";
      break;
    }
    family.steps.push_back(RomStep{r0 + rk, std::move(rom), next, rom_h2,
                                   std::vector<Complex>(pts.begin(), pts.end())});
    certified = next;
    if (red.exact) {
      family.target_met = true;
      family.stop_reason = "reduced model is exact";
      break;
    }
  }
  return family;
}

}  // namespace lumpcheck
