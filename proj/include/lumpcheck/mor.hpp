#pragma once

#include <array>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lumpcheck/core.hpp"

namespace lumpcheck {

/// Finite generalized eigenvalues of (A, E), dense.
Eigen::VectorXcd poles(const StateSpaceSystem& sys);

/// All poles satisfy Re < -1e-12 * spectral radius.
bool is_stable(const StateSpaceSystem& sys);

/// Second-order systems with K and R positive definite are stable by
/// dissipativity; anything else falls back to the dense pole test.
bool is_stable(const SecondOrderSystem& sys);

/// A pair of expansion points: the roots of s^2 - 2 zeta omega s + omega^2.
/// zeta < 1 gives a conjugate pair, zeta = 1 a double real point and zeta > 1
/// two distinct reals. Both lie in the right half plane.
struct ShiftPair {
  double omega = 1.0;
  double zeta = 1.0;

  std::array<Complex, 2> shifts() const;
};

struct KrylovBasis {
  Matrix V;  // orthonormal columns
  std::vector<std::string> warnings;
};

/// Orthonormal basis of the union over shifts of
/// span{(sE-A)^{-1}B, ((sE-A)^{-1}E)(sE-A)^{-1}B, ...} up to `order_per_shift`
/// terms. Complex shifts must come with their conjugates; the basis is real.
/// Nearly dependent directions are dropped with a warning.
KrylovBasis rational_krylov_basis(const StateSpaceSystem& sys,
                                  std::span<const Complex> shifts, int order_per_shift);

/// Same, extending an existing orthonormal basis with the Krylov directions of
/// (A, E, B) where B may differ from sys.B() (used for residual systems).
KrylovBasis extend_krylov_basis(const StateSpaceSystem& sys, const Matrix& B,
                                const Matrix& V, std::span<const Complex> shifts,
                                int order_per_shift);

struct ReducedModel {
  StateSpaceSystem rom;
  double h2_norm_sq = 0.0;  // ||G_r||^2
  Matrix V;                 // projection basis
  Matrix Br;                // reduced input matrix in V coordinates, E_r = I
  Matrix L;                 // A V = E V S + B L (zero for an exact model)
  bool exact = false;       // span(V) is invariant; G_r == G
};

/// H2 pseudo-optimal reduced model on span(V).
///
/// V must span an input rational Krylov space of `sys`, so that
/// A V = E V S + B L for some S, L (recovered by least squares). The reduced
/// model has E_r = I, A_r = S - P^{-1} L^T L, B_r = -P^{-1} L^T and C_r = C V,
/// where P solves P S + S^T P = L^T L. Its poles mirror the expansion points,
/// it interpolates G there, and ||G||^2 = ||G_r||^2 + ||G - G_r||^2.
///
/// If span(V) is invariant under E^{-1}A and contains E^{-1}B, the one-sided
/// projection reproduces G exactly and is returned instead.
///
/// When `fom_h2` is given the certificate ||G||^2 - ||G_r||^2 >= -1e-8 ||G||^2
/// is enforced. Throws ReductionError on any failed check.
ReducedModel pseudo_optimal_reduce(const StateSpaceSystem& sys, const Matrix& V,
                                   std::optional<double> fom_h2 = std::nullopt);

/// Same model built from the expansion points directly. The Krylov relation
/// A V = E V S + B L is then known exactly instead of being recovered from an
/// orthonormal basis, which keeps interpolation accurate when the directions
/// are badly conditioned. V has unit columns but is not orthonormal.
ReducedModel pseudo_optimal_reduce(const StateSpaceSystem& sys, std::span<const Complex> shifts,
                                   int order_per_shift, std::optional<double> fom_h2 = std::nullopt);

struct ShiftSearchOptions {
  double scale = 1.0;         // frequency scale the seed grid is centred on
  int budget = 56;            // objective evaluations
  int seed_magnitudes = 9;    // log-spaced magnitudes in [1e-2, 1e2] * scale
  double half_width_decades = 2.0;
  int threads = 1;
};

struct ShiftSearchResult {
  ShiftPair best;
  double step_error = 0.0;
  int evaluations = 0;
};

/// Deterministic coarse-to-fine search over shift pairs minimizing
/// `step_error` (nullopt marks an infeasible candidate). The seed grid crosses
/// log-spaced magnitudes with zeta in {1, 2, 0.3, 0.1, 0.03}, centre first; the
/// remaining budget refines log(omega) and then log(zeta) by golden section.
ShiftSearchResult adaptive_shift_search(
    const std::function<std::optional<double>(const ShiftPair&)>& step_error,
    const ShiftSearchOptions& options);

/// sqrt(|m0| / |m2|) from the moments m_k = C (A^{-1}E)^k A^{-1} B of the
/// system with input matrix B, falling back to |m0| / |m1| and then 1.
double spectral_scale(const StateSpaceSystem& sys, const Matrix& B);

struct RomStep {
  Index order = 0;
  StateSpaceSystem rom;
  double certified_error = 0.0;  // sqrt(||G||^2 - ||G_r||^2)
  double rom_h2 = 0.0;
  std::vector<Complex> shifts;   // expansion points added by this step
};

struct RomFamily {
  std::string fom_ref;
  double fom_h2 = 0.0;
  double target_rel = 0.0;
  bool target_met = false;
  std::string stop_reason;
  std::vector<RomStep> steps;

  double relative_error(std::size_t step) const {
    return fom_h2 > 0.0 ? steps.at(step).certified_error / fom_h2 : 0.0;
  }
};

struct CureOptions {
  double target_rel = 0.01;
  Index max_order = 100;
  /// ||G||_H2 of the full model when already known (e.g. from the modal path).
  std::optional<double> fom_h2;
  std::string fom_ref = "fom";
  ShiftSearchOptions search;  // scale is re-estimated every step
};

/// Cumulative reduction: each step searches a shift pair for the current
/// residual system E x' = A x + B_perp h and reduces it pseudo-optimally.
/// With A V = E V S + B_perp L the error factors as
/// G - G_r = C (sE - A)^{-1} (B_perp - E V B_r) (I + L (sI - A_r)^{-1} B_r),
/// so the steps chain into a block lower triangular model and the residual
/// input is updated to B_perp - E V B_r. The certified error is the
/// Pythagorean deficit sqrt(||G||^2 - ||G_r||^2) of the accumulated model,
/// widened by the rounding allowance n eps (||G||^2 + ||G_r||^2) under the
/// root (n = states of G), so it stays positive even for an exact model.
/// Stops when the certified relative error reaches the target, the next step
/// would exceed max_order, or the directions span the state space.
RomFamily cure_accumulate(const StateSpaceSystem& sys, const CureOptions& options);

}  // namespace lumpcheck
