#pragma once

#include "lumpcheck/core.hpp"

namespace lumpcheck {

struct LyapunovSolution {
  Matrix P;
  /// ||A P E^T + E P A^T + B B^T|| / (2 ||A|| ||P|| ||E|| + ||B||^2)
  double relative_residual = 0.0;
  /// Residual above 1e-8 or LAPACK perturbed near-coincident eigenvalues.
  bool ill_conditioned = false;
};

/// Controllability Gramian of a stable pencil: A P E^T + E P A^T + B B^T = 0.
///
/// E is factored once to reach the standard problem, which is then solved by
/// Bartels-Stewart on the real Schur form. Throws UnstableSystemError naming
/// the first eigenvalue with Re >= -1e-12 * spectral radius.
LyapunovSolution solve_generalized_lyapunov(const Matrix& A, const Matrix& E,
                                            const Matrix& B);

/// sqrt(trace(C P C^T)).
double h2_norm(const StateSpaceSystem& sys);

/// Exact H2 norm of a second-order system. Classically damped systems
/// (R diagonal in the undamped modal basis) are summed mode pair by mode pair
/// in closed form; anything else goes through the first-order Gramian.
/// Banded systems with R = alpha M + beta K take a band eigensolver that
/// only forms the input and output rows of the modes: O(n^2) instead of
/// O(n^3).
double h2_norm(const SecondOrderSystem& sys);

/// Largest state dimension accepted by the dense Gramian path.
inline constexpr Index kDenseH2Limit = 5000;
/// Dof range of the banded Rayleigh path (half bandwidth at most n / 8).
inline constexpr Index kBandedMinDofs = 64;
inline constexpr Index kBandedH2Limit = 8000;

/// True when Phi^T R Phi is diagonal to 1e-9 relative in the M-orthonormal
/// modal basis of (K, M).
bool is_classically_damped(const SecondOrderSystem& sys);

/// Block system realizing G1 - G2: E = diag(E1, E2), A = diag(A1, A2),
/// B = [B1; B2], C = [C1, -C2].
StateSpaceSystem difference_system(const StateSpaceSystem& sys1,
                                   const StateSpaceSystem& sys2);

/// ||G1 - G2||_H2 through the difference system.
double h2_error(const StateSpaceSystem& sys1, const StateSpaceSystem& sys2);

/// (1/2pi integral ||G(jw)||_F^2 dw)^(1/2) by adaptive Gauss-Kronrod over
/// log-spaced panels that bracket every resonance, plus power-law tails.
/// Cross-check oracle for the Gramian path; intended for small systems.
double h2_norm_quadrature(const StateSpaceSystem& sys, double tol = 1e-10);

}  // namespace lumpcheck
