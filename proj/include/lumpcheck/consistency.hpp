#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lumpcheck/core.hpp"
#include "lumpcheck/dpm.hpp"
#include "lumpcheck/lpm.hpp"
#include "lumpcheck/mor.hpp"
#include "lumpcheck/signal.hpp"

namespace lumpcheck {

/// Default relative tolerance on the H2 error bound.
inline constexpr double kDefaultBoundTolerance = 0.05;
/// Default relative tolerance of the mass match.
inline constexpr double kDefaultMassTolerance = 0.01;
/// Default absolute tolerance of the initial-state and source match.
inline constexpr double kDefaultSourceTolerance = 1e-9;

struct ProjectionSet {
  Matrix gamma_n;  // LPM inputs x DPM inputs
  Matrix gamma_i;  // LPM dofs x DPM dofs
  Matrix gamma_f;  // BoI rows over DPM dofs (the DPM output selector)
};

/// Resolves manifest projections against an LPM. A missing gamma_n defaults
/// to the identity when the input counts agree; a missing gamma_i row maps
/// that mass to zero.
ProjectionSet resolve_projections(const LpmNetwork& lpm, const DpmModel& dpm);

struct MassCheck {
  double lpm_mass = 0.0;
  double dpm_mass = 0.0;
  double rel_tol = 0.0;
  bool pass = false;
};

/// pass iff |m_lpm - m_dpm| <= rel_tol * m_lpm, with m_dpm = 1^T M 1.
MassCheck check_mass_match(const LpmNetwork& lpm, const SecondOrderSystem& dpm, double rel_tol);
MassCheck check_mass_match(double lpm_mass, double dpm_mass, double rel_tol);

struct SourceCheck {
  double ic_residual = 0.0;
  double source_residual = 0.0;
  double abs_tol = 0.0;
  bool symbolic = true;  // false when a sampled or retimed signal forced sampling
  bool pass = false;
};

/// Initial state residual max(|G_I x_d(0) - x_l(0)|_inf, |G_I v_d(0) - v_l(0)|_inf)
/// and source residual: per LPM channel, h_l against sum_j gamma_n(i, j) h_d,j.
/// Signals of the same shape compare by amplitude; same kind with different
/// timing, or sampled signals, compare by sup norm on a fine grid. Zero
/// signals and sampled tables compare with anything. Throws
/// IncomparableSourcesError when two analytic kinds differ.
SourceCheck check_ic_source_match(const LpmNetwork& lpm, const DpmModel& dpm,
                                  const ProjectionSet& proj, double abs_tol);

/// Sup-norm residual between h_l and the projected DPM channels. Exposed for
/// testing.
double source_residual(const InputSignal& lpm_signal, std::span<const InputSignal> dpm_signals,
                       std::span<const double> weights, bool* symbolic = nullptr);

/// LPM with B' = B * gamma_n, driven by the DPM inputs.
StateSpaceSystem substitute_source(const StateSpaceSystem& lpm_ss, const Matrix& gamma_n,
                                   Index dpm_input_dim);

/// sqrt of the input energy, sum over channels of the integral of h^2.
double linf_bound_factor(const InputSignal& input);
double linf_bound_factor(std::span<const InputSignal> channels);

struct DecayRow {
  Index order = 0;
  double eps1 = 0.0;
  double eps2 = 0.0;
  double eps_rel = 0.0;
};

struct ConsistencyReport {
  std::optional<MassCheck> c1;
  std::optional<SourceCheck> c2;
  double eps1 = 0.0;
  double eps2 = 0.0;
  double eps_abs = 0.0;
  double eps_rel = 0.0;
  double lpm_h2 = 0.0;
  double dpm_h2 = 0.0;
  double linf_factor = 0.0;
  double linf_bound = 0.0;
  double tolerance = kDefaultBoundTolerance;
  Index rom_order = 0;
  Index dpm_states = 0;
  bool target_met = false;
  bool consistent = false;
  std::vector<DecayRow> decay;
  std::vector<std::string> failures;  // "C1", "C2", "C3"
  std::vector<std::string> notes;

  /// Optional a posteriori validation by simulation.
  struct Validation {
    double dt = 0.0;
    double horizon = 0.0;
    double rmse = 0.0;
    double linf_max_dev = 0.0;
    bool contained = false;
  };
  std::optional<Validation> validation;

  /// Recomputes `failures` and `consistent` from c1, c2 and eps_rel.
  void update_verdict();

  std::string to_json() const;  // 17 significant digits
  std::string summary() const;  // 6 significant digits
  std::string error_decay_csv() const;
};

/// eps1 is the certified error of the last family step, eps2 = ||G_r - G_l||
/// exactly, eps_abs = eps1 + eps2, eps_rel = eps_abs / ||G_l||,
/// linf_bound = eps_abs * linf_bound_factor(inputs). Every family step gets a
/// decay row. Throws UnstableSystemError if the LPM or a ROM is unstable.
ConsistencyReport consistency_bound(const StateSpaceSystem& lpm_ss, const StateSpaceSystem& dpm_ss,
                                    const RomFamily& family, std::span<const InputSignal> inputs,
                                    double rel_tol);

/// "rom_order,eps1,eps_rel" rows of a family, relative to ||G_d||.
std::string family_decay_csv(const RomFamily& family);

}  // namespace lumpcheck
