#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lumpcheck/core.hpp"
#include "lumpcheck/mor.hpp"
#include "lumpcheck/signal.hpp"

namespace lumpcheck {

// ------------------------------------------------------------- Matrix Market

/// Reads coordinate or array Matrix Market data with a real or integer field
/// and general or symmetric symmetry. Symmetric storage is expanded. Pattern,
/// complex and skew/Hermitian files are rejected. Errors carry the line number.
SparseMatrix parse_matrix_market(std::string_view text, const std::string& source = "<text>");
SparseMatrix read_matrix_market(const std::filesystem::path& path);

/// Coordinate format, general symmetry, 17 significant digits.
void write_matrix_market(const std::filesystem::path& path, const SparseMatrix& X);
/// Array format (column-major), general symmetry, 17 significant digits.
void write_matrix_market(const std::filesystem::path& path, const Matrix& X);

// ------------------------------------------------------------------ 1D bar

enum class MassModel { consistent, lumped };

struct BarParameters {
  double length = 1.0;          // m
  double area = 1.0;            // m^2
  double youngs_modulus = 1.0;  // Pa
  double density = 1.0;         // kg/m^3
  Index elements = 1;
  double alpha = 0.0;  // 1/s, mass-proportional damping
  double beta = 0.0;   // s, stiffness-proportional damping
  MassModel mass_model = MassModel::consistent;
  bool clamped = true;  // node 0 fixed by row/column elimination
};

/// Two-node linear elements: stiffness (EA/Le)[[1,-1],[-1,1]], consistent mass
/// (rho A Le/6)[[2,1],[1,2]] or lumped (rho A Le/2) I. R = alpha M + beta K.
/// F is a unit force at the free end and Cout reads the free-end displacement.
SecondOrderSystem assemble_bar_fem(const BarParameters& bar);
SecondOrderSystem assemble_bar_fem(double length, double area, double youngs_modulus,
                                   double density, Index n_elems, double alpha, double beta,
                                   MassModel mass_model);

/// rho A L, including the share carried by a clamped node.
double bar_physical_mass(const BarParameters& bar);

/// Exact first natural frequency of the clamped-free bar, (pi/2) sqrt(E/rho)/L.
double bar_first_frequency(const BarParameters& bar);

/// 1^T M 1.
double dpm_total_mass(const SecondOrderSystem& sys);

/// Row of length n with `weights` normalized to sum 1 on `nodes`. An empty
/// weight list means uniform weights.
RowVector build_boi_selector(Index n, std::span<const Index> nodes,
                             std::span<const double> weights = {});

// --------------------------------------------------------------- manifest

/// Row of the displacement projection: LPM mass `mass` sees the weighted
/// average of the listed DPM dofs.
struct NodeAverage {
  std::string mass;
  std::vector<Index> nodes;
  std::vector<double> weights;
};

/// Projections as declared in a manifest; resolved against an LPM by the
/// consistency module.
struct ProjectionSpec {
  std::optional<Matrix> gamma_n;  // LPM inputs x DPM inputs
  std::vector<NodeAverage> gamma_i;
};

struct DpmModel {
  SecondOrderSystem system;
  std::vector<std::pair<std::string, InputSignal>> signals;
  std::vector<std::string> input_signals;  // signal id per F column
  Vector x0, v0;
  std::optional<double> total_mass;  // physical mass override for mass matching
  std::optional<BarParameters> bar;
  ProjectionSpec projections;

  const InputSignal& signal(std::string_view id) const;
  std::vector<InputSignal> input_channels() const;
  /// total_mass when declared, 1^T M 1 otherwise.
  double mass_for_matching() const;
};

/// Manifest (JSON, "format": 1). The model comes either from files,
///   "matrices": {"M": "M.mtx", "K": "K.mtx", "R": "R.mtx", "F": "F.mtx", "Cout": "C.mtx"}
/// (paths relative to the manifest; R optional, F and Cout optional when
/// "sources" / "boi" are given), or from the bar generator,
///   "bar": {"length", "area", "youngs_modulus", "density", "elements",
///           "alpha", "beta", "mass": "consistent"|"lumped", "clamped"}.
/// Further keys:
///   "signals": [{"id", "kind", ...}],
///   "inputs": ["f1", ...]                      signal per F column, or
///   "sources": [{"signal", "nodes", "weights"}] one F column each,
///   "boi": [{"label", "nodes", "weights"}]      Cout rows (normalized),
///   "x0", "v0": [..], "total_mass": kg,
///   "projections": {"gamma_n": [[..]], "gamma_i": [{"mass", "nodes", "weights"}]}.
/// Node indices are 0-based rows of the assembled matrices.
DpmModel load_dpm_manifest(const std::filesystem::path& path);

/// Writes M, K, R, F, Cout as .mtx files next to a manifest carrying the
/// signals, inputs, initial state, mass override and projections.
void save_dpm(const std::filesystem::path& dir, const DpmModel& model,
              const std::string& manifest_name = "dpm.json");

/// Per-step step_<k>_{E,A,B,C}.mtx files plus family.json with orders,
/// shifts and certified errors.
void save_rom_family(const std::filesystem::path& dir, const RomFamily& family);
RomFamily load_rom_family(const std::filesystem::path& dir);

}  // namespace lumpcheck
