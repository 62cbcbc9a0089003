#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lumpcheck/core.hpp"
#include "lumpcheck/signal.hpp"

namespace lumpcheck {

/// Reserved node id for the fixed frame. Never a matrix row.
inline constexpr std::string_view kGround = "ground";

struct LpmMass {
  std::string id;
  double value = 0.0;  // kg
  double x0 = 0.0;     // m
  double v0 = 0.0;     // m/s
};

/// Spring (value = k, N/m) or damper (value = r, N s/m) between two nodes.
struct LpmEdge {
  std::string id;
  std::string from;
  std::string to;
  double value = 0.0;
};

/// Force channel: `scale` times signal `signal` acting on mass `mass`.
struct LpmSource {
  std::string mass;
  std::string signal;
  double scale = 1.0;
};

/// Behaviour of interest: weighted average of mass displacements. Weights are
/// normalized to sum to one on assembly.
struct LpmBoi {
  std::string label;
  std::vector<std::pair<std::string, double>> weights;
};

struct LpmNetwork {
  std::vector<LpmMass> masses;
  std::vector<LpmEdge> springs;
  std::vector<LpmEdge> dampers;
  std::vector<std::pair<std::string, InputSignal>> signals;
  std::vector<LpmSource> sources;
  std::vector<LpmBoi> boi;

  /// Row of `id` in the assembled matrices; throws InvalidModelError.
  Index mass_index(std::string_view id) const;
  const InputSignal& signal(std::string_view id) const;
  /// Distinct signal ids in order of first use by a source: the columns of F.
  std::vector<std::string> input_signals() const;
  /// Signals driving each input channel, in column order.
  std::vector<InputSignal> input_channels() const;
};

/// Checks every structural invariant: positive parameters, unique ids,
/// resolvable references, no self loops, connectivity to ground, at least one
/// BoI with nonnegative weights of nonzero sum. Throws InvalidModelError with
/// the JSON pointer of the offending entry.
void validate(const LpmNetwork& net);

/// Document format (JSON):
///   {"format": 1,
///    "masses":  [{"id": "m1", "value": 1.0, "x0": 0, "v0": 0}],
///    "springs": [{"id": "k1", "from": "m1", "to": "ground", "k": 1.0}],
///    "dampers": [{"id": "r1", "from": "m1", "to": "ground", "r": 1.0}],
///    "signals": [{"id": "f1", "kind": "step", "amplitude": 1, "horizon": 4}],
///    "sources": [{"mass": "m1", "signal": "f1", "scale": 1.0}],
///    "boi":     [{"label": "y", "masses": ["m1"]}]}
/// A BoI may give "weights": {"m1": 0.5, "m2": 0.5} instead of "masses".
/// Parse errors carry a JSON pointer or a line number.
LpmNetwork parse_lpm(std::string_view document);
LpmNetwork load_lpm(const std::filesystem::path& path);
std::string lpm_to_json(const LpmNetwork& net);

/// M = diag(masses); K and R stamped Laplacian-style, ground edges adding only
/// the diagonal term; one F column per distinct signal; one Cout row per BoI.
SecondOrderSystem assemble_lpm(const LpmNetwork& net);

double total_mass(const LpmNetwork& net);

/// Initial displacement and velocity vectors in mass order.
Vector initial_displacement(const LpmNetwork& net);
Vector initial_velocity(const LpmNetwork& net);

}  // namespace lumpcheck
