#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "lumpcheck/consistency.hpp"
#include "lumpcheck/dpm.hpp"
#include "lumpcheck/lpm.hpp"
#include "lumpcheck/mor.hpp"
#include "lumpcheck/sim.hpp"

namespace lumpcheck {

/// Environment variable holding the worker count of the shift search.
inline constexpr const char* kThreadsEnv = "LUMPCHECK_THREADS";

struct CheckOptions {
  double tol = kDefaultBoundTolerance;
  double mass_tol = kDefaultMassTolerance;
  double source_tol = kDefaultSourceTolerance;
  double target = 0.01;
  Index max_order = 100;
  int seed_grid = 9;
  int threads = 1;
  bool validate = false;
  std::optional<double> dt;
  std::optional<double> horizon;
};

struct CheckResult {
  ConsistencyReport report;
  RomFamily family;
  std::optional<Trajectory> dpm_trajectory;
  std::optional<Trajectory> lpm_trajectory;
};

/// Load and assemble, convert to state space, reduce the DPM, compute the
/// ROM-to-LPM error and form the bound and verdict. With `validate` both
/// models are also simulated and the L-infinity containment is recorded.
CheckResult run_check(const LpmNetwork& lpm, const DpmModel& dpm, const CheckOptions& options);

/// cure_accumulate on a DPM after the stability check.
RomFamily run_reduce(const DpmModel& dpm, const CheckOptions& options);

/// A model file of either kind: an LPM document (has "masses") or a DPM
/// manifest.
struct LoadedModel {
  SecondOrderSystem system;
  std::vector<InputSignal> inputs;  // may be empty for a DPM without signals
  Vector x0, v0;
  std::vector<std::string> labels;
};
LoadedModel load_model(const std::filesystem::path& path);

/// Worker count from LUMPCHECK_THREADS, 1 when unset or invalid.
int threads_from_env();

/// Entry point of the command-line tool: check, reduce, simulate, h2.
/// Returns 0 (consistent / target met / done), 1 (inconsistent / target
/// unmet) or 2 (error); diagnostics go to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lumpcheck
