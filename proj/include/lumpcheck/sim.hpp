#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "lumpcheck/core.hpp"
#include "lumpcheck/signal.hpp"

namespace lumpcheck {

struct Trajectory {
  std::vector<double> times;  // s
  Matrix outputs;             // one row per time, one column per output
};

/// Fixed-step backward Euler: (E - dt A) x_{k+1} = E x_k + dt B h(t_{k+1}),
/// y_k = C x_k, from t = 0 until the first step at or past `horizon`.
/// (E - dt A) is factored once. An empty x0 means the zero state.
Trajectory backward_euler(const StateSpaceSystem& sys, std::span<const InputSignal> inputs,
                          const Vector& x0, double dt, double horizon);
Trajectory backward_euler(const StateSpaceSystem& sys, const InputSignal& input,
                          const Vector& x0, double dt, double horizon);

struct OutputComparison {
  double rmse = 0.0;          // root mean square over samples and outputs
  double linf_max_dev = 0.0;  // largest absolute deviation
};

OutputComparison compare_outputs(const Matrix& y1, const Matrix& y2,
                                 std::span<const double> times);
/// Throws DimensionError unless both trajectories share the same time grid.
OutputComparison compare_outputs(const Trajectory& a, const Trajectory& b);

/// 1 / max |lambda| and 1 / min |Re lambda| over the poles.
struct TimeScales {
  double shortest = 0.0;
  double slowest_decay = 0.0;
};
TimeScales time_scales(const StateSpaceSystem& sys);

/// Shortest time constant / 50.
double default_time_step(const TimeScales& scales);
/// End of the last input plus five slowest decay times.
double default_horizon(const TimeScales& scales, std::span<const InputSignal> inputs);

/// Header "t,y1,...,yp" (or the given labels), 17 significant digits.
void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj,
                          const std::vector<std::string>& labels = {});

}  // namespace lumpcheck
