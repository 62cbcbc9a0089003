#include "lumpcheck/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>

#include "lumpcheck/mor.hpp"

namespace lumpcheck {

Trajectory backward_euler(const StateSpaceSystem& sys, std::span<const InputSignal> inputs,
                          const Vector& x0, double dt, double horizon) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw Error("time step must be positive");
  if (!(horizon >= dt) || !std::isfinite(horizon)) {
    throw Error("horizon must be finite and at least one time step");
  }
  if (static_cast<Index>(inputs.size()) != sys.inputs()) {
    throw DimensionError("system has " + std::to_string(sys.inputs()) + " inputs, " +
                         std::to_string(inputs.size()) + " signals given");
  }
  const Index n = sys.states();
  if (x0.size() != 0 && x0.size() != n) {
    throw DimensionError("initial state has " + std::to_string(x0.size()) + " entries, expected " +
                         std::to_string(n));
  }
  const auto steps = static_cast<Index>(std::ceil(horizon / dt - 1e-9));

  std::optional<PencilFactorization<double>> lu;
  try {
    lu.emplace(sys.E(), 1.0, sys.A(), -dt);
  } catch (const SingularSolveError& e) {
    std::ostringstream os;
    os << "E - dt A is singular for dt = " << dt << ": " << e.what();
    throw SingularSolveError(os.str());
  }

  Trajectory traj;
  traj.times.resize(static_cast<std::size_t>(steps + 1));
  traj.outputs.resize(steps + 1, sys.outputs());
  Matrix x = x0.size() ? Matrix(x0) : Matrix::Zero(n, 1);
  Vector h(sys.inputs());
  traj.times[0] = 0.0;
  traj.outputs.row(0) = (sys.C() * x).transpose();
  for (Index k = 1; k <= steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    for (Index j = 0; j < h.size(); ++j) h(j) = inputs[static_cast<std::size_t>(j)](t);
    Matrix rhs = sys.E() * x;
    rhs.noalias() += dt * (sys.B() * h);
    try {
      x = lu->solve(rhs);
    } catch (const SingularSolveError& e) {
      std::ostringstream os;
      os << "backward Euler step " << k << " failed at dt = " << dt << ": " << e.what();
      throw SingularSolveError(os.str());
    }
    traj.times[static_cast<std::size_t>(k)] = t;
    traj.outputs.row(k) = (sys.C() * x).transpose();
  }
  return traj;
}

Trajectory backward_euler(const StateSpaceSystem& sys, const InputSignal& input,
                          const Vector& x0, double dt, double horizon) {
  return backward_euler(sys, std::span<const InputSignal>(&input, 1), x0, dt, horizon);
}

OutputComparison compare_outputs(const Matrix& y1, const Matrix& y2,
                                 std::span<const double> times) {
  if (y1.rows() != y2.rows() || y1.cols() != y2.cols() ||
      y1.rows() != static_cast<Index>(times.size())) {
    throw DimensionError("output histories must share one time grid");
  }
  OutputComparison c;
  if (y1.size() == 0) return c;
  const Matrix d = y1 - y2;
  c.rmse = std::sqrt(d.squaredNorm() / static_cast<double>(d.size()));
  c.linf_max_dev = d.cwiseAbs().maxCoeff();
  return c;
}

OutputComparison compare_outputs(const Trajectory& a, const Trajectory& b) {
  if (a.times.size() != b.times.size()) throw DimensionError("time grids differ in length");
  for (std::size_t i = 0; i < a.times.size(); ++i) {
    if (std::abs(a.times[i] - b.times[i]) > 1e-12 * std::max(1.0, std::abs(a.times[i]))) {
      throw DimensionError("time grids differ at sample " + std::to_string(i));
    }
  }
  return compare_outputs(a.outputs, b.outputs, a.times);
}

TimeScales time_scales(const StateSpaceSystem& sys) {
  const Eigen::VectorXcd p = poles(sys);
  double max_abs = 0.0;
  double min_decay = std::numeric_limits<double>::infinity();
  for (const Complex& z : p) {
    max_abs = std::max(max_abs, std::abs(z));
    min_decay = std::min(min_decay, std::abs(z.real()));
  }
  if (!(max_abs > 0.0) || !(min_decay > 0.0)) {
    throw UnstableSystemError("system has a pole on the imaginary axis; no time scale");
  }
  return TimeScales{1.0 / max_abs, 1.0 / min_decay};
}

double default_time_step(const TimeScales& scales) { return scales.shortest / 50.0; }

double default_horizon(const TimeScales& scales, std::span<const InputSignal> inputs) {
  double end = 0.0;
  for (const auto& h : inputs) {
    double e = h.kind() == SignalKind::sampled ? h.times().back() : h.horizon();
    if (!std::isfinite(e)) e = 5.0 * scales.slowest_decay;
    end = std::max(end, e);
  }
  return end + 5.0 * scales.slowest_decay;
}

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj,
                          const std::vector<std::string>& labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  const Index p = traj.outputs.cols();
  out << 't';
  for (Index j = 0; j < p; ++j) {
    out << ',';
    if (static_cast<std::size_t>(j) < labels.size()) {
      out << labels[static_cast<std::size_t>(j)];
    } else {
      out << 'y' << j + 1;
    }
  }
  out << '\n';
  char buf[32];
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", traj.times[i]);
    out << buf;
    for (Index j = 0; j < p; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", traj.outputs(static_cast<Index>(i), j));
      out << ',' << buf;
    }
    out << '\n';
  }
  if (!out) throw Error("failed writing " + path.string());
}

}  // namespace lumpcheck
