#pragma once

#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lumpcheck {

enum class SignalKind { step, ramp_hold, sine_burst, sampled };

std::string to_string(SignalKind kind);
SignalKind signal_kind_from_string(std::string_view name);

/// One scalar input channel h(t), zero for t < 0.
///
/// - step: amplitude on [0, horizon], zero afterwards (horizon may be infinite)
/// - ramp_hold: linear rise over [0, rise_time], hold until horizon, then zero
/// - sine_burst: amplitude * sin(omega t) on [0, horizon]
/// - sampled: piecewise-linear through (t_i, v_i), zero outside the table
class InputSignal {
 public:
  static constexpr double kUnending = std::numeric_limits<double>::infinity();

  static InputSignal step(double amplitude, double horizon = kUnending);
  static InputSignal ramp_hold(double amplitude, double rise_time, double horizon);
  static InputSignal sine_burst(double amplitude, double omega, double duration);
  static InputSignal sampled(std::vector<double> times, std::vector<double> values);
  static InputSignal zero() { return step(0.0, 0.0); }

  /// Compact text form, e.g. "step:amplitude=1,horizon=4",
  /// "ramp-hold:amplitude=2,rise=0.5,horizon=3",
  /// "sine-burst:amplitude=1,omega=6.28,duration=2", "zero".
  static InputSignal parse(std::string_view spec);

  SignalKind kind() const { return kind_; }
  double amplitude() const { return amplitude_; }
  double horizon() const { return horizon_; }
  double rise_time() const { return rise_time_; }
  double omega() const { return omega_; }
  const std::vector<double>& times() const { return times_; }
  const std::vector<double>& values() const { return values_; }

  double operator()(double t) const;

  /// Integral of h(t)^2 over [0, inf). Closed form for the analytic kinds,
  /// trapezoidal rule on h^2 for sampled tables. Throws InfiniteEnergyError
  /// for an unending nonzero signal.
  double energy() const;

  /// Same kind and same timing parameters; amplitudes may differ.
  bool same_shape(const InputSignal& other) const;

  /// True when the signal is analytic (amplitude times a fixed shape).
  bool is_symbolic() const { return kind_ != SignalKind::sampled; }

  std::string describe() const;

 private:
  InputSignal() = default;

  SignalKind kind_ = SignalKind::step;
  double amplitude_ = 0.0;
  double horizon_ = 0.0;
  double rise_time_ = 0.0;
  double omega_ = 0.0;
  std::vector<double> times_;
  std::vector<double> values_;
};

/// Sum of channel energies; sqrt of this is the L2 norm of the vector input.
double total_energy(std::span<const InputSignal> channels);

}  // namespace lumpcheck
