#include "lumpcheck/signal.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "lumpcheck/errors.hpp"

namespace lumpcheck {

std::string to_string(SignalKind kind) {
  switch (kind) {
    case SignalKind::step: return "step";
    case SignalKind::ramp_hold: return "ramp-hold";
    case SignalKind::sine_burst: return "sine-burst";
    case SignalKind::sampled: return "sampled";
  }
  return "?";
}

SignalKind signal_kind_from_string(std::string_view name) {
  if (name == "step") return SignalKind::step;
  if (name == "ramp-hold" || name == "ramp_hold") return SignalKind::ramp_hold;
  if (name == "sine-burst" || name == "sine_burst") return SignalKind::sine_burst;
  if (name == "sampled") return SignalKind::sampled;
  throw ParseError("", "unknown signal kind '" + std::string(name) + "'");
}

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidModelError("invalid input signal: " + what);
}

}  // namespace

InputSignal InputSignal::step(double amplitude, double horizon) {
  require(std::isfinite(amplitude), "amplitude must be finite");
  require(horizon >= 0.0, "horizon must be nonnegative");
  InputSignal s;
  s.kind_ = SignalKind::step;
  s.amplitude_ = amplitude;
  s.horizon_ = horizon;
  return s;
}

InputSignal InputSignal::ramp_hold(double amplitude, double rise_time, double horizon) {
  require(std::isfinite(amplitude), "amplitude must be finite");
  require(rise_time > 0.0, "rise time must be positive");
  require(horizon >= rise_time, "horizon must not precede the end of the ramp");
  InputSignal s;
  s.kind_ = SignalKind::ramp_hold;
  s.amplitude_ = amplitude;
  s.rise_time_ = rise_time;
  s.horizon_ = horizon;
  return s;
}

InputSignal InputSignal::sine_burst(double amplitude, double omega, double duration) {
  require(std::isfinite(amplitude), "amplitude must be finite");
  require(omega > 0.0 && std::isfinite(omega), "omega must be positive");
  require(duration >= 0.0, "duration must be nonnegative");
  InputSignal s;
  s.kind_ = SignalKind::sine_burst;
  s.amplitude_ = amplitude;
  s.omega_ = omega;
  s.horizon_ = duration;
  return s;
}

InputSignal InputSignal::sampled(std::vector<double> times, std::vector<double> values) {
  require(!times.empty(), "sample table is empty");
  require(times.size() == values.size(), "time and value columns differ in length");
  require(times.front() >= 0.0, "sample times must be nonnegative");
  for (std::size_t i = 1; i < times.size(); ++i) {
    require(times[i] > times[i - 1], "sample times must increase strictly");
  }
  for (double v : values) require(std::isfinite(v), "sample values must be finite");
  InputSignal s;
  s.kind_ = SignalKind::sampled;
  s.amplitude_ = 0.0;
  for (double v : values) s.amplitude_ = std::max(s.amplitude_, std::abs(v));
  s.horizon_ = times.back();
  s.times_ = std::move(times);
  s.values_ = std::move(values);
  return s;
}

InputSignal InputSignal::parse(std::string_view spec) {
  const auto colon = spec.find(':');
  const std::string kind_name(spec.substr(0, colon));
  if (kind_name == "zero") return zero();
  std::map<std::string, double> params;
  if (colon != std::string_view::npos) {
    std::stringstream ss{std::string(spec.substr(colon + 1))};
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto eq = item.find('=');
      if (eq == std::string::npos) {
        throw ParseError("signal '" + std::string(spec) + "'",
                         "expected key=value, got '" + item + "'");
      }
      const std::string key = item.substr(0, eq);
      const std::string val = item.substr(eq + 1);
      if (val == "inf") {
        params[key] = kUnending;
        continue;
      }
      try {
        std::size_t used = 0;
        params[key] = std::stod(val, &used);
        if (used != val.size()) throw std::invalid_argument(val);
      } catch (const std::exception&) {
        throw ParseError("signal '" + std::string(spec) + "'",
                         "'" + val + "' is not a number");
      }
    }
  }
  auto get = [&](const char* key, double fallback) {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
  };
  auto need = [&](const char* key) {
    auto it = params.find(key);
    if (it == params.end()) {
      throw ParseError("signal '" + std::string(spec) + "'",
                       std::string("missing parameter '") + key + "'");
    }
    return it->second;
  };
  switch (signal_kind_from_string(kind_name)) {
    case SignalKind::step:
      return step(get("amplitude", 1.0), get("horizon", kUnending));
    case SignalKind::ramp_hold:
      return ramp_hold(get("amplitude", 1.0), need("rise"), need("horizon"));
    case SignalKind::sine_burst:
      return sine_burst(get("amplitude", 1.0), need("omega"), need("duration"));
    case SignalKind::sampled:
      throw ParseError("signal '" + std::string(spec) + "'",
                       "sampled signals must be given as a table in a model file");
  }
  return zero();
}

double InputSignal::operator()(double t) const {
  if (t < 0.0 || t > horizon_) return 0.0;
  switch (kind_) {
    case SignalKind::step: return amplitude_;
    case SignalKind::ramp_hold:
      return t < rise_time_ ? amplitude_ * t / rise_time_ : amplitude_;
    case SignalKind::sine_burst: return amplitude_ * std::sin(omega_ * t);
    case SignalKind::sampled: {
      if (t < times_.front()) return 0.0;
      auto it = std::upper_bound(times_.begin(), times_.end(), t);
      if (it == times_.end()) return values_.back();
      const auto i = static_cast<std::size_t>(it - times_.begin());
      const double w = (t - times_[i - 1]) / (times_[i] - times_[i - 1]);
      return (1.0 - w) * values_[i - 1] + w * values_[i];
    }
  }
  return 0.0;
}

double InputSignal::energy() const {
  const double a2 = amplitude_ * amplitude_;
  if (kind_ != SignalKind::sampled && a2 == 0.0) return 0.0;
  if (!std::isfinite(horizon_)) {
    throw InfiniteEnergyError(
        "input '" + describe() +
        "' has infinite energy; the L-infinity error bound needs a finite-energy input");
  }
  switch (kind_) {
    case SignalKind::step: return a2 * horizon_;
    case SignalKind::ramp_hold:
      return a2 * (rise_time_ / 3.0 + (horizon_ - rise_time_));
    case SignalKind::sine_burst:
      return a2 * (horizon_ / 2.0 - std::sin(2.0 * omega_ * horizon_) / (4.0 * omega_));
    case SignalKind::sampled: {
      double e = 0.0;
      for (std::size_t i = 1; i < times_.size(); ++i) {
        e += 0.5 * (times_[i] - times_[i - 1]) *
             (values_[i - 1] * values_[i - 1] + values_[i] * values_[i]);
      }
      return e;
    }
  }
  return 0.0;
}

bool InputSignal::same_shape(const InputSignal& other) const {
  if (kind_ != other.kind_) return false;
  switch (kind_) {
    case SignalKind::step: return horizon_ == other.horizon_;
    case SignalKind::ramp_hold:
      return horizon_ == other.horizon_ && rise_time_ == other.rise_time_;
    case SignalKind::sine_burst:
      return horizon_ == other.horizon_ && omega_ == other.omega_;
    case SignalKind::sampled: return false;
  }
  return false;
}

std::string InputSignal::describe() const {
  std::ostringstream os;
  os.precision(17);
  os << to_string(kind_);
  switch (kind_) {
    case SignalKind::step:
      os << ":amplitude=" << amplitude_ << ",horizon=" << horizon_;
      break;
    case SignalKind::ramp_hold:
      os << ":amplitude=" << amplitude_ << ",rise=" << rise_time_
         << ",horizon=" << horizon_;
      break;
    case SignalKind::sine_burst:
      os << ":amplitude=" << amplitude_ << ",omega=" << omega_
         << ",duration=" << horizon_;
      break;
    case SignalKind::sampled: os << "[" << times_.size() << " samples]"; break;
  }
  return os.str();
}

double total_energy(std::span<const InputSignal> channels) {
  double e = 0.0;
  for (const auto& h : channels) e += h.energy();
  return e;
}

}  // namespace lumpcheck
