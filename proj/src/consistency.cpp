#include "lumpcheck/consistency.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>
#include <sstream>

#include "json_io.hpp"
#include "lumpcheck/h2.hpp"

namespace lumpcheck {

using detail::Json;

ProjectionSet resolve_projections(const LpmNetwork& lpm, const DpmModel& dpm) {
  const Index m_l = static_cast<Index>(lpm.input_signals().size());
  const Index m_d = dpm.system.inputs();
  const Index n_l = static_cast<Index>(lpm.masses.size());
  const Index n_d = dpm.system.dofs();
  ProjectionSet proj;
  if (dpm.projections.gamma_n) {
    proj.gamma_n = *dpm.projections.gamma_n;
    if (proj.gamma_n.rows() != m_l || proj.gamma_n.cols() != m_d) {
      throw DimensionError("gamma_n is " + std::to_string(proj.gamma_n.rows()) + "x" +
                           std::to_string(proj.gamma_n.cols()) + ", expected " +
                           std::to_string(m_l) + "x" + std::to_string(m_d) +
                           " (LPM inputs x DPM inputs)");
    }
  } else if (m_l == m_d) {
    proj.gamma_n = Matrix::Identity(m_l, m_d);
  } else {
    throw DimensionError("LPM has " + std::to_string(m_l) + " inputs and DPM " +
                         std::to_string(m_d) + "; declare projections.gamma_n");
  }
  proj.gamma_i = Matrix::Zero(n_l, n_d);
  for (const auto& avg : dpm.projections.gamma_i) {
    proj.gamma_i.row(lpm.mass_index(avg.mass)) = build_boi_selector(n_d, avg.nodes, avg.weights);
  }
  proj.gamma_f = dpm.system.Cout();
  return proj;
}

MassCheck check_mass_match(double lpm_mass, double dpm_mass, double rel_tol) {
  MassCheck c{lpm_mass, dpm_mass, rel_tol, false};
  c.pass = std::abs(lpm_mass - dpm_mass) <= rel_tol * lpm_mass;
  return c;
}

MassCheck check_mass_match(const LpmNetwork& lpm, const SecondOrderSystem& dpm, double rel_tol) {
  return check_mass_match(total_mass(lpm), dpm_total_mass(dpm), rel_tol);
}

// ------------------------------------------------------------------- C2

namespace {

bool is_zero(const InputSignal& h) {
  if (h.kind() != SignalKind::sampled) return h.amplitude() == 0.0;
  return std::all_of(h.values().begin(), h.values().end(), [](double v) { return v == 0.0; });
}

void add_breakpoints(const InputSignal& h, std::set<double>& out) {
  switch (h.kind()) {
    case SignalKind::step:
    case SignalKind::sine_burst:
      out.insert(h.horizon());
      break;
    case SignalKind::ramp_hold:
      out.insert(h.rise_time());
      out.insert(h.horizon());
      break;
    case SignalKind::sampled:
      out.insert(h.times().begin(), h.times().end());
      break;
  }
}

double sampled_sup(const InputSignal& lpm_signal, std::span<const InputSignal> dpm_signals,
                   std::span<const double> weights) {
  std::set<double> bp{0.0};
  add_breakpoints(lpm_signal, bp);
  for (const auto& h : dpm_signals) add_breakpoints(h, bp);
  double t_end = 0.0;
  bool unending = false;
  for (double t : bp) {
    if (std::isfinite(t)) {
      t_end = std::max(t_end, t);
    } else {
      unending = true;
    }
  }
  if (t_end == 0.0) t_end = 1.0;
  if (unending) t_end *= 1.5;

  auto diff = [&](double t) {
    double d = lpm_signal(t);
    for (std::size_t j = 0; j < dpm_signals.size(); ++j) d -= weights[j] * dpm_signals[j](t);
    return std::abs(d);
  };
  double sup = 0.0;
  constexpr int kSamples = 20000;
  for (int i = 0; i <= kSamples; ++i) sup = std::max(sup, diff(t_end * i / kSamples));
  const double nudge = 1e-12 * t_end;
  for (double t : bp) {
    if (!std::isfinite(t)) continue;
    sup = std::max({sup, diff(t), diff(std::max(0.0, t - nudge)), diff(t + nudge)});
  }
  return sup;
}

}  // namespace

double source_residual(const InputSignal& lpm_signal, std::span<const InputSignal> dpm_signals,
                       std::span<const double> weights, bool* symbolic) {
  if (dpm_signals.size() != weights.size()) throw DimensionError("one weight per DPM signal");
  std::vector<InputSignal> active;
  std::vector<double> w;
  for (std::size_t j = 0; j < dpm_signals.size(); ++j) {
    if (weights[j] != 0.0 && !is_zero(dpm_signals[j])) {
      active.push_back(dpm_signals[j]);
      w.push_back(weights[j]);
    }
  }
  const bool lpm_zero = is_zero(lpm_signal);
  // Sampled tables compare with any kind; analytic kinds must agree.
  std::optional<SignalKind> kind;
  if (!lpm_zero && lpm_signal.is_symbolic()) kind = lpm_signal.kind();
  for (const auto& h : active) {
    if (!h.is_symbolic()) continue;
    if (!kind) kind = h.kind();
    if (h.kind() != *kind) {
      throw IncomparableSourcesError("source kinds differ: LPM '" + lpm_signal.describe() +
                                     "' against DPM '" + h.describe() + "'");
    }
  }
  const InputSignal* shape = lpm_zero ? (active.empty() ? nullptr : &active.front()) : &lpm_signal;
  bool same = shape == nullptr || shape->is_symbolic();
  for (const auto& h : active) same = same && h.same_shape(*shape);
  if (symbolic) *symbolic = same;
  if (shape == nullptr) return 0.0;
  if (same) {
    double a = lpm_zero ? 0.0 : lpm_signal.amplitude();
    for (std::size_t j = 0; j < active.size(); ++j) a -= w[j] * active[j].amplitude();
    return std::abs(a);
  }
  return sampled_sup(lpm_signal, active, w);
}

SourceCheck check_ic_source_match(const LpmNetwork& lpm, const DpmModel& dpm,
                                  const ProjectionSet& proj, double abs_tol) {
  const Index n_d = dpm.system.dofs();
  if (proj.gamma_i.rows() != static_cast<Index>(lpm.masses.size()) || proj.gamma_i.cols() != n_d) {
    throw DimensionError("gamma_i must be LPM masses x DPM dofs");
  }
  SourceCheck c;
  c.abs_tol = abs_tol;
  const Vector xd = dpm.x0.size() ? dpm.x0 : Vector::Zero(n_d);
  const Vector vd = dpm.v0.size() ? dpm.v0 : Vector::Zero(n_d);
  const Vector dx = proj.gamma_i * xd - initial_displacement(lpm);
  const Vector dv = proj.gamma_i * vd - initial_velocity(lpm);
  c.ic_residual = std::max(dx.size() ? dx.lpNorm<Eigen::Infinity>() : 0.0,
                           dv.size() ? dv.lpNorm<Eigen::Infinity>() : 0.0);

  if (dpm.input_signals.empty()) {
    throw InvalidModelError("DPM declares no input signals; the source match needs them");
  }
  const auto lpm_channels = lpm.input_channels();
  const auto dpm_channels = dpm.input_channels();
  if (proj.gamma_n.rows() != static_cast<Index>(lpm_channels.size()) ||
      proj.gamma_n.cols() != static_cast<Index>(dpm_channels.size())) {
    throw DimensionError("gamma_n must be LPM inputs x DPM inputs");
  }
  for (std::size_t i = 0; i < lpm_channels.size(); ++i) {
    std::vector<double> w(dpm_channels.size());
    for (std::size_t j = 0; j < w.size(); ++j) {
      w[j] = proj.gamma_n(static_cast<Index>(i), static_cast<Index>(j));
    }
    bool sym = true;
    c.source_residual =
        std::max(c.source_residual, source_residual(lpm_channels[i], dpm_channels, w, &sym));
    c.symbolic = c.symbolic && sym;
  }
  c.pass = c.ic_residual <= abs_tol && c.source_residual <= abs_tol;
  return c;
}

StateSpaceSystem substitute_source(const StateSpaceSystem& lpm_ss, const Matrix& gamma_n,
                                   Index dpm_input_dim) {
  if (gamma_n.rows() != lpm_ss.inputs() || gamma_n.cols() != dpm_input_dim) {
    throw DimensionError("gamma_n is " + std::to_string(gamma_n.rows()) + "x" +
                         std::to_string(gamma_n.cols()) + ", expected " +
                         std::to_string(lpm_ss.inputs()) + "x" + std::to_string(dpm_input_dim));
  }
  return lpm_ss.with_input(lpm_ss.B() * gamma_n);
}

double linf_bound_factor(const InputSignal& input) { return std::sqrt(input.energy()); }

double linf_bound_factor(std::span<const InputSignal> channels) {
  return std::sqrt(total_energy(channels));
}

// ------------------------------------------------------------- pipeline

ConsistencyReport consistency_bound(const StateSpaceSystem& lpm_ss, const StateSpaceSystem& dpm_ss,
                                    const RomFamily& family, std::span<const InputSignal> inputs,
                                    double rel_tol) {
  if (lpm_ss.inputs() != dpm_ss.inputs() || lpm_ss.outputs() != dpm_ss.outputs()) {
    throw DimensionError("LPM is " + std::to_string(lpm_ss.outputs()) + "x" +
                         std::to_string(lpm_ss.inputs()) + " and DPM " +
                         std::to_string(dpm_ss.outputs()) + "x" + std::to_string(dpm_ss.inputs()) +
                         " (outputs x inputs); substitute the source first");
  }
  if (!(rel_tol > 0.0)) throw Error("tolerance must be positive");
  if (!is_stable(lpm_ss)) {
    throw UnstableSystemError("LPM fails is_stable; its H2 norm is undefined");
  }
  ConsistencyReport r;
  r.tolerance = rel_tol;
  r.dpm_states = dpm_ss.states();
  r.dpm_h2 = family.fom_h2;
  r.target_met = family.target_met;
  r.lpm_h2 = h2_norm(lpm_ss);
  auto relative = [&](double e) {
    if (r.lpm_h2 > 0.0) return e / r.lpm_h2;
    return e == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  };

  for (const RomStep& step : family.steps) {
    if (!is_stable(step.rom)) {
      throw UnstableSystemError("ROM of order " + std::to_string(step.order) +
                                " fails is_stable");
    }
    DecayRow row;
    row.order = step.order;
    row.eps1 = step.certified_error;
    row.eps2 = h2_error(step.rom, lpm_ss);
    row.eps_rel = relative(row.eps1 + row.eps2);
    r.decay.push_back(row);
  }
  if (r.decay.empty()) {
    r.eps1 = family.fom_h2;
    r.eps2 = r.lpm_h2;
    r.notes.push_back("family is empty; the zero model stands in for the ROM");
  } else {
    r.eps1 = r.decay.back().eps1;
    r.eps2 = r.decay.back().eps2;
    r.rom_order = r.decay.back().order;
  }
  r.eps_abs = r.eps1 + r.eps2;
  r.eps_rel = relative(r.eps_abs);
  r.notes.push_back(
      "eps1 is the Pythagorean deficit sqrt(||G_d||^2 - ||G_r||^2), exact up to tolerance");

  try {
    r.linf_factor = linf_bound_factor(inputs);
    r.linf_bound = r.eps_abs * r.linf_factor;
  } catch (const InfiniteEnergyError& e) {
    r.linf_factor = std::numeric_limits<double>::infinity();
    r.linf_bound = std::numeric_limits<double>::infinity();
    r.notes.push_back(std::string("no L-infinity bound: ") + e.what());
  }
  r.update_verdict();
  return r;
}

void ConsistencyReport::update_verdict() {
  failures.clear();
  if (c1 && !c1->pass) failures.emplace_back("C1");
  if (c2 && !c2->pass) failures.emplace_back("C2");
  if (!(eps_rel <= tolerance)) failures.emplace_back("C3");
  consistent = failures.empty();
}

// -------------------------------------------------------------- output

namespace {

std::string g17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

std::string ConsistencyReport::to_json() const {
  Json doc;
  doc["format"] = 1;
  doc["verdict"] = consistent ? "consistent" : "inconsistent";
  doc["failures"] = failures;
  doc["tolerance"] = tolerance;
  if (c1) {
    doc["c1"] = {{"lpm_mass", c1->lpm_mass},
                 {"dpm_mass", c1->dpm_mass},
                 {"rel_tol", c1->rel_tol},
                 {"pass", c1->pass}};
  }
  if (c2) {
    doc["c2"] = {{"ic_residual", c2->ic_residual},
                 {"source_residual", c2->source_residual},
                 {"abs_tol", c2->abs_tol},
                 {"comparison", c2->symbolic ? "symbolic" : "sampled"},
                 {"pass", c2->pass}};
  }
  doc["bound"] = {{"eps1", eps1},         {"eps2", eps2},
                  {"eps_abs", eps_abs},   {"eps_rel", eps_rel},
                  {"lpm_h2", lpm_h2},     {"dpm_h2", dpm_h2},
                  {"rom_order", rom_order}, {"dpm_states", dpm_states},
                  {"target_met", target_met}};
  doc["linf"] = {{"energy_factor", linf_factor}, {"bound", linf_bound}};
  if (validation) {
    doc["validation"] = {{"dt", validation->dt},
                         {"horizon", validation->horizon},
                         {"rmse", validation->rmse},
                         {"linf_max_dev", validation->linf_max_dev},
                         {"contained", validation->contained}};
  }
  doc["notes"] = notes;
  return detail::dump_json(doc) + "\n";
}

std::string ConsistencyReport::summary() const {
  std::ostringstream os;
  os.precision(6);
  os << "verdict: " << (consistent ? "consistent" : "inconsistent") << " (tolerance "
     << tolerance << ")\n";
  if (!failures.empty()) {
    os << "failed:";
    for (const auto& f : failures) os << ' ' << f;
    os << '\n';
  }
  if (c1) {
    os << "C1 mass: LPM " << c1->lpm_mass << " kg, DPM " << c1->dpm_mass << " kg, rel tol "
       << c1->rel_tol << ": " << (c1->pass ? "pass" : "FAIL") << '\n';
  }
  if (c2) {
    os << "C2 initial-state residual " << c2->ic_residual << ", source residual "
       << c2->source_residual << " (" << (c2->symbolic ? "symbolic" : "sampled")
       << "): " << (c2->pass ? "pass" : "FAIL") << '\n';
  }
  os << "eps1 (certified, ROM order " << rom_order << " of " << dpm_states << "): " << eps1 << '\n'
     << "eps2 (ROM vs LPM): " << eps2 << '\n'
     << "eps = eps1 + eps2: " << eps_abs << '\n'
     << "eps_rel = eps / ||G_l||: " << eps_rel << " (||G_l|| = " << lpm_h2 << ")\n"
     << "L-infinity bound: " << linf_bound << " m (input energy factor " << linf_factor << ")\n";
  if (validation) {
    os << "validation: max |y_d - y_l| = " << validation->linf_max_dev << ", rmse "
       << validation->rmse << " (dt " << validation->dt << ", horizon " << validation->horizon
       << "): " << (validation->contained ? "within bound" : "BOUND VIOLATED") << '\n';
  }
  for (const auto& n : notes) os << "note: " << n << '\n';
  return os.str();
}

std::string ConsistencyReport::error_decay_csv() const {
  std::string out = "rom_order,eps1,eps2,eps_rel\n";
  for (const auto& row : decay) {
    out += std::to_string(row.order) + "," + g17(row.eps1) + "," + g17(row.eps2) + "," +
           g17(row.eps_rel) + "\n";
  }
  return out;
}

std::string family_decay_csv(const RomFamily& family) {
  std::string out = "rom_order,eps1,eps_rel\n";
  for (std::size_t k = 0; k < family.steps.size(); ++k) {
    out += std::to_string(family.steps[k].order) + "," + g17(family.steps[k].certified_error) +
           "," + g17(family.relative_error(k)) + "\n";
  }
  return out;
}

}  // namespace lumpcheck
