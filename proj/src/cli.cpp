#include "lumpcheck/cli.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <CLI11.hpp>

#include "json_io.hpp"
#include "lumpcheck/h2.hpp"

namespace lumpcheck {

namespace {

Vector stacked_state(const Vector& x, const Vector& v, Index n) {
  Vector s = Vector::Zero(2 * n);
  if (x.size() == n) s.head(n) = x;
  if (v.size() == n) s.tail(n) = v;
  return s;
}

void require_stable(const SecondOrderSystem& sys, const std::string& what) {
  if (!is_stable(sys)) {
    throw UnstableSystemError(what + " fails is_stable: a pole has Re >= 0, so its H2 norm is undefined");
  }
}

CureOptions cure_options(const CheckOptions& options) {
  if (!(options.target > 0.0 && options.target < 1.0)) {
    throw Error("--target must lie in (0, 1)");
  }
  if (options.max_order < 2) throw Error("--max-order must be at least 2");
  if (options.seed_grid < 1) throw Error("--seed-grid must be positive");
  CureOptions c;
  c.target_rel = options.target;
  c.max_order = options.max_order;
  c.search.seed_magnitudes = options.seed_grid;
  c.search.threads = std::max(1, options.threads);
  return c;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) throw Error("cannot write " + path.string());
}

}  // namespace

RomFamily run_reduce(const DpmModel& dpm, const CheckOptions& options) {
  CureOptions c = cure_options(options);
  require_stable(dpm.system, "DPM");
  c.fom_h2 = h2_norm(dpm.system);
  c.fom_ref = "dpm";
  return cure_accumulate(second_order_to_state_space(dpm.system), c);
}

CheckResult run_check(const LpmNetwork& lpm, const DpmModel& dpm, const CheckOptions& options) {
  if (!(options.tol > 0.0 && options.tol < 1.0)) throw Error("--tol must lie in (0, 1)");
  // Step 1: both models assembled; C1 and C2.
  const SecondOrderSystem lpm_sys = assemble_lpm(lpm);
  const MassCheck c1 = check_mass_match(total_mass(lpm), dpm.mass_for_matching(), options.mass_tol);
  const ProjectionSet proj = resolve_projections(lpm, dpm);
  const SourceCheck c2 = check_ic_source_match(lpm, dpm, proj, options.source_tol);
  if (proj.gamma_f.rows() != lpm_sys.outputs()) {
    throw DimensionError("LPM has " + std::to_string(lpm_sys.outputs()) + " BoI rows, DPM " +
                         std::to_string(proj.gamma_f.rows()));
  }

  // Step 2: state space, LPM driven by the DPM input.
  const StateSpaceSystem lpm_ss =
      substitute_source(second_order_to_state_space(lpm_sys), proj.gamma_n, dpm.system.inputs());
  const StateSpaceSystem dpm_ss = second_order_to_state_space(dpm.system);

  // Step 3: reduction with certified error.
  CheckResult result;
  result.family = run_reduce(dpm, options);

  // Steps 4 and 5: eps2, bound and verdict.
  const auto inputs = dpm.input_channels();
  result.report = consistency_bound(lpm_ss, dpm_ss, result.family, inputs, options.tol);
  result.report.c1 = c1;
  result.report.c2 = c2;
  if (dpm.total_mass) result.report.notes.push_back("DPM mass taken from the manifest total_mass");
  if (dpm.bar) {
    result.report.notes.push_back("DPM damping is Rayleigh damping from the bar generator");
  }
  if (!result.family.target_met) {
    result.report.notes.push_back("reduction stopped before its target: " + result.family.stop_reason);
  }

  if (options.validate) {
    const TimeScales scales = time_scales(lpm_ss);
    const double dt = options.dt ? *options.dt : default_time_step(scales);
    const double horizon = options.horizon ? *options.horizon : default_horizon(scales, inputs);
    result.dpm_trajectory = backward_euler(dpm_ss, inputs, stacked_state(dpm.x0, dpm.v0, dpm.system.dofs()),
                                           dt, horizon);
    result.lpm_trajectory =
        backward_euler(lpm_ss, inputs,
                       stacked_state(initial_displacement(lpm), initial_velocity(lpm), lpm_sys.dofs()),
                       dt, horizon);
    const OutputComparison cmp = compare_outputs(*result.dpm_trajectory, *result.lpm_trajectory);
    ConsistencyReport::Validation v;
    v.dt = dt;
    v.horizon = horizon;
    v.rmse = cmp.rmse;
    v.linf_max_dev = cmp.linf_max_dev;
    v.contained = cmp.linf_max_dev <= result.report.linf_bound;
    result.report.validation = v;
    result.report.notes.push_back("validation is an optional a posteriori simulation check");
    if (c2.ic_residual != 0.0 || initial_displacement(lpm).any() || initial_velocity(lpm).any()) {
      result.report.notes.push_back("nonzero initial states are outside the L-infinity bound's assumptions");
    }
  }
  result.report.update_verdict();
  return result;
}

LoadedModel load_model(const std::filesystem::path& path) {
  const auto doc = detail::parse_json_text(detail::read_text_file(path), path.string());
  if (doc.is_object() && doc.contains("masses")) {
    const LpmNetwork net = load_lpm(path);
    LoadedModel m{assemble_lpm(net), net.input_channels(), initial_displacement(net),
                  initial_velocity(net), {}};
    for (const auto& b : net.boi) m.labels.push_back(b.label);
    return m;
  }
  DpmModel dpm = load_dpm_manifest(path);
  LoadedModel m{dpm.system, {}, dpm.x0, dpm.v0, {}};
  if (!dpm.input_signals.empty()) m.inputs = dpm.input_channels();
  return m;
}

int threads_from_env() {
  const char* s = std::getenv(kThreadsEnv);
  if (s == nullptr) return 1;
  char* end = nullptr;
  const long v = std::strtol(s, &end, 10);
  if (end == s || *end != '\0' || v < 1) return 1;
  return static_cast<int>(std::min(v, 256L));
}

// ------------------------------------------------------------------ CLI

namespace {

std::string g17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

StateSpaceSystem state_space_of(const LoadedModel& m) {
  return second_order_to_state_space(m.system);
}

int cmd_check(const std::string& lpm_path, const std::string& dpm_path, const CheckOptions& opt,
              const std::filesystem::path& out_dir, std::ostream& out) {
  const LpmNetwork lpm = load_lpm(lpm_path);
  const DpmModel dpm = load_dpm_manifest(dpm_path);
  const CheckResult r = run_check(lpm, dpm, opt);
  std::filesystem::create_directories(out_dir);
  write_file(out_dir / "report.json", r.report.to_json());
  write_file(out_dir / "summary.txt", r.report.summary());
  write_file(out_dir / "error_decay.csv", r.report.error_decay_csv());
  if (r.dpm_trajectory) {
    write_trajectory_csv(out_dir / "trajectory_dpm.csv", *r.dpm_trajectory);
    write_trajectory_csv(out_dir / "trajectory_lpm.csv", *r.lpm_trajectory);
  }
  out << r.report.summary();
  if (r.report.validation && !r.report.validation->contained) return 1;
  return r.report.consistent ? 0 : 1;
}

int cmd_reduce(const std::string& dpm_path, const CheckOptions& opt,
               const std::filesystem::path& out_dir, std::ostream& out) {
  const DpmModel dpm = load_dpm_manifest(dpm_path);
  const RomFamily family = run_reduce(dpm, opt);
  std::filesystem::create_directories(out_dir);
  save_rom_family(out_dir / "rom_family", family);
  write_file(out_dir / "error_decay.csv", family_decay_csv(family));
  std::ostringstream os;
  os.precision(6);
  os << "||G_d||_H2 = " << family.fom_h2 << ", " << family.steps.size() << " steps\n";
  for (std::size_t k = 0; k < family.steps.size(); ++k) {
    os << "  order " << family.steps[k].order << ": certified error "
       << family.steps[k].certified_error << " (relative " << family.relative_error(k) << ")\n";
  }
  os << (family.target_met ? "target met" : "target NOT met") << " (target " << family.target_rel
     << "; " << family.stop_reason << ")\n";
  out << os.str();
  return family.target_met ? 0 : 1;
}

int cmd_simulate(const std::string& model_path, const std::vector<std::string>& signal_specs,
                 std::optional<double> dt, std::optional<double> horizon,
                 const std::filesystem::path& out_dir, std::ostream& out) {
  if (dt && !(*dt > 0.0)) throw Error("--dt must be positive");
  if (horizon && !(*horizon > 0.0)) throw Error("--horizon must be positive");
  const LoadedModel m = load_model(model_path);
  std::vector<InputSignal> inputs = m.inputs;
  if (!signal_specs.empty()) {
    inputs.clear();
    if (signal_specs.size() != 1 && static_cast<Index>(signal_specs.size()) != m.system.inputs()) {
      throw DimensionError("give one --signal or one per input channel (" +
                           std::to_string(m.system.inputs()) + ")");
    }
    for (Index j = 0; j < m.system.inputs(); ++j) {
      inputs.push_back(InputSignal::parse(signal_specs[signal_specs.size() == 1 ? 0 : j]));
    }
  }
  if (static_cast<Index>(inputs.size()) != m.system.inputs()) {
    throw Error("model declares no input signals; pass --signal");
  }
  const StateSpaceSystem ss = state_space_of(m);
  if (!dt || !horizon) {
    if (ss.states() > kDenseH2Limit) {
      throw Error("default --dt and --horizon need the poles of a model with at most " +
                  std::to_string(kDenseH2Limit) + " states; pass both explicitly");
    }
    const TimeScales scales = time_scales(ss);
    if (!dt) dt = default_time_step(scales);
    if (!horizon) horizon = default_horizon(scales, inputs);
  }
  const Trajectory traj =
      backward_euler(ss, inputs, stacked_state(m.x0, m.v0, m.system.dofs()), *dt, *horizon);
  std::filesystem::create_directories(out_dir);
  write_trajectory_csv(out_dir / "trajectory.csv", traj);
  std::ostringstream os;
  os.precision(6);
  os << "simulated " << traj.times.size() - 1 << " steps of dt " << *dt << " s to t = "
     << traj.times.back() << " s; wrote " << (out_dir / "trajectory.csv").string() << '\n';
  out << os.str();
  return 0;
}

double model_h2(const LoadedModel& m) {
  require_stable(m.system, "model");
  return h2_norm(m.system);
}

int cmd_h2(const std::string& a_path, const std::string& b_path, std::ostream& out) {
  const LoadedModel a = load_model(a_path);
  if (b_path.empty()) {
    out << g17(model_h2(a)) << '\n';
    return 0;
  }
  const LoadedModel b = load_model(b_path);
  require_stable(a.system, "first model");
  require_stable(b.system, "second model");
  out << g17(h2_error(state_space_of(a), state_space_of(b))) << '\n';
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Certify consistency between lumped and distributed mechanical models", "lumpcheck"};
  app.require_subcommand(1);

  CheckOptions opt;
  std::string out_dir = ".";
  std::string lpm_path, dpm_path, model_a, model_b, model_path;
  std::vector<std::string> signal_specs;
  std::optional<double> dt, horizon;

  auto add_reduce_flags = [&](CLI::App* cmd) {
    cmd->add_option("--target", opt.target, "relative H2 target of the reduction")
        ->capture_default_str();
    cmd->add_option("--max-order", opt.max_order, "largest ROM order")->capture_default_str();
    cmd->add_option("--seed-grid", opt.seed_grid, "shift magnitudes in the seed grid")
        ->capture_default_str();
    cmd->add_option("--out", out_dir, "output directory")->capture_default_str();
  };

  auto* check = app.add_subcommand("check", "bound the LPM/DPM output error and give a verdict");
  check->add_option("lpm", lpm_path, "LPM document")->required();
  check->add_option("dpm", dpm_path, "DPM manifest")->required();
  check->add_option("--tol", opt.tol, "relative tolerance of the verdict")->capture_default_str();
  check->add_option("--mass-tol", opt.mass_tol, "relative tolerance of the mass match")
      ->capture_default_str();
  check->add_option("--source-tol", opt.source_tol, "absolute tolerance of the IC/source match")
      ->capture_default_str();
  check->add_flag("--validate", opt.validate, "also simulate both models and test the bound");
  check->add_option("--dt", dt, "validation time step (s)");
  check->add_option("--horizon", horizon, "validation horizon (s)");
  add_reduce_flags(check);

  auto* reduce = app.add_subcommand("reduce", "cumulative reduction of a DPM");
  reduce->add_option("dpm", dpm_path, "DPM manifest")->required();
  add_reduce_flags(reduce);

  auto* simulate = app.add_subcommand("simulate", "backward Euler simulation of one model");
  simulate->add_option("model", model_path, "LPM document or DPM manifest")->required();
  simulate->add_option("--signal", signal_specs, "input, e.g. step:amplitude=1,horizon=4");
  simulate->add_option("--dt", dt, "time step (s)");
  simulate->add_option("--horizon", horizon, "end time (s)");
  simulate->add_option("--out", out_dir, "output directory")->capture_default_str();

  auto* h2 = app.add_subcommand("h2", "H2 norm of a model, or H2 error between two");
  h2->add_option("model_a", model_a, "LPM document or DPM manifest")->required();
  h2->add_option("model_b", model_b, "second model");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    opt.threads = threads_from_env();
    if (check->parsed()) {
      opt.dt = dt;
      opt.horizon = horizon;
      if (dt && !(*dt > 0.0)) throw Error("--dt must be positive");
      if (horizon && !(*horizon > 0.0)) throw Error("--horizon must be positive");
      return cmd_check(lpm_path, dpm_path, opt, out_dir, out);
    }
    if (reduce->parsed()) return cmd_reduce(dpm_path, opt, out_dir, out);
    if (simulate->parsed()) return cmd_simulate(model_path, signal_specs, dt, horizon, out_dir, out);
    if (h2->parsed()) return cmd_h2(model_a, model_b, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  err << "error: no command\n";
  return 2;
}

}  // namespace lumpcheck
