// h2grid: run a scenario, run a study, or validate a configuration file.
//
//   h2grid run --scenario <file> --out <dir> [--dt <s>] [--duration <s>]
//   h2grid study --config <file> --out <dir>
//   h2grid validate --scenario <file>
//
// Exit status: 0 success, 2 configuration or I/O setup error, 3 simulation error.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "h2grid/h2grid.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitSimulation = 3;

struct Overrides {
  std::optional<double> dt;
  std::optional<double> duration;
  std::optional<bool> secondary;
  std::optional<std::string> mode;

  void apply(h2grid::Scenario& sc) const {
    if (dt) sc.dt = *dt;
    if (duration) sc.duration = *duration;
    if (secondary) sc.secondary_enabled = *secondary;
    if (mode) sc.electrolyzer_mode = h2grid::parse_mode(*mode);
  }
};

void add_overrides(CLI::App* cmd, Overrides& o, bool per_case) {
  cmd->add_option("--dt", o.dt, "time step in seconds (default 1e-4)")->check(CLI::PositiveNumber);
  cmd->add_option("--duration", o.duration, "simulated time in seconds")->check(CLI::PositiveNumber);
  if (per_case) {
    cmd->add_option("--secondary", o.secondary, "enable the secondary controller (true/false)");
    cmd->add_option("--mode", o.mode, "electrolyzer mode")
        ->check(CLI::IsMember({"constant_power", "current_control"}));
  }
}

void report_error(const h2grid::Error& e) {
  std::cerr << "error[" << h2grid::to_string(e.kind()) << "]";
  if (e.sim_time()) std::cerr << " at t=" << *e.sim_time() << " s";
  std::cerr << ": " << e.detail() << '\n';
}

// File-system problems are setup errors, reported like bad configuration.
int exit_code_for(const h2grid::Error& e) {
  return e.is_config_error() || e.kind() == h2grid::ErrorKind::io ? kExitConfig : kExitSimulation;
}

void print_metrics(const std::string& name, const h2grid::ScenarioMetrics& m) {
  char settle[32] = "never";
  if (m.f_settle) std::snprintf(settle, sizeof settle, "%.3f s", *m.f_settle);
  std::printf("%-28s swing %9.1f kW  f_dev %7.4f Hz  settle %-7s  v_dev %7.5f pu  E_dc %8.3f MJ\n", name.c_str(),
              m.p_g_swing * 1e-3, m.f_nadir_dev, settle, m.v_max_dev, m.e_h2 * 1e-6);
}

int cmd_run(const std::string& path, const std::string& out, const Overrides& o) {
  h2grid::Scenario sc = h2grid::load_scenario(path);
  o.apply(sc);
  sc.validate();
  h2grid::ensure_writable_directory(out);
  std::printf("scenario %s: dt=%g s, duration=%g s, mode=%s, secondary=%s\n", sc.name.c_str(), sc.dt, sc.duration,
              std::string(h2grid::to_string(sc.electrolyzer_mode)).c_str(), sc.secondary_enabled ? "on" : "off");
  const auto result = h2grid::run(sc);
  h2grid::emit_run_outputs(out, sc, result);
  print_metrics(sc.name, result.metrics);
  return kExitOk;
}

int cmd_study(const std::string& path, const std::string& out, const Overrides& o) {
  h2grid::Study study = h2grid::load_study(path);
  o.apply(study.base);
  study.validate();
  h2grid::ensure_writable_directory(out);
  std::printf("study %s: %zu cases, dt=%g s, duration=%g s\n", study.name.c_str(), study.cases.size(),
              study.base.dt, study.base.duration);
  const auto report = h2grid::run_study(study);
  h2grid::emit_study_outputs(out, study, report);
  int status = kExitOk;
  for (const auto& c : report.cases) {
    if (c.result) {
      print_metrics(c.spec.name, c.result->metrics);
      continue;
    }
    std::cerr << "case " << c.spec.name << ": error[" << h2grid::to_string(*c.error_kind) << "]";
    if (c.error_time) std::cerr << " at t=" << *c.error_time << " s";
    std::cerr << ": " << c.error_message << '\n';
    status = kExitSimulation;
  }
  return status;
}

int cmd_validate(const std::string& path) {
  const auto doc = h2grid::load_config(path);
  if (const auto* sc = std::get_if<h2grid::Scenario>(&doc)) {
    std::printf("%s: valid scenario '%s' (dt=%g s, duration=%g s, %zu events)\n", path.c_str(), sc->name.c_str(),
                sc->dt, sc->duration, sc->events.size());
  } else {
    const auto& st = std::get<h2grid::Study>(doc);
    std::printf("%s: valid study '%s' (%zu cases, dt=%g s, duration=%g s, %zu events)\n", path.c_str(),
                st.name.c_str(), st.cases.size(), st.base.dt, st.base.duration, st.base.events.size());
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Phasor-domain microgrid simulator with a grid-supporting electrolyzer"};
  app.require_subcommand(1);

  std::string scenario_path, study_path, out_dir;
  Overrides run_overrides, study_overrides;

  auto* run = app.add_subcommand("run", "simulate one scenario");
  run->add_option("--scenario", scenario_path, "scenario file (YAML)")->required();
  run->add_option("--out", out_dir, "output directory")->required();
  add_overrides(run, run_overrides, true);

  auto* study = app.add_subcommand("study", "simulate every case of a study");
  study->add_option("--config", study_path, "study file (YAML)")->required();
  study->add_option("--out", out_dir, "output directory")->required();
  add_overrides(study, study_overrides, false);

  auto* validate = app.add_subcommand("validate", "check a scenario or study file without simulating");
  validate->add_option("--scenario", scenario_path, "scenario or study file (YAML)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) return cmd_run(scenario_path, out_dir, run_overrides);
    if (*study) return cmd_study(study_path, out_dir, study_overrides);
    return cmd_validate(scenario_path);
  } catch (const h2grid::Error& e) {
    report_error(e);
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error[internal]: " << e.what() << '\n';
    return kExitSimulation;
  }
}
