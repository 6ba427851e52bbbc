#pragma once

// Fixed-step simulation loop. Each step runs, in order: due breaker events,
// the network solve, measurements, the secondary controller (at its own
// execution rate), the electrolyzer, and the DER.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <future>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "h2grid/control.hpp"
#include "h2grid/errors.hpp"
#include "h2grid/network.hpp"
#include "h2grid/plant.hpp"

namespace h2grid {

struct BreakerEvent {
  double time = 0.0;
  std::string breaker;
  bool close = true;
};

struct SecondaryParams {
  double kp_f = 10.0;
  double ki_f = 0.1;
  double kp_v = 10.0;
  double ki_v = 0.1;
  double execution_period = 0.01;
  double delta_f_limit = 2.0;   // Hz
  double delta_e_limit = 0.2;   // per-unit
  // Low-pass applied by the monitoring block to f and E-bar before they reach
  // the regulators. Zero passes the raw measurements through.
  double monitor_time_constant = 0.1;

  SecondaryState initial_state() const {
    SecondaryState s;
    s.execution_period = execution_period;
    s.f_regulator = PiController{kp_f, ki_f, 0.0, -delta_f_limit, delta_f_limit};
    s.v_regulator = PiController{kp_v, ki_v, 0.0, -delta_e_limit, delta_e_limit};
    return s;
  }

  void validate() const {
    if (kp_f < 0.0 || ki_f < 0.0 || kp_v < 0.0 || ki_v < 0.0)
      throw ValidationError("secondary PI gains must be nonnegative");
    if (!(execution_period > 0.0)) throw ValidationError("secondary execution period must be positive");
    if (!(delta_f_limit > 0.0) || !(delta_e_limit > 0.0))
      throw ValidationError("secondary output limits must be positive");
    if (monitor_time_constant < 0.0) throw ValidationError("monitor time constant must be nonnegative");
  }
};

struct Scenario {
  std::string name = "scenario";
  double duration = 5.0;
  double dt = 1.0e-4;
  double record_interval = 1.0e-3;
  bool secondary_enabled = false;
  ElectrolyzerMode electrolyzer_mode = ElectrolyzerMode::current_control;
  std::vector<BreakerEvent> events;
  NetworkConfig network;
  std::vector<int> monitored_buses{1, 3};
  DerParams der;
  ElectrolyzerParams electrolyzer;
  SecondaryParams secondary;

  /// Steps between recorded samples.
  std::size_t record_stride() const {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(record_interval / dt)));
  }
  std::size_t step_count() const { return static_cast<std::size_t>(std::llround(duration / dt)); }

  /// Checks everything that can be checked without building the network.
  void validate() const {
    if (!(duration > 0.0)) throw ValidationError("duration must be positive");
    if (!(dt > 0.0 && dt <= 1.0e-3)) throw ValidationError("dt must satisfy 0 < dt <= 1 ms");
    if (!(record_interval >= dt)) throw ValidationError("record_interval must be at least dt");
    if (std::abs(duration / dt - std::round(duration / dt)) > 1e-6)
      throw ValidationError("duration must be an integer multiple of dt");
    for (std::size_t k = 0; k < events.size(); ++k) {
      if (events[k].time < 0.0 || events[k].time > duration)
        throw ValidationError("event time " + std::to_string(events[k].time) + " s lies outside [0, duration]");
      if (k > 0 && events[k].time < events[k - 1].time) throw ValidationError("events must be sorted by time");
    }
    if (electrolyzer_mode == ElectrolyzerMode::voltage_control)
      throw ValidationError("electrolyzer_mode voltage_control is not supported by the network simulation");
    der.validate();
    electrolyzer.validate();
    secondary.validate();
    if (monitored_buses.empty()) throw ValidationError("monitored_buses must name at least one bus");
  }
};

enum class Column : std::size_t { time, P_G, Q_G, f, V_pcc, V_bar, P_E, Q_E, delta_f, delta_e, p_dc };

inline constexpr std::array<std::string_view, 11> kTraceColumns{
    "time", "P_G", "Q_G", "f", "V_pcc", "V_bar", "P_E", "Q_E", "delta_f", "delta_e", "p_dc"};

/// Column-major trace. Powers in W/var, f in Hz, voltages per-unit.
struct SimulationTrace {
  std::array<std::vector<double>, kTraceColumns.size()> columns;

  std::vector<double>& operator[](Column c) { return columns[static_cast<std::size_t>(c)]; }
  const std::vector<double>& operator[](Column c) const { return columns[static_cast<std::size_t>(c)]; }
  std::size_t size() const { return columns[0].size(); }

  void append(const std::array<double, kTraceColumns.size()>& row) {
    for (std::size_t c = 0; c < row.size(); ++c) columns[c].push_back(row[c]);
  }

  /// Index of the last sample with time <= t (0 if none).
  std::size_t index_at(double t) const {
    const auto& time = (*this)[Column::time];
    auto it = std::upper_bound(time.begin(), time.end(), t + 1e-12);
    return it == time.begin() ? 0 : static_cast<std::size_t>(it - time.begin()) - 1;
  }

  double value_at(Column c, double t) const { return (*this)[c][index_at(t)]; }

  friend bool operator==(const SimulationTrace&, const SimulationTrace&) = default;
};

struct EventWindow {
  double start = 0.0;
  double end = 0.0;
  double last_event = 0.0;
};

struct ScenarioMetrics {
  double p_g_swing = 0.0;          // W
  double f_nadir_dev = 0.0;        // Hz
  std::optional<double> f_settle;  // s after the last event; empty when unsettled
  double v_max_dev = 0.0;          // per-unit, PCC magnitude vs its value at window start
  double e_h2 = 0.0;               // J of DC energy over the window
};

/// Energy totals over the whole run, J. The DER output should equal the sum
/// of the other three.
struct EnergyLedger {
  double der = 0.0;
  double loads = 0.0;
  double losses = 0.0;
  double electrolyzer = 0.0;
};

struct RunResult {
  SimulationTrace trace;
  ScenarioMetrics metrics;
  EventWindow window;
  EnergyLedger energy;
  HydrogenSummary hydrogen;
};

inline constexpr double kSettleBand = 0.01;  // Hz

/// Trapezoidal integral of a column over [t0, t1] restricted to samples.
inline double integrate(const SimulationTrace& trace, Column c, double t0, double t1) {
  const auto& time = trace[Column::time];
  const auto& y = trace[c];
  double sum = 0.0;
  for (std::size_t k = 1; k < trace.size(); ++k) {
    if (time[k - 1] < t0 - 1e-12 || time[k] > t1 + 1e-12) continue;
    sum += 0.5 * (y[k] + y[k - 1]) * (time[k] - time[k - 1]);
  }
  return sum;
}

inline ScenarioMetrics compute_metrics(const SimulationTrace& trace, const EventWindow& window, double f_nom) {
  if (trace.size() == 0) throw ValidationError("cannot compute metrics of an empty trace");
  const auto& time = trace[Column::time];
  if (window.start < time.front() - 1e-9 || window.end > time.back() + 1e-9 || window.start > window.end)
    throw ValidationError("event window lies outside the trace");

  ScenarioMetrics m;
  double p_min = std::numeric_limits<double>::infinity();
  double p_max = -std::numeric_limits<double>::infinity();
  std::optional<std::size_t> last_outside;
  std::size_t last_in_window = 0;
  const double v_ref = trace[Column::V_pcc][trace.index_at(window.start)];
  for (std::size_t k = 0; k < trace.size(); ++k) {
    const double t = time[k];
    if (t < window.start - 1e-12 || t > window.end + 1e-12) continue;
    last_in_window = k;
    p_min = std::min(p_min, trace[Column::P_G][k]);
    p_max = std::max(p_max, trace[Column::P_G][k]);
    const double f_dev = std::abs(trace[Column::f][k] - f_nom);
    m.f_nadir_dev = std::max(m.f_nadir_dev, f_dev);
    m.v_max_dev = std::max(m.v_max_dev, std::abs(trace[Column::V_pcc][k] - v_ref));
    if (t >= window.last_event - 1e-12 && f_dev >= kSettleBand) last_outside = k;
  }
  m.p_g_swing = p_max >= p_min ? p_max - p_min : 0.0;
  if (!last_outside) {
    m.f_settle = 0.0;
  } else if (*last_outside < last_in_window) {
    m.f_settle = time[*last_outside + 1] - window.last_event;
  }
  m.e_h2 = integrate(trace, Column::p_dc, window.start, window.end);
  return m;
}

namespace detail {

struct EngineState {
  DerState der;
  ElectrolyzerState elz;
  SecondaryState secondary;
  double f_monitor = 0.0;
  double e_monitor = 0.0;
};

// Fixed point of the algebraic-plus-droop equations at t = 0 so that a run
// with no events produces a flat trace. With secondary control enabled the
// integrators are preloaded so that f and E-bar sit at nominal.
inline EngineState initial_steady_state(const Scenario& sc, const NetworkModel& net, const BreakerStates& breakers) {
  const double s_base = sc.network.base.s_base;
  EngineState st;
  st.elz = ElectrolyzerState::make(sc.electrolyzer, sc.electrolyzer_mode);
  st.secondary = sc.secondary.initial_state();
  const SecondaryState* sec = sc.secondary_enabled ? &st.secondary : nullptr;
  const DroopParams droop = sc.der.droop();

  double e_src = sc.der.e_nom;
  double f = sc.der.f_nom;
  ComplexPhasor current = 0.0;
  PowerPair s_g;
  bool converged = false;
  for (int iter = 0; iter < 500 && !converged; ++iter) {
    const NetworkSolution sol = solve(net, e_src, current, breakers);
    s_g = {sol.source_power.real() * s_base, sol.source_power.imag() * s_base};
    const GridMeasurement meas = measure_frequency_and_voltage(sol, f, net.pcc_bus(), sc.monitored_buses);
    if (sc.secondary_enabled) {
      st.secondary.delta_f = droop.k_p * (s_g.p - droop.p_set);
      st.secondary.delta_e += sc.der.e_nom - meas.e_bar;
    }
    const DroopReferences refs = electrolyzer_droop_refs(s_g, droop, sec);
    ComplexPhasor next_current = current;
    if (net.has_electrolyzer()) {
      const DqPhasor v_t = DqPhasor::from_complex(sol.terminal_voltage);
      const PowerPair ref = st.elz.power_reference(refs.f_ref, meas.e_pcc, sec);
      next_current = dq_current_refs(ref.p / s_base, ref.q / s_base, v_t).to_complex();
    }
    converged = std::abs(refs.e_ref - e_src) < 1e-13 && std::abs(refs.f_ref - f) < 1e-10 &&
                std::abs(next_current - current) < 1e-13 && iter > 2;
    e_src = refs.e_ref;
    f = refs.f_ref;
    current = next_current;
  }
  if (!converged) throw ValidationError("initial steady state did not converge; check network and setpoints");

  if (sc.secondary_enabled) {
    auto preload = [](PiController& pi, double delta) {
      if (pi.ki > 0.0) pi.integral_state = delta / pi.ki;
    };
    preload(st.secondary.f_regulator, st.secondary.delta_f);
    preload(st.secondary.v_regulator, st.secondary.delta_e);
  }
  st.der = DerState::settled(sc.der, s_g, sec);
  st.elz.i_actual = DqPhasor::from_complex(current);
  const NetworkSolution sol = solve(net, st.der.voltage_mag, current, breakers);
  const GridMeasurement meas = measure_frequency_and_voltage(sol, st.der.frequency, net.pcc_bus(), sc.monitored_buses);
  const PowerPair pu = dq_power(DqPhasor::from_complex(sol.terminal_voltage), st.elz.i_actual);
  st.elz.measured = {pu.p * s_base, pu.q * s_base};
  st.elz.p_dc = std::max(0.0, st.elz.measured.p * st.elz.efficiency);
  st.f_monitor = meas.f;
  st.e_monitor = meas.e_bar;
  return st;
}

}  // namespace detail

inline EventWindow default_window(const Scenario& sc) {
  if (sc.events.empty()) return {0.0, sc.duration, 0.0};
  return {std::max(0.0, sc.events.front().time - 0.2), sc.duration, sc.events.back().time};
}

/// Runs one scenario. Errors raised by a step carry the simulated time.
inline RunResult run(const Scenario& sc) {
  sc.validate();
  const NetworkModel net = build_network(sc.network);
  if (!net.has_electrolyzer()) throw ValidationError("the scenario network has no electrolyzer attachment");
  for (int bus : sc.monitored_buses)
    if (!net.has_bus(bus)) throw ValidationError("monitored bus " + std::to_string(bus) + " is not declared");
  for (const auto& ev : sc.events)
    if (!net.has_breaker(ev.breaker)) throw ValidationError("event references unknown breaker '" + ev.breaker + "'");

  BreakerStates breakers = net.initial_breakers();
  detail::EngineState st;
  try {
    st = detail::initial_steady_state(sc, net, breakers);
  } catch (Error& e) {
    e.set_sim_time(0.0);
    throw;
  }

  const double s_base = sc.network.base.s_base;
  const double f_nom = sc.der.f_nom;
  const double e_nom = sc.der.e_nom;
  const std::size_t steps = sc.step_count();
  const std::size_t stride = sc.record_stride();
  const double a_monitor =
      sc.secondary.monitor_time_constant > 0.0 ? std::exp(-sc.dt / sc.secondary.monitor_time_constant) : 0.0;
  const SecondaryState* sec = sc.secondary_enabled ? &st.secondary : nullptr;

  RunResult result;
  for (auto& col : result.trace.columns) col.reserve(steps / stride + 2);
  std::size_t next_event = 0;
  double t = 0.0;
  try {
    for (std::size_t k = 0; k <= steps; ++k) {
      t = static_cast<double>(k) * sc.dt;
      while (next_event < sc.events.size() && t >= sc.events[next_event].time - 1e-9 * sc.dt) {
        breakers[sc.events[next_event].breaker] = sc.events[next_event].close;
        ++next_event;
      }

      const NetworkSolution sol = solve(net, st.der.voltage_mag, st.elz.i_actual.to_complex(), breakers);
      const PowerPair s_g{sol.source_power.real() * s_base, sol.source_power.imag() * s_base};
      const GridMeasurement meas =
          measure_frequency_and_voltage(sol, st.der.frequency, net.pcc_bus(), sc.monitored_buses);

      if (sc.secondary_enabled) {
        st.f_monitor = a_monitor * st.f_monitor + (1.0 - a_monitor) * meas.f;
        st.e_monitor = a_monitor * st.e_monitor + (1.0 - a_monitor) * meas.e_bar;
        st.secondary = secondary_step(st.secondary, st.f_monitor, st.e_monitor, f_nom, e_nom, t);
      }

      st.elz =
          electrolyzer_step(st.elz, DqPhasor::from_complex(sol.terminal_voltage), meas.f, meas.e_pcc, sec, sc.dt);

      if (k % stride == 0) {
        result.trace.append({t, s_g.p, s_g.q, meas.f, meas.e_pcc, meas.e_bar, st.elz.measured.p, st.elz.measured.q,
                             st.secondary.delta_f, st.secondary.delta_e, st.elz.p_dc});
      }
      if (k == steps) break;

      result.energy.der += sol.source_power.real() * s_base * sc.dt;
      for (const auto& [name, s] : sol.load_powers) result.energy.loads += s.real() * s_base * sc.dt;
      for (const auto& [name, s] : sol.branch_losses) result.energy.losses += s.real() * s_base * sc.dt;
      result.energy.electrolyzer += sol.electrolyzer_power.real() * s_base * sc.dt;

      st.der = der_step(st.der, s_g, sc.dt, sec);
    }
  } catch (Error& e) {
    e.set_sim_time(t);
    throw;
  }

  result.window = default_window(sc);
  result.metrics = compute_metrics(result.trace, result.window, f_nom);
  result.hydrogen = hydrogen_summary(st.elz);
  return result;
}

struct StudyCase {
  std::string name;
  ElectrolyzerMode mode = ElectrolyzerMode::current_control;
  bool secondary_enabled = false;
};

struct Study {
  std::string name = "study";
  Scenario base;
  std::vector<StudyCase> cases;

  Scenario scenario_for(const StudyCase& c) const {
    Scenario s = base;
    s.name = c.name;
    s.electrolyzer_mode = c.mode;
    s.secondary_enabled = c.secondary_enabled;
    return s;
  }

  void validate() const {
    if (cases.empty()) throw ValidationError("a study needs at least one case");
    for (std::size_t i = 0; i < cases.size(); ++i) {
      for (std::size_t j = i + 1; j < cases.size(); ++j)
        if (cases[i].name == cases[j].name) throw ValidationError("duplicate study case name '" + cases[i].name + "'");
      scenario_for(cases[i]).validate();
    }
  }
};

struct CaseOutcome {
  StudyCase spec;
  Scenario scenario;
  std::optional<RunResult> result;
  std::optional<ErrorKind> error_kind;
  std::optional<double> error_time;
  std::string error_message;
};

struct StudyReport {
  std::string name;
  std::vector<CaseOutcome> cases;

  const CaseOutcome* find(std::string_view case_name) const {
    for (const auto& c : cases)
      if (c.spec.name == case_name) return &c;
    return nullptr;
  }
  bool all_ok() const {
    return std::all_of(cases.begin(), cases.end(), [](const CaseOutcome& c) { return c.result.has_value(); });
  }
};

/// Runs every case on the same network and events. A failing case is
/// reported and does not stop the others.
inline StudyReport run_study(const Study& study, bool parallel = true) {
  study.validate();
  StudyReport report;
  report.name = study.name;

  auto run_case = [&study](const StudyCase& c) {
    CaseOutcome out;
    out.spec = c;
    out.scenario = study.scenario_for(c);
    try {
      out.result = run(out.scenario);
    } catch (const Error& e) {
      out.error_kind = e.kind();
      out.error_time = e.sim_time();
      out.error_message = e.detail();
    }
    return out;
  };

  if (parallel) {
    std::vector<std::future<CaseOutcome>> futures;
    for (const auto& c : study.cases) futures.push_back(std::async(std::launch::async, run_case, c));
    for (auto& fut : futures) report.cases.push_back(fut.get());
  } else {
    for (const auto& c : study.cases) report.cases.push_back(run_case(c));
  }
  return report;
}

}  // namespace h2grid
