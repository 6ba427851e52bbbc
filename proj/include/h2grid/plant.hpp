#pragma once

// Device models advanced once per time step against the latest network
// solution: the droop-controlled DER that forms the grid, and the electrolyzer
// converter with its stack proxy.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <string_view>

#include "h2grid/control.hpp"
#include "h2grid/errors.hpp"

namespace h2grid {

struct DerParams {
  double rated_p = 5.0e6;   // W
  double rated_q = 5.0e6;   // var
  double p_set_pu = 0.85;   // of rated_p
  double q_set_pu = 0.85;   // of rated_q
  double frequency_droop = 0.1;  // per-unit frequency per per-unit power
  double voltage_droop = 0.1;    // per-unit voltage per per-unit reactive power
  double filter_time_constant = 0.02;
  double f_nom = 60.0;
  double e_nom = 1.0;
  double f_min = 55.0;
  double f_max = 65.0;

  DroopParams droop() const {
    return {frequency_droop * f_nom / rated_p, voltage_droop * e_nom / rated_q, f_nom, e_nom, p_set_pu * rated_p,
            q_set_pu * rated_q, SignConvention::generator_side};
  }

  void validate() const {
    if (!(rated_p > 0.0) || !(rated_q > 0.0)) throw ValidationError("DER ratings must be positive");
    if (!(filter_time_constant > 0.0)) throw ValidationError("DER filter time constant t_f must be positive");
    if (!(f_min < f_nom && f_nom < f_max)) throw ValidationError("DER guard band must contain f_nom");
    droop().validate();
  }
};

struct DerState {
  DroopParams params;
  double p_filt = 0.0;  // W
  double q_filt = 0.0;  // var
  double t_f = 0.02;
  double frequency = 60.0;
  double voltage_mag = 1.0;
  double phase = 0.0;  // rad, wrapped to [0, 2pi)
  double f_min = 55.0;
  double f_max = 65.0;

  /// State whose filters already hold `measured`, with f and E on the droop line.
  static DerState settled(const DerParams& p, const PowerPair& measured, const SecondaryState* secondary = nullptr) {
    DerState s;
    s.params = p.droop();
    s.p_filt = measured.p;
    s.q_filt = measured.q;
    s.t_f = p.filter_time_constant;
    s.f_min = p.f_min;
    s.f_max = p.f_max;
    const auto refs = electrolyzer_droop_refs({s.p_filt, s.q_filt}, s.params, secondary);
    s.frequency = refs.f_ref;
    s.voltage_mag = refs.e_ref;
    return s;
  }
};

/// First-order lag on measured power (exact for piecewise-constant input),
/// then generator-side droop plus any secondary correction.
inline DerState der_step(DerState state, const PowerPair& measured, double dt,
                         const SecondaryState* secondary = nullptr) {
  if (!(dt > 0.0)) throw ValidationError("time step must be positive");
  if (!measured.finite()) throw ValidationError("DER power measurement is not finite");
  const double alpha = -std::expm1(-dt / state.t_f);
  state.p_filt += alpha * (measured.p - state.p_filt);
  state.q_filt += alpha * (measured.q - state.q_filt);
  const auto refs = electrolyzer_droop_refs({state.p_filt, state.q_filt}, state.params, secondary);
  state.frequency = refs.f_ref;
  state.voltage_mag = refs.e_ref;
  if (state.frequency < state.f_min || state.frequency > state.f_max) {
    throw FrequencyTrip("DER frequency " + std::to_string(state.frequency) + " Hz left the [" +
                        std::to_string(state.f_min) + ", " + std::to_string(state.f_max) + "] Hz guard band");
  }
  state.phase = std::fmod(state.phase + 2.0 * std::numbers::pi * state.frequency * dt, 2.0 * std::numbers::pi);
  return state;
}

enum class ElectrolyzerMode { constant_power, voltage_control, current_control };

inline std::string_view to_string(ElectrolyzerMode mode) {
  switch (mode) {
    case ElectrolyzerMode::constant_power: return "constant_power";
    case ElectrolyzerMode::voltage_control: return "voltage_control";
    case ElectrolyzerMode::current_control: return "current_control";
  }
  return "unknown";
}

inline ElectrolyzerMode parse_mode(std::string_view text) {
  if (text == "constant_power") return ElectrolyzerMode::constant_power;
  if (text == "voltage_control") return ElectrolyzerMode::voltage_control;
  if (text == "current_control") return ElectrolyzerMode::current_control;
  throw ValidationError("unknown electrolyzer mode '" + std::string(text) +
                        "' (expected constant_power, voltage_control or current_control)");
}

/// Hydrogen proxy: kilograms at the higher heating value (39.4 kWh/kg) of the
/// DC energy delivered to the stack.
inline constexpr double kH2KgPerJoule = 1.0 / (39.4 * 3.6e6);

struct ElectrolyzerParams {
  double rated_p = 0.75e6;
  double rated_q = 0.5e6;
  double p_set = 0.4e6;
  double q_set = 0.0;
  double k_f = 52500.0;  // W/Hz
  double k_v = 1.0e4;    // var/pu
  double p_min = 0.0;
  double p_max = 0.75e6;
  double q_min = -0.5e6;
  double q_max = 0.5e6;
  double inner_kp = 10.0;
  double inner_ki = 0.1;
  double inner_rate_limit = 1.0e3;  // pu current per second
  double efficiency = 0.95;
  double constant_p = 0.4e6;
  double constant_q = -0.1e6;
  double f_nom = 60.0;
  double e_nom = 1.0;
  double s_base = 5.0e6;

  OppositeDroopParams opposite_droop() const {
    return {k_f, k_v, f_nom, e_nom, p_set, q_set, p_min, p_max, q_min, q_max};
  }

  void validate() const {
    opposite_droop().validate();
    if (!(rated_p > 0.0) || !(rated_q > 0.0)) throw ValidationError("electrolyzer ratings must be positive");
    if (p_min < 0.0) throw ValidationError("electrolyzer p_min must be nonnegative (it can only consume)");
    if (p_max > rated_p) throw ValidationError("electrolyzer p_max exceeds its rating");
    if (!(efficiency > 0.0 && efficiency <= 1.0)) throw ValidationError("stack efficiency must lie in (0, 1]");
    if (!(inner_kp > 0.0) || inner_ki < 0.0) throw ValidationError("inner current loop gains must be kp > 0, ki >= 0");
    if (!(inner_rate_limit > 0.0)) throw ValidationError("inner current rate limit must be positive");
    if (constant_p < p_min || constant_p > p_max)
      throw ValidationError("constant-mode active power must lie within [p_min, p_max]");
    if (constant_q < q_min || constant_q > q_max)
      throw ValidationError("constant-mode reactive power must lie within [q_min, q_max]");
    if (!(s_base > 0.0)) throw ValidationError("per-unit base power must be positive");
  }
};

struct ElectrolyzerState {
  ElectrolyzerMode mode = ElectrolyzerMode::current_control;
  OppositeDroopParams od_params;
  PiController inner_d;
  PiController inner_q;
  DqPhasor i_actual;      // per-unit, drawn from the grid
  PowerPair measured;     // W / var at the converter terminal
  PowerPair constant_setpoint;
  double s_base = 5.0e6;
  double p_dc = 0.0;
  double efficiency = 0.95;
  double h2_energy = 0.0;  // J

  static ElectrolyzerState make(const ElectrolyzerParams& p, ElectrolyzerMode mode) {
    ElectrolyzerState s;
    s.mode = mode;
    s.od_params = p.opposite_droop();
    s.inner_d = PiController{p.inner_kp, p.inner_ki, 0.0, -p.inner_rate_limit, p.inner_rate_limit};
    s.inner_q = s.inner_d;
    s.constant_setpoint = {p.constant_p, p.constant_q};
    s.s_base = p.s_base;
    s.efficiency = p.efficiency;
    return s;
  }

  /// Power the converter is asked to draw for the given grid conditions.
  PowerPair power_reference(double f_meas, double e_meas, const SecondaryState* secondary) const {
    if (mode == ElectrolyzerMode::constant_power) return constant_setpoint;
    return opposite_droop_refs(f_meas, e_meas, od_params, secondary);
  }
};

/// One step of the electrolyzer converter. Constant-power mode draws its
/// setpoint exactly; current-control mode tracks the opposite-droop current
/// reference through the inner PI loops, the converter current integrating
/// the PI output.
inline ElectrolyzerState electrolyzer_step(ElectrolyzerState state, const DqPhasor& grid_v, double f_meas,
                                           double e_meas, const SecondaryState* secondary, double dt) {
  if (!(dt > 0.0)) throw ValidationError("time step must be positive");
  switch (state.mode) {
    case ElectrolyzerMode::constant_power: {
      const PowerPair ref = state.constant_setpoint;
      state.i_actual = dq_current_refs(ref.p / state.s_base, ref.q / state.s_base, grid_v);
      break;
    }
    case ElectrolyzerMode::current_control: {
      const PowerPair ref = state.power_reference(f_meas, e_meas, secondary);
      const DqPhasor i_ref = dq_current_refs(ref.p / state.s_base, ref.q / state.s_base, grid_v);
      state.i_actual.d += state.inner_d.step(i_ref.d - state.i_actual.d, dt) * dt;
      state.i_actual.q += state.inner_q.step(i_ref.q - state.i_actual.q, dt) * dt;
      break;
    }
    case ElectrolyzerMode::voltage_control:
      throw ValidationError(
          "voltage-control mode is a reference generator only (see electrolyzer_droop_refs); "
          "the network simulation drives the electrolyzer in constant_power or current_control mode");
  }
  const PowerPair pu = dq_power(grid_v, state.i_actual);
  state.measured = {pu.p * state.s_base, pu.q * state.s_base};
  state.p_dc = std::max(0.0, state.measured.p * state.efficiency);
  state.h2_energy += state.p_dc * dt;
  return state;
}

struct HydrogenSummary {
  double energy_dc = 0.0;  // J
  double h2_proxy = 0.0;   // kg-equivalent
};

inline HydrogenSummary hydrogen_summary(const ElectrolyzerState& state) {
  return {state.h2_energy, state.h2_energy * kH2KgPerJoule};
}

}  // namespace h2grid
