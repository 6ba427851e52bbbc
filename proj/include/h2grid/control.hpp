#pragma once

// Control laws of the electrolyzer hierarchy: dq power and current references,
// droop / opposite-droop primary control, the discrete PI used by the inner and
// secondary loops, and the multirate secondary regulator.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>

#include "h2grid/errors.hpp"

namespace h2grid {

/// Minimum grid-voltage magnitude (per-unit) accepted when converting power
/// references into current references.
inline constexpr double kVoltageFloor = 0.1;

struct DqPhasor {
  double d = 0.0;
  double q = 0.0;

  double magnitude() const { return std::hypot(d, q); }
  std::complex<double> to_complex() const { return {d, q}; }
  static DqPhasor from_complex(std::complex<double> z) { return {z.real(), z.imag()}; }

  friend bool operator==(const DqPhasor&, const DqPhasor&) = default;
};

/// Active (W) and reactive (var) power. Positive values are consumed by the
/// device that reports them unless the owner states otherwise.
struct PowerPair {
  double p = 0.0;
  double q = 0.0;

  bool finite() const { return std::isfinite(p) && std::isfinite(q); }
  PowerPair operator+(const PowerPair& o) const { return {p + o.p, q + o.q}; }

  friend bool operator==(const PowerPair&, const PowerPair&) = default;
};

enum class SignConvention { load_side, generator_side };

struct DroopParams {
  double k_p = 0.0;  // Hz per W
  double k_q = 0.0;  // per-unit volt per var
  double f_nom = 60.0;
  double e_nom = 1.0;
  double p_set = 0.0;
  double q_set = 0.0;
  SignConvention sign_convention = SignConvention::load_side;

  void validate() const {
    if (!(k_p > 0.0)) throw ValidationError("droop gain k_p must be positive");
    if (!(k_q > 0.0)) throw ValidationError("droop gain k_q must be positive");
    if (!(f_nom > 0.0)) throw ValidationError("nominal frequency f_nom must be positive");
    if (!(e_nom > 0.0)) throw ValidationError("nominal voltage e_nom must be positive");
    if (!std::isfinite(p_set) || !std::isfinite(q_set)) throw ValidationError("droop setpoints must be finite");
  }
};

struct OppositeDroopParams {
  double k_f = 0.0;  // W per Hz
  double k_v = 0.0;  // var per per-unit volt
  double f_nom = 60.0;
  double e_nom = 1.0;
  double p_set = 0.0;
  double q_set = 0.0;
  double p_min = 0.0;
  double p_max = 0.0;
  double q_min = 0.0;
  double q_max = 0.0;

  void validate() const {
    if (!(k_f > 0.0)) throw ValidationError("opposite-droop gain k_f must be positive");
    if (!(k_v > 0.0)) throw ValidationError("opposite-droop gain k_v must be positive");
    if (!(f_nom > 0.0)) throw ValidationError("nominal frequency f_nom must be positive");
    if (!(e_nom > 0.0)) throw ValidationError("nominal voltage e_nom must be positive");
    if (!(p_min <= p_set && p_set <= p_max)) throw ValidationError("active setpoint must satisfy p_min <= p_set <= p_max");
    if (!(q_min <= q_set && q_set <= q_max)) throw ValidationError("reactive setpoint must satisfy q_min <= q_set <= q_max");
  }
};

/// Discrete PI with forward-Euler integration and conditional-integration
/// anti-windup: the integral is frozen while the output is saturated and the
/// error would drive it further into saturation.
struct PiController {
  double kp = 0.0;
  double ki = 0.0;
  double integral_state = 0.0;  // accumulated error * seconds
  double out_min = -std::numeric_limits<double>::infinity();
  double out_max = std::numeric_limits<double>::infinity();

  double step(double error, double dt) {
    const double candidate_integral = integral_state + error * dt;
    const double candidate = kp * error + ki * candidate_integral;
    const bool winding_up = (candidate > out_max && error > 0.0) || (candidate < out_min && error < 0.0);
    if (!winding_up) integral_state = candidate_integral;
    return output(error);
  }

  double output(double error) const { return std::clamp(kp * error + ki * integral_state, out_min, out_max); }
};

struct SecondaryState {
  double delta_f = 0.0;  // Hz
  double delta_e = 0.0;  // per-unit
  PiController f_regulator;
  PiController v_regulator;
  double execution_period = 0.01;
  std::int64_t executions = 0;  // boundaries already consumed

  /// Time of the next execution boundary.
  double next_boundary() const { return static_cast<double>(executions + 1) * execution_period; }
};

struct DroopReferences {
  double f_ref = 0.0;  // Hz
  double e_ref = 0.0;  // per-unit
};

struct PowerMargins {
  double down_p = 0.0;
  double up_p = 0.0;
  double down_q = 0.0;
  double up_q = 0.0;
};

/// Power reserves split across the control hierarchy. The tertiary share is
/// carried as a constant; nothing here optimizes it.
struct SetpointAllocation {
  PowerPair primary;
  PowerPair secondary;
  PowerPair tertiary;

  PowerPair total() const { return primary + secondary + tertiary; }

  void validate(const OppositeDroopParams& owner) const {
    const PowerPair t = total();
    if (!t.finite()) throw ValidationError("setpoint allocation must be finite");
    if (t.p < owner.p_min || t.p > owner.p_max)
      throw ValidationError("allocated active setpoint lies outside [p_min, p_max]");
  }
};

/// Power drawn from the grid for voltage v and incoming current i, both in the
/// same dq frame.
inline PowerPair dq_power(const DqPhasor& v, const DqPhasor& i) {
  return {v.d * i.d + v.q * i.q, v.q * i.d - v.d * i.q};
}

/// Current that draws exactly (p_ref, q_ref) at grid voltage v_g (per-unit).
/// Inverts dq_power, so the denominator is the squared voltage magnitude.
inline DqPhasor dq_current_refs(double p_ref, double q_ref, const DqPhasor& v_g) {
  const double m = v_g.magnitude();
  if (!(m > kVoltageFloor)) {
    throw VoltageCollapse("grid voltage magnitude " + std::to_string(m) + " pu is at or below the " +
                          std::to_string(kVoltageFloor) + " pu floor");
  }
  const double m2 = v_g.d * v_g.d + v_g.q * v_g.q;
  return {(v_g.d * p_ref + v_g.q * q_ref) / m2, (v_g.q * p_ref - v_g.d * q_ref) / m2};
}

/// Frequency and voltage references of a converter in voltage-control mode.
/// The load-side convention raises f* with consumption; the generator side
/// lowers it. Secondary corrections are added in both cases.
inline DroopReferences electrolyzer_droop_refs(const PowerPair& measured, const DroopParams& params,
                                               const SecondaryState* secondary = nullptr) {
  const double sign = params.sign_convention == SignConvention::load_side ? 1.0 : -1.0;
  const double df = secondary ? secondary->delta_f : 0.0;
  const double de = secondary ? secondary->delta_e : 0.0;
  return {params.f_nom + sign * params.k_p * (measured.p - params.p_set) + df,
          params.e_nom + sign * params.k_q * (measured.q - params.q_set) + de};
}

/// Power references of a current-controlled converter from measured frequency
/// and PCC voltage magnitude, saturated to the device limits.
///
/// While secondary control holds f and E at nominal, the corrections it
/// applies to the grid-forming units equal the deviation the primary layer
/// would otherwise see. They are subtracted here so the electrolyzer keeps the
/// same direction of support with and without the secondary layer.
inline PowerPair opposite_droop_refs(double f_meas, double e_meas, const OppositeDroopParams& params,
                                     const SecondaryState* secondary = nullptr) {
  const double df = secondary ? secondary->delta_f : 0.0;
  const double de = secondary ? secondary->delta_e : 0.0;
  const double p = params.p_set + params.k_f * (f_meas - params.f_nom - df);
  const double q = params.q_set + params.k_v * (e_meas - params.e_nom - de);
  return {std::clamp(p, params.p_min, params.p_max), std::clamp(q, params.q_min, params.q_max)};
}

/// Advances the secondary regulators if `now` has reached the next execution
/// boundary; otherwise returns the state untouched. Each execution integrates
/// over exactly one execution period.
inline SecondaryState secondary_step(SecondaryState state, double f_meas, double e_bar, double f_nom, double e_nom,
                                     double now) {
  const double tol = 1e-9 * state.execution_period;
  if (now + tol < state.next_boundary()) return state;
  const double period = state.execution_period;
  state.delta_f = state.f_regulator.step(f_nom - f_meas, period);
  state.delta_e = state.v_regulator.step(e_nom - e_bar, period);
  // Consume every boundary up to now; a late call executes once.
  while (state.next_boundary() <= now + tol) ++state.executions;
  return state;
}

inline PowerMargins power_margins(const OppositeDroopParams& params) {
  return {params.p_set - params.p_min, params.p_max - params.p_set, params.q_set - params.q_min,
          params.q_max - params.q_set};
}

}  // namespace h2grid
