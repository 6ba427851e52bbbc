#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "h2grid/plant.hpp"

using namespace h2grid;

namespace {

constexpr double kDt = 1e-4;

DerState der_at_setpoint() {
  const DerParams p;
  return DerState::settled(p, {p.p_set_pu * p.rated_p, p.q_set_pu * p.rated_q});
}

ElectrolyzerState run_electrolyzer(ElectrolyzerState s, DqPhasor v, double f, double e, double seconds,
                                   double dt = kDt) {
  const auto n = static_cast<long>(std::llround(seconds / dt));
  for (long k = 0; k < n; ++k) s = electrolyzer_step(s, v, f, e, nullptr, dt);
  return s;
}

// The inner loop's slow root sits at -ki/kp = -0.01 1/s, so full convergence
// from a cold start takes a few hundred seconds.
ElectrolyzerState settled_at_nominal() {
  return run_electrolyzer(ElectrolyzerState::make(ElectrolyzerParams{}, ElectrolyzerMode::current_control),
                          {1.0, 0.0}, 60.0, 1.0, 600.0, 1e-3);
}

}  // namespace

TEST(Der, EquilibriumOnlyAdvancesPhase) {
  const DerParams p;
  DerState s = der_at_setpoint();
  EXPECT_EQ(s.frequency, 60.0);
  EXPECT_EQ(s.voltage_mag, 1.0);
  const DerState next = der_step(s, {p.p_set_pu * p.rated_p, p.q_set_pu * p.rated_q}, kDt);
  EXPECT_EQ(next.frequency, 60.0);
  EXPECT_EQ(next.voltage_mag, 1.0);
  EXPECT_EQ(next.p_filt, s.p_filt);
  EXPECT_NEAR(next.phase, 2.0 * M_PI * 60.0 * kDt, 1e-15);
}

TEST(Der, StepResponseFollowsExponential) {
  const DerParams p;
  DerState s = der_at_setpoint();
  const double p0 = s.p_filt, p1 = p0 + 0.5e6;
  const double k_p = p.frequency_droop * p.f_nom / p.rated_p;
  double previous = s.frequency;
  for (int n = 1; n <= 2000; ++n) {
    s = der_step(s, {p1, s.q_filt}, kDt);
    const double filt = p1 + (p0 - p1) * std::exp(-n * kDt / p.filter_time_constant);
    ASSERT_NEAR(s.p_filt, filt, 1e-6);
    ASSERT_NEAR(s.frequency, 60.0 - k_p * (filt - p0), 1e-10);
    ASSERT_LT(s.frequency, previous);
    previous = s.frequency;
    if (n == 200) {
      EXPECT_NEAR((s.p_filt - p0) / (p1 - p0), 1.0 - std::exp(-1.0), 1e-9);
    }
  }
}

TEST(Der, TenthPerUnitPowerGivesHundredthPerUnitFrequency) {
  const DerParams p;
  DerState s = der_at_setpoint();
  const PowerPair raised{p.p_set_pu * p.rated_p + 0.1 * p.rated_p, p.q_set_pu * p.rated_q};
  for (int n = 0; n < 20000; ++n) s = der_step(s, raised, kDt);
  EXPECT_NEAR((s.frequency - 60.0) / 60.0, -0.01, 1e-12);
}

TEST(Der, VoltageDroopGeneratorSide) {
  const DerParams p;
  DerState s = der_at_setpoint();
  const PowerPair more_q{p.p_set_pu * p.rated_p, p.q_set_pu * p.rated_q + 0.1 * p.rated_q};
  for (int n = 0; n < 20000; ++n) s = der_step(s, more_q, kDt);
  EXPECT_NEAR(s.voltage_mag, 0.99, 1e-12);
}

TEST(Der, LeavingGuardBandTrips) {
  DerState s = der_at_setpoint();
  EXPECT_THROW(
      {
        for (int n = 0; n < 20000; ++n) s = der_step(s, {10.0e6, s.q_filt}, kDt);
      },
      FrequencyTrip);
}

TEST(Der, RejectsNonFiniteMeasurement) {
  EXPECT_THROW(der_step(der_at_setpoint(), {NAN, 0.0}, kDt), ValidationError);
}

TEST(DerParams, Validation) {
  DerParams p;
  EXPECT_NO_THROW(p.validate());
  p.filter_time_constant = 0.0;
  EXPECT_THROW(p.validate(), ValidationError);
}

TEST(Electrolyzer, NominalGridConvergesToSetpoint) {
  const auto s = settled_at_nominal();
  EXPECT_NEAR(s.measured.p, 400e3, 400e3 * 1e-5);
  EXPECT_NEAR(s.measured.q, 0.0, 4.0);
}

TEST(Electrolyzer, HeldUnderFrequencyReducesConsumption) {
  const auto s = run_electrolyzer(settled_at_nominal(), {1.0, 0.0}, 59.95, 1.0, 3.0);
  EXPECT_NEAR(s.measured.p, 397375.0, 397375.0 * 1e-3);
}

TEST(Electrolyzer, CurrentTrackingIsFirstOrder) {
  const ElectrolyzerParams p;
  auto s = ElectrolyzerState::make(p, ElectrolyzerMode::current_control);
  // Inner loop: di/dt = kp*e + ki*integral(e); for ki << kp the error decays
  // close to exp(-kp t).
  s = run_electrolyzer(s, {1.0, 0.0}, 60.0, 1.0, 0.1);
  const double expected = 400e3 * (1.0 - std::exp(-p.inner_kp * 0.1));
  EXPECT_NEAR(s.measured.p, expected, 400e3 * 5e-3);
}

TEST(Electrolyzer, ConstantModeHoldsSetpointEveryStep) {
  const ElectrolyzerParams p;
  auto s = ElectrolyzerState::make(p, ElectrolyzerMode::constant_power);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> mag(0.8, 1.2), ang(-1.0, 1.0), f(58.0, 62.0);
  for (int n = 0; n < 1000; ++n) {
    s = electrolyzer_step(s, DqPhasor::from_complex(std::polar(mag(rng), ang(rng))), f(rng), mag(rng), nullptr, kDt);
    ASSERT_NEAR(s.measured.p, 400e3, 1e-6);
    ASSERT_NEAR(s.measured.q, -100e3, 1e-6);
  }
}

TEST(Electrolyzer, StackInvariantsUnderRandomGrid) {
  const ElectrolyzerParams p;
  auto s = ElectrolyzerState::make(p, ElectrolyzerMode::current_control);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> mag(0.9, 1.1), f(57.0, 63.0);
  double last_energy = 0.0;
  for (int n = 0; n < 20000; ++n) {
    s = electrolyzer_step(s, {mag(rng), 0.0}, f(rng), mag(rng), nullptr, kDt);
    ASSERT_GE(s.p_dc, 0.0);
    ASSERT_LE(s.p_dc, p.p_max * 1.01);
    ASSERT_GE(s.h2_energy, last_energy);
    last_energy = s.h2_energy;
  }
}

TEST(Electrolyzer, VoltageCollapsePropagates) {
  const ElectrolyzerParams p;
  auto s = ElectrolyzerState::make(p, ElectrolyzerMode::current_control);
  EXPECT_THROW(electrolyzer_step(s, {0.05, 0.0}, 60.0, 0.05, nullptr, kDt), VoltageCollapse);
}

TEST(Electrolyzer, VoltageControlModeIsNotSimulated) {
  const ElectrolyzerParams p;
  auto s = ElectrolyzerState::make(p, ElectrolyzerMode::voltage_control);
  EXPECT_THROW(electrolyzer_step(s, {1.0, 0.0}, 60.0, 1.0, nullptr, kDt), ValidationError);
}

TEST(Hydrogen, FreshStateIsZero) {
  const auto h = hydrogen_summary(ElectrolyzerState::make(ElectrolyzerParams{}, ElectrolyzerMode::constant_power));
  EXPECT_EQ(h.energy_dc, 0.0);
  EXPECT_EQ(h.h2_proxy, 0.0);
}

TEST(Hydrogen, ConstantDcPowerForOneSecond) {
  ElectrolyzerParams p;
  p.efficiency = 1.0;
  p.constant_q = 0.0;
  auto s = run_electrolyzer(ElectrolyzerState::make(p, ElectrolyzerMode::constant_power), {1.0, 0.0}, 60.0, 1.0, 1.0);
  const auto h = hydrogen_summary(s);
  EXPECT_NEAR(h.energy_dc, 400e3, 1e-6);
  EXPECT_NEAR(h.h2_proxy, 400e3 / (39.4 * 3.6e6), 1e-15);
}

TEST(ElectrolyzerMode, ParseRoundTrip) {
  for (auto m : {ElectrolyzerMode::constant_power, ElectrolyzerMode::voltage_control,
                 ElectrolyzerMode::current_control})
    EXPECT_EQ(parse_mode(to_string(m)), m);
  EXPECT_THROW(parse_mode("supporting"), ValidationError);
}

TEST(ElectrolyzerParams, Validation) {
  ElectrolyzerParams p;
  EXPECT_NO_THROW(p.validate());
  p.k_f = -52500.0;
  EXPECT_THROW(p.validate(), ValidationError);
  p = {};
  p.efficiency = 1.5;
  EXPECT_THROW(p.validate(), ValidationError);
  p = {};
  p.constant_p = 1.0e6;
  EXPECT_THROW(p.validate(), ValidationError);
}
