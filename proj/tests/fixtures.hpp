#pragma once

#include <complex>

#include "h2grid/simulation.hpp"

namespace h2grid::fixtures {

// Three-bus microgrid with the default impedances shipped in
// configs/paper_study.yaml, built in code so unit tests do not depend on the
// config parser.
inline NetworkConfig three_bus_network() {
  NetworkConfig cfg;
  cfg.base = {5.0e6, 60.0};
  cfg.source_bus = 1;
  cfg.buses = {{1, 13.2}, {2, 13.2}, {3, 0.48}};
  cfg.branches = {
      {"line_1_2", 1, 2, {0.01, 0.05}, 1.0, std::nullopt},
      {"xfmr_2_3", 2, 3, {0.005, 0.03}, 1.0, std::pair{13.2, 0.48}},
  };
  cfg.loads = {
      {"Z1", 2, LoadSpec::impedance_for({3.7e6 / 5.0e6, 1.2e6 / 5.0e6}), std::nullopt},
      {"Z2", 2, LoadSpec::impedance_for({0.5e6 / 5.0e6, 0.15e6 / 5.0e6}), "S"},
  };
  cfg.electrolyzer = ElectrolyzerAttachment{3, {0.005, 0.03}, {0.48, 0.07}};
  cfg.initial_breakers = {{"S", false}};
  return cfg;
}

inline Scenario study_scenario(ElectrolyzerMode mode, bool secondary) {
  Scenario sc;
  sc.name = "test";
  sc.network = three_bus_network();
  sc.electrolyzer_mode = mode;
  sc.secondary_enabled = secondary;
  sc.events = {{2.2, "S", true}, {3.2, "S", false}};
  return sc;
}

// Moves the DER setpoints onto the operating point reached with the source at
// nominal voltage and frequency, so a run without events sits exactly at
// f = f_nom and E = e_nom.
inline void calibrate_der_setpoints(Scenario& sc) {
  const NetworkModel net = build_network(sc.network);
  const double s_base = sc.network.base.s_base;
  const auto elz = ElectrolyzerState::make(sc.electrolyzer, sc.electrolyzer_mode);
  ComplexPhasor current = 0.0;
  NetworkSolution sol;
  for (int iter = 0; iter < 200; ++iter) {
    sol = solve(net, sc.der.e_nom, current, net.initial_breakers());
    const PowerPair ref = elz.power_reference(sc.der.f_nom, sol.magnitude(net.pcc_bus()), nullptr);
    current = dq_current_refs(ref.p / s_base, ref.q / s_base, DqPhasor::from_complex(sol.terminal_voltage))
                  .to_complex();
  }
  sol = solve(net, sc.der.e_nom, current, net.initial_breakers());
  sc.der.p_set_pu = sol.source_power.real() * s_base / sc.der.rated_p;
  sc.der.q_set_pu = sol.source_power.imag() * s_base / sc.der.rated_q;
}

inline Scenario equilibrium_scenario(ElectrolyzerMode mode, bool secondary) {
  Scenario sc = study_scenario(mode, secondary);
  sc.name = "equilibrium";
  sc.events.clear();
  sc.duration = 1.0;
  calibrate_der_setpoints(sc);
  return sc;
}

}  // namespace h2grid::fixtures
