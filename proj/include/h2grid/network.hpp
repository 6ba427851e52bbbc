#pragma once

// Quasi-static phasor model of a small radial microgrid: one ideal voltage
// source bus, series branches (lines and transformers with real taps),
// constant-impedance loads behind optional breakers, and an electrolyzer
// drawing a controlled current through its own coupling transformer.
//
// All electrical quantities are per-unit on the system power base and the
// voltage base of each bus's zone.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "h2grid/control.hpp"
#include "h2grid/errors.hpp"

namespace h2grid {

using ComplexPhasor = std::complex<double>;

struct PerUnitBase {
  double s_base = 5.0e6;  // VA
  double f_nom = 60.0;    // Hz

  double z_base(double v_base_volts) const { return v_base_volts * v_base_volts / s_base; }
  double i_base(double v_base_volts) const { return s_base / (std::sqrt(3.0) * v_base_volts); }
};

struct BusSpec {
  int id = 0;
  double base_kv = 0.0;  // line-line RMS
};

/// `to_bus` of the branch that joins the PCC to the electrolyzer terminal.
inline constexpr int kElectrolyzerTerminal = -1;
inline constexpr const char* kCouplingBranchName = "electrolyzer_coupling";

struct BranchSpec {
  std::string name;
  int from_bus = 0;
  int to_bus = 0;
  ComplexPhasor impedance;   // per-unit
  double tap_ratio = 1.0;    // off-nominal ratio on the from side
  // Rated (from, to) voltages in kV; present only for transformers.
  std::optional<std::pair<double, double>> rated_kv;

  bool is_transformer() const { return rated_kv.has_value(); }
};

struct LoadSpec {
  std::string name;
  int bus = 0;
  ComplexPhasor impedance;            // per-unit, RL
  std::optional<std::string> breaker; // switched loads only

  /// Impedance drawing `s_at_nominal` (per-unit) at 1.0 pu voltage.
  static ComplexPhasor impedance_for(ComplexPhasor s_at_nominal) { return 1.0 / std::conj(s_at_nominal); }
};

/// Where and through what the electrolyzer converter is connected. The
/// converter terminal is an internal node behind `coupling`.
struct ElectrolyzerAttachment {
  int pcc_bus = 0;
  ComplexPhasor coupling_impedance;
  std::pair<double, double> rated_kv{0.48, 0.07};
};

struct NetworkConfig {
  PerUnitBase base;
  int source_bus = 1;
  std::vector<BusSpec> buses;
  std::vector<BranchSpec> branches;
  std::vector<LoadSpec> loads;
  std::optional<ElectrolyzerAttachment> electrolyzer;
  std::map<std::string, bool> initial_breakers;  // breaker name -> closed
};

using BreakerStates = std::map<std::string, bool>;

struct NetworkSolution {
  std::map<int, ComplexPhasor> bus_voltages;
  std::map<std::string, ComplexPhasor> branch_currents;  // series current, from -> to
  ComplexPhasor terminal_voltage;                         // electrolyzer converter terminal
  ComplexPhasor electrolyzer_current;                     // drawn by the converter
  ComplexPhasor source_current;                           // delivered by the source bus
  // Complex powers, per-unit. Source is generation; the rest is consumption.
  ComplexPhasor source_power;
  ComplexPhasor injection_at_pcc;        // flowing from the PCC bus into the coupling transformer
  ComplexPhasor electrolyzer_power;      // at the converter terminal
  std::map<std::string, ComplexPhasor> load_powers;
  std::map<std::string, ComplexPhasor> branch_losses;

  double magnitude(int bus) const { return std::abs(bus_voltages.at(bus)); }

  ComplexPhasor total_consumption() const {
    ComplexPhasor sum = electrolyzer_power;
    for (const auto& [name, s] : load_powers) sum += s;
    for (const auto& [name, s] : branch_losses) sum += s;
    return sum;
  }
};

struct GridMeasurement {
  double f = 0.0;      // Hz
  double e_pcc = 0.0;  // per-unit
  double e_bar = 0.0;  // per-unit
};

class NetworkModel {
 public:
  static constexpr double kZoneTolerance = 1e-6;
  static constexpr double kSingularRcond = 1e-12;

  const NetworkConfig& config() const { return config_; }
  std::size_t bus_count() const { return config_.buses.size(); }
  std::size_t branch_count() const { return branches_.size(); }
  std::size_t transformer_count() const {
    return static_cast<std::size_t>(std::count_if(branches_.begin(), branches_.end(),
                                                  [](const BranchSpec& b) { return b.is_transformer(); }));
  }
  std::size_t load_count() const { return config_.loads.size(); }
  /// Every branch including the electrolyzer coupling transformer.
  const std::vector<BranchSpec>& branches() const { return branches_; }
  bool has_electrolyzer() const { return config_.electrolyzer.has_value(); }
  int pcc_bus() const { return config_.electrolyzer ? config_.electrolyzer->pcc_bus : config_.source_bus; }
  const BreakerStates& initial_breakers() const { return config_.initial_breakers; }

  bool has_bus(int id) const { return node_index_.count(id) != 0; }
  bool has_breaker(const std::string& name) const {
    return std::any_of(config_.loads.begin(), config_.loads.end(),
                       [&](const LoadSpec& l) { return l.breaker && *l.breaker == name; });
  }

  /// Node-admittance matrix (all nodes, including the source and the
  /// electrolyzer terminal) for the given breaker states.
  Eigen::MatrixXcd admittance(const BreakerStates& breakers) const {
    Eigen::MatrixXcd y = branch_admittance_;
    for (const auto& load : config_.loads) {
      if (load_connected(load, breakers)) {
        const auto k = node_index_.at(load.bus);
        y(k, k) += 1.0 / load.impedance;
      }
    }
    return y;
  }

  int node_of(int bus) const { return static_cast<int>(node_index_.at(bus)); }
  int source_node() const { return node_of(config_.source_bus); }
  std::optional<int> terminal_node() const {
    if (!terminal_index_) return std::nullopt;
    return static_cast<int>(*terminal_index_);
  }
  std::size_t node_count() const { return static_cast<std::size_t>(branch_admittance_.rows()); }

  bool load_connected(const LoadSpec& load, const BreakerStates& breakers) const {
    if (!load.breaker) return true;
    auto it = breakers.find(*load.breaker);
    if (it != breakers.end()) return it->second;
    auto init = config_.initial_breakers.find(*load.breaker);
    return init != config_.initial_breakers.end() && init->second;
  }

 private:
  friend NetworkModel build_network(NetworkConfig config);

  NetworkConfig config_;
  std::vector<BranchSpec> branches_;
  std::map<int, std::size_t> node_index_;
  std::optional<std::size_t> terminal_index_;
  Eigen::MatrixXcd branch_admittance_;
};

namespace detail {

inline bool same_kv(double a, double b) { return std::abs(a - b) <= NetworkModel::kZoneTolerance * std::max(a, b); }

// Stamps a series branch with an ideal real-ratio transformer on the from side.
inline void stamp_branch(Eigen::MatrixXcd& y, std::size_t from, std::size_t to, ComplexPhasor z, double tap) {
  const ComplexPhasor ys = 1.0 / z;
  y(from, from) += ys / (tap * tap);
  y(to, to) += ys;
  y(from, to) -= ys / tap;
  y(to, from) -= ys / tap;
}

}  // namespace detail

/// Validates the description and precomputes the branch admittance structure.
inline NetworkModel build_network(NetworkConfig config) {
  if (!(config.base.s_base > 0.0) || !(config.base.f_nom > 0.0))
    throw ValidationError("per-unit base power and nominal frequency must be positive");
  if (config.buses.empty()) throw TopologyError("network declares no buses");

  NetworkModel model;
  std::map<int, double> kv;
  for (const auto& bus : config.buses) {
    if (bus.id < 0) throw TopologyError("bus ids must be non-negative (got " + std::to_string(bus.id) + ")");
    if (!(bus.base_kv > 0.0)) throw UnitError("bus " + std::to_string(bus.id) + " has a non-positive voltage base");
    if (!kv.emplace(bus.id, bus.base_kv).second) throw TopologyError("duplicate bus id " + std::to_string(bus.id));
    model.node_index_.emplace(bus.id, model.node_index_.size());
  }
  if (!kv.count(config.source_bus))
    throw TopologyError("source bus " + std::to_string(config.source_bus) + " is not declared");

  auto check_bus = [&](int id, const std::string& who) {
    if (!kv.count(id)) throw TopologyError(who + " references undeclared bus " + std::to_string(id));
  };

  std::set<std::pair<int, int>> seen;
  std::set<std::string> names;
  for (const auto& br : config.branches) {
    check_bus(br.from_bus, "branch '" + br.name + "'");
    check_bus(br.to_bus, "branch '" + br.name + "'");
    if (br.from_bus == br.to_bus) throw TopologyError("branch '" + br.name + "' connects a bus to itself");
    if (!names.insert(br.name).second || br.name == kCouplingBranchName)
      throw TopologyError("duplicate or reserved branch name '" + br.name + "'");
    const auto key = std::minmax(br.from_bus, br.to_bus);
    if (!seen.insert(key).second)
      throw TopologyError("duplicate branch between buses " + std::to_string(key.first) + " and " +
                          std::to_string(key.second));
    if (!(std::abs(br.impedance) > 0.0)) throw ValidationError("branch '" + br.name + "' has zero series impedance");
    if (!(br.tap_ratio > 0.0)) throw ValidationError("branch '" + br.name + "' has a non-positive tap ratio");
    const double kv_from = kv.at(br.from_bus);
    const double kv_to = kv.at(br.to_bus);
    if (br.rated_kv) {
      if (!detail::same_kv(br.rated_kv->first, kv_from) || !detail::same_kv(br.rated_kv->second, kv_to))
        throw UnitError("transformer '" + br.name + "' ratings do not match the voltage zones of buses " +
                        std::to_string(br.from_bus) + " and " + std::to_string(br.to_bus));
    } else if (!detail::same_kv(kv_from, kv_to)) {
      throw UnitError("line '" + br.name + "' joins different voltage zones (" + std::to_string(kv_from) + " kV vs " +
                      std::to_string(kv_to) + " kV)");
    }
  }

  std::set<std::string> load_names;
  for (const auto& load : config.loads) {
    check_bus(load.bus, "load '" + load.name + "'");
    if (!load_names.insert(load.name).second) throw TopologyError("duplicate load name '" + load.name + "'");
    if (!(load.impedance.real() > 0.0)) throw ValidationError("load '" + load.name + "' must have positive resistance");
    if (load.impedance.imag() < 0.0) throw ValidationError("load '" + load.name + "' must be resistive-inductive");
  }
  for (const auto& [breaker, closed] : config.initial_breakers) {
    const bool known = std::any_of(config.loads.begin(), config.loads.end(),
                                   [&](const LoadSpec& l) { return l.breaker && *l.breaker == breaker; });
    if (!known) throw TopologyError("initial state given for unknown breaker '" + breaker + "'");
  }

  model.branches_ = config.branches;
  std::size_t n = model.node_index_.size();
  if (config.electrolyzer) {
    const auto& elz = *config.electrolyzer;
    check_bus(elz.pcc_bus, "electrolyzer attachment");
    if (!(std::abs(elz.coupling_impedance) > 0.0))
      throw ValidationError("electrolyzer coupling impedance must be nonzero");
    if (!(elz.rated_kv.second > 0.0)) throw UnitError("electrolyzer terminal voltage rating must be positive");
    if (!detail::same_kv(elz.rated_kv.first, kv.at(elz.pcc_bus)))
      throw UnitError("electrolyzer transformer rating does not match the voltage zone of bus " +
                      std::to_string(elz.pcc_bus));
    model.terminal_index_ = n++;
    model.branches_.push_back(BranchSpec{kCouplingBranchName, elz.pcc_bus, kElectrolyzerTerminal,
                                         elz.coupling_impedance, 1.0, elz.rated_kv});
  }

  // Connectivity from the source over branches.
  std::map<int, std::vector<int>> adjacency;
  for (const auto& br : config.branches) {
    adjacency[br.from_bus].push_back(br.to_bus);
    adjacency[br.to_bus].push_back(br.from_bus);
  }
  std::set<int> reached{config.source_bus};
  std::queue<int> frontier;
  frontier.push(config.source_bus);
  while (!frontier.empty()) {
    const int at = frontier.front();
    frontier.pop();
    for (int next : adjacency[at])
      if (reached.insert(next).second) frontier.push(next);
  }
  for (const auto& bus : config.buses)
    if (!reached.count(bus.id)) throw TopologyError("bus " + std::to_string(bus.id) + " is unreachable from the source");

  model.branch_admittance_ = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (const auto& br : config.branches)
    detail::stamp_branch(model.branch_admittance_, model.node_index_.at(br.from_bus), model.node_index_.at(br.to_bus),
                         br.impedance, br.tap_ratio);
  if (config.electrolyzer)
    detail::stamp_branch(model.branch_admittance_, model.node_index_.at(config.electrolyzer->pcc_bus),
                         *model.terminal_index_, config.electrolyzer->coupling_impedance, 1.0);

  model.config_ = std::move(config);
  return model;
}

/// Linear nodal solve with the source bus held at `source_voltage` and the
/// electrolyzer drawing `electrolyzer_current` at its terminal.
inline NetworkSolution solve(const NetworkModel& network, ComplexPhasor source_voltage,
                             ComplexPhasor electrolyzer_current, const BreakerStates& breakers) {
  if (!(std::abs(source_voltage) > 0.0)) throw ValidationError("source voltage magnitude must be positive");
  const Eigen::MatrixXcd y = network.admittance(breakers);
  const auto n = static_cast<Eigen::Index>(network.node_count());
  const Eigen::Index s = network.source_node();

  Eigen::VectorXcd v = Eigen::VectorXcd::Zero(n);
  v(s) = source_voltage;

  if (n > 1) {
    std::vector<Eigen::Index> unknown;
    for (Eigen::Index k = 0; k < n; ++k)
      if (k != s) unknown.push_back(k);
    const auto m = static_cast<Eigen::Index>(unknown.size());
    Eigen::MatrixXcd yuu(m, m);
    Eigen::VectorXcd rhs(m);
    for (Eigen::Index r = 0; r < m; ++r) {
      for (Eigen::Index c = 0; c < m; ++c) yuu(r, c) = y(unknown[r], unknown[c]);
      rhs(r) = -y(unknown[r], s) * source_voltage;
    }
    if (auto t = network.terminal_node()) {
      for (Eigen::Index r = 0; r < m; ++r)
        if (unknown[r] == *t) rhs(r) -= electrolyzer_current;
    }
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(yuu);
    if (!(lu.rcond() > NetworkModel::kSingularRcond)) throw SingularNetwork("nodal admittance matrix is singular");
    const Eigen::VectorXcd vu = lu.solve(rhs);
    for (Eigen::Index r = 0; r < m; ++r) v(unknown[r]) = vu(r);
  }

  NetworkSolution sol;
  const auto& cfg = network.config();
  for (const auto& bus : cfg.buses) sol.bus_voltages[bus.id] = v(network.node_of(bus.id));

  for (const auto& br : network.branches()) {
    const Eigen::Index from = network.node_of(br.from_bus);
    const Eigen::Index to =
        br.to_bus == kElectrolyzerTerminal ? *network.terminal_node() : network.node_of(br.to_bus);
    const ComplexPhasor current = (v(from) / br.tap_ratio - v(to)) / br.impedance;
    sol.branch_currents[br.name] = current;
    sol.branch_losses[br.name] = current * std::conj(current) * br.impedance;
  }

  for (const auto& load : cfg.loads) {
    if (!network.load_connected(load, breakers)) {
      sol.load_powers[load.name] = 0.0;
      continue;
    }
    const ComplexPhasor vb = v(network.node_of(load.bus));
    sol.load_powers[load.name] = vb * std::conj(vb / load.impedance);
  }

  sol.source_current = (y.row(s) * v)(0);
  sol.source_power = source_voltage * std::conj(sol.source_current);
  if (auto t = network.terminal_node()) {
    sol.terminal_voltage = v(*t);
    sol.electrolyzer_current = electrolyzer_current;
    sol.electrolyzer_power = sol.terminal_voltage * std::conj(electrolyzer_current);
    const ComplexPhasor v_pcc = v(network.node_of(network.pcc_bus()));
    sol.injection_at_pcc = v_pcc * std::conj(sol.branch_currents.at(kCouplingBranchName));
  }
  return sol;
}

/// Grid monitoring: the network is single-frequency, so f is the DER's.
inline GridMeasurement measure_frequency_and_voltage(const NetworkSolution& solution, double der_frequency,
                                                     int pcc_bus, const std::vector<int>& monitored_buses) {
  if (monitored_buses.empty()) throw ValidationError("at least one monitored bus is required");
  double sum = 0.0;
  for (int bus : monitored_buses) {
    auto it = solution.bus_voltages.find(bus);
    if (it == solution.bus_voltages.end())
      throw ValidationError("monitored bus " + std::to_string(bus) + " is not in the solution");
    sum += std::abs(it->second);
  }
  return {der_frequency, solution.magnitude(pcc_bus), sum / static_cast<double>(monitored_buses.size())};
}

}  // namespace h2grid
