#pragma once

// YAML scenario / study documents. Every key is known in advance: unknown keys
// are rejected with their location, missing optional keys take the defaults
// documented in docs/config_format.md, and the resolved document can be
// echoed back as JSON (itself valid YAML) to reproduce a run.

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "h2grid/errors.hpp"
#include "h2grid/network.hpp"
#include "h2grid/simulation.hpp"

namespace h2grid {

using ConfigDocument = std::variant<Scenario, Study>;

namespace detail {

inline ParseError parse_error_at(const YAML::Mark& mark, const std::string& message) {
  return ParseError(message, mark.line + 1, mark.column + 1);
}

class MapReader {
 public:
  MapReader(const YAML::Node& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.IsMap()) throw parse_error_at(node_.Mark(), "'" + path_ + "' must be a mapping");
  }

  bool has(const std::string& key) const { return static_cast<bool>(node_[key]); }

  YAML::Node child(const std::string& key) {
    used_.insert(key);
    YAML::Node n = node_[key];
    if (!n) throw parse_error_at(node_.Mark(), "'" + path_ + "' is missing required key '" + key + "'");
    return n;
  }

  std::optional<YAML::Node> optional_child(const std::string& key) {
    used_.insert(key);
    YAML::Node n = node_[key];
    if (!n) return std::nullopt;
    return n;
  }

  template <typename T>
  T get(const std::string& key) {
    return convert<T>(child(key), key);
  }

  template <typename T>
  T get_or(const std::string& key, T fallback) {
    auto n = optional_child(key);
    return n ? convert<T>(*n, key) : fallback;
  }

  std::pair<double, double> pair(const std::string& key) {
    YAML::Node n = child(key);
    if (!n.IsSequence() || n.size() != 2)
      throw parse_error_at(n.Mark(), "'" + path_ + "." + key + "' must be a two-element list");
    return {convert<double>(n[0], key), convert<double>(n[1], key)};
  }

  const YAML::Mark mark() const { return node_.Mark(); }
  const std::string& path() const { return path_; }

  /// Rejects keys that were never read.
  void finish() const {
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!used_.count(key)) throw parse_error_at(kv.first.Mark(), "unknown key '" + key + "' in '" + path_ + "'");
    }
  }

 private:
  template <typename T>
  T convert(const YAML::Node& n, const std::string& key) const {
    if (!n.IsScalar()) throw parse_error_at(n.Mark(), "'" + path_ + "." + key + "' must be a scalar");
    try {
      return n.as<T>();
    } catch (const YAML::Exception&) {
      throw parse_error_at(n.Mark(), "'" + path_ + "." + key + "' has an invalid value '" + n.Scalar() + "'");
    }
  }

  YAML::Node node_;
  std::string path_;
  std::set<std::string> used_;
};

template <typename Fn>
void validate_block(const MapReader& reader, Fn&& fn) {
  try {
    fn();
  } catch (const ValidationError& e) {
    throw ValidationError(e.detail() + " ('" + reader.path() + "' block at line " +
                          std::to_string(reader.mark().line + 1) + ")");
  }
}

inline ComplexPhasor read_impedance(MapReader& r) { return {r.get<double>("r"), r.get<double>("x")}; }

inline void read_simulation(const YAML::Node& node, Scenario& sc, bool is_study) {
  MapReader r(node, "simulation");
  sc.duration = r.get_or("duration", sc.duration);
  sc.dt = r.get_or("dt", sc.dt);
  sc.record_interval = r.get_or("record_interval", sc.record_interval);
  if (!is_study) {
    sc.secondary_enabled = r.get_or("secondary_enabled", sc.secondary_enabled);
    if (auto mode = r.optional_child("electrolyzer_mode")) {
      try {
        sc.electrolyzer_mode = parse_mode(mode->as<std::string>());
      } catch (const ValidationError& e) {
        throw parse_error_at(mode->Mark(), e.detail());
      }
    }
  }
  r.finish();
}

inline std::vector<BreakerEvent> read_events(const YAML::Node& node) {
  if (!node.IsSequence()) throw parse_error_at(node.Mark(), "'events' must be a list");
  std::vector<BreakerEvent> events;
  for (const auto& item : node) {
    MapReader r(item, "events[]");
    BreakerEvent ev;
    ev.time = r.get<double>("time");
    ev.breaker = r.get<std::string>("breaker");
    const auto action_node = r.child("action");
    const auto action = action_node.as<std::string>();
    if (action != "close" && action != "open")
      throw parse_error_at(action_node.Mark(), "event action must be 'close' or 'open', got '" + action + "'");
    ev.close = action == "close";
    r.finish();
    events.push_back(ev);
  }
  return events;
}

inline NetworkConfig read_network(const YAML::Node& node, Scenario& sc) {
  MapReader r(node, "network");
  NetworkConfig cfg;
  cfg.base.s_base = r.get<double>("s_base");
  cfg.base.f_nom = r.get<double>("f_nom");
  cfg.source_bus = r.get<int>("source_bus");
  sc.der.e_nom = r.get_or("e_nom", 1.0);
  if (auto mon = r.optional_child("monitored_buses")) {
    if (!mon->IsSequence()) throw parse_error_at(mon->Mark(), "'network.monitored_buses' must be a list");
    sc.monitored_buses.clear();
    for (const auto& b : *mon) sc.monitored_buses.push_back(b.as<int>());
  }

  const YAML::Node buses = r.child("buses");
  if (!buses.IsSequence()) throw parse_error_at(buses.Mark(), "'network.buses' must be a list");
  for (const auto& item : buses) {
    MapReader b(item, "network.buses[]");
    cfg.buses.push_back({b.get<int>("id"), b.get<double>("base_kv")});
    b.finish();
  }

  if (auto branches = r.optional_child("branches")) {
    if (!branches->IsSequence()) throw parse_error_at(branches->Mark(), "'network.branches' must be a list");
    for (const auto& item : *branches) {
      MapReader b(item, "network.branches[]");
      BranchSpec br;
      br.name = b.get<std::string>("name");
      br.from_bus = b.get<int>("from");
      br.to_bus = b.get<int>("to");
      br.impedance = read_impedance(b);
      br.tap_ratio = b.get_or("tap", 1.0);
      if (b.has("rated_kv")) br.rated_kv = b.pair("rated_kv");
      b.finish();
      cfg.branches.push_back(br);
    }
  }

  if (auto loads = r.optional_child("loads")) {
    if (!loads->IsSequence()) throw parse_error_at(loads->Mark(), "'network.loads' must be a list");
    for (const auto& item : *loads) {
      MapReader l(item, "network.loads[]");
      LoadSpec load;
      load.name = l.get<std::string>("name");
      load.bus = l.get<int>("bus");
      const bool by_power = l.has("p_at_nominal") || l.has("q_at_nominal");
      const bool by_impedance = l.has("r") || l.has("x");
      if (by_power == by_impedance)
        throw parse_error_at(item.Mark(), "load '" + load.name +
                                              "' needs either r/x or p_at_nominal/q_at_nominal, not both or neither");
      if (by_power) {
        const double p = l.get<double>("p_at_nominal");
        const double q = l.get<double>("q_at_nominal");
        if (!(p > 0.0)) throw ValidationError("load '" + load.name + "' must draw positive active power");
        load.impedance = LoadSpec::impedance_for({p / cfg.base.s_base, q / cfg.base.s_base});
      } else {
        load.impedance = read_impedance(l);
      }
      if (auto breaker = l.optional_child("breaker")) {
        load.breaker = breaker->as<std::string>();
        cfg.initial_breakers[*load.breaker] = l.get_or("closed", false);
      } else if (l.has("closed")) {
        throw parse_error_at(item.Mark(), "load '" + load.name + "' sets 'closed' but has no breaker");
      }
      l.finish();
      cfg.loads.push_back(load);
    }
  }

  if (auto elz = r.optional_child("electrolyzer")) {
    MapReader e(*elz, "network.electrolyzer");
    ElectrolyzerAttachment att;
    att.pcc_bus = e.get<int>("bus");
    att.coupling_impedance = read_impedance(e);
    att.rated_kv = e.pair("rated_kv");
    e.finish();
    cfg.electrolyzer = att;
  }
  r.finish();
  return cfg;
}

inline void read_der(const YAML::Node& node, Scenario& sc) {
  MapReader r(node, "der");
  DerParams& d = sc.der;
  d.rated_p = r.get<double>("rated_p");
  d.rated_q = r.get<double>("rated_q");
  d.p_set_pu = r.get<double>("p_set");
  d.q_set_pu = r.get<double>("q_set");
  d.frequency_droop = r.get<double>("frequency_droop");
  d.voltage_droop = r.get<double>("voltage_droop");
  d.filter_time_constant = r.get<double>("filter_time_constant");
  if (r.has("frequency_guard")) std::tie(d.f_min, d.f_max) = r.pair("frequency_guard");
  r.finish();
  d.f_nom = sc.network.base.f_nom;
  validate_block(r, [&] { d.validate(); });
}

inline void read_electrolyzer(const YAML::Node& node, Scenario& sc) {
  MapReader r(node, "electrolyzer");
  ElectrolyzerParams& e = sc.electrolyzer;
  e.rated_p = r.get<double>("rated_p");
  e.rated_q = r.get<double>("rated_q");
  e.p_set = r.get<double>("p_set");
  e.q_set = r.get<double>("q_set");
  e.k_f = r.get<double>("k_f");
  e.k_v = r.get<double>("k_v");
  e.inner_kp = r.get<double>("inner_kp");
  e.inner_ki = r.get<double>("inner_ki");
  e.p_min = r.get_or("p_min", 0.0);
  e.p_max = r.get_or("p_max", e.rated_p);
  e.q_min = r.get_or("q_min", -e.rated_q);
  e.q_max = r.get_or("q_max", e.rated_q);
  e.inner_rate_limit = r.get_or("inner_rate_limit", e.inner_rate_limit);
  e.efficiency = r.get_or("efficiency", e.efficiency);
  e.constant_p = r.get_or("constant_p", e.constant_p);
  e.constant_q = r.get_or("constant_q", e.constant_q);
  r.finish();
  e.f_nom = sc.network.base.f_nom;
  e.e_nom = sc.der.e_nom;
  e.s_base = sc.network.base.s_base;
  validate_block(r, [&] { e.validate(); });
}

inline void read_secondary(const YAML::Node& node, Scenario& sc) {
  MapReader r(node, "secondary");
  SecondaryParams& s = sc.secondary;
  s.kp_f = r.get<double>("kp_f");
  s.ki_f = r.get<double>("ki_f");
  s.kp_v = r.get<double>("kp_v");
  s.ki_v = r.get<double>("ki_v");
  s.execution_period = r.get<double>("execution_period");
  s.delta_f_limit = r.get_or("delta_f_limit", s.delta_f_limit);
  s.delta_e_limit = r.get_or("delta_e_limit", s.delta_e_limit);
  s.monitor_time_constant = r.get_or("monitor_time_constant", s.monitor_time_constant);
  r.finish();
  validate_block(r, [&] { s.validate(); });
}

inline std::vector<StudyCase> read_cases(const YAML::Node& node) {
  if (!node.IsSequence()) throw parse_error_at(node.Mark(), "'cases' must be a list");
  std::vector<StudyCase> cases;
  for (const auto& item : node) {
    MapReader r(item, "cases[]");
    StudyCase c;
    c.name = r.get<std::string>("name");
    const auto mode = r.child("electrolyzer_mode");
    try {
      c.mode = parse_mode(mode.as<std::string>());
    } catch (const ValidationError& e) {
      throw parse_error_at(mode.Mark(), e.detail());
    }
    c.secondary_enabled = r.get<bool>("secondary_enabled");
    r.finish();
    cases.push_back(c);
  }
  return cases;
}

}  // namespace detail

/// Parses and fully validates a scenario or study document.
inline ConfigDocument parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw detail::parse_error_at(e.mark, e.msg);
  }
  if (!root || root.IsNull()) throw ParseError("configuration document is empty", 1, 1);
  detail::MapReader r(root, "<root>");

  const auto kind_node = r.child("kind");
  const auto kind = kind_node.as<std::string>();
  if (kind != "scenario" && kind != "study")
    throw detail::parse_error_at(kind_node.Mark(), "'kind' must be 'scenario' or 'study', got '" + kind + "'");
  const bool is_study = kind == "study";

  Scenario sc;
  sc.name = r.get_or<std::string>("name", kind);
  if (auto sim = r.optional_child("simulation")) detail::read_simulation(*sim, sc, is_study);
  if (auto events = r.optional_child("events")) sc.events = detail::read_events(*events);
  sc.network = detail::read_network(r.child("network"), sc);
  detail::read_der(r.child("der"), sc);
  detail::read_electrolyzer(r.child("electrolyzer"), sc);
  detail::read_secondary(r.child("secondary"), sc);

  std::vector<StudyCase> cases;
  if (is_study) cases = detail::read_cases(r.child("cases"));
  r.finish();

  // Topology, zone and cross-reference checks.
  const NetworkModel net = build_network(sc.network);
  if (!net.has_electrolyzer()) throw ValidationError("network.electrolyzer attachment is required");
  for (int bus : sc.monitored_buses)
    if (!net.has_bus(bus)) throw ValidationError("monitored bus " + std::to_string(bus) + " is not declared");
  for (const auto& ev : sc.events)
    if (!net.has_breaker(ev.breaker)) throw ValidationError("event references unknown breaker '" + ev.breaker + "'");

  if (is_study) {
    Study study;
    study.name = sc.name;
    study.base = sc;
    study.cases = std::move(cases);
    study.validate();
    return study;
  }
  sc.validate();
  return sc;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline ConfigDocument load_config(const std::string& path) { return parse_config(read_text_file(path)); }

inline Scenario load_scenario(const std::string& path) {
  auto doc = load_config(path);
  if (auto* sc = std::get_if<Scenario>(&doc)) return *sc;
  throw ValidationError("'" + path + "' is a study, expected a scenario");
}

inline Study load_study(const std::string& path) {
  auto doc = load_config(path);
  if (auto* st = std::get_if<Study>(&doc)) return *st;
  throw ValidationError("'" + path + "' is a scenario, expected a study");
}

// ---------------------------------------------------------------------------
// Resolved-configuration echo

namespace detail {

inline nlohmann::json common_json(const Scenario& sc) {
  using nlohmann::json;
  json j;
  j["simulation"] = {{"duration", sc.duration}, {"dt", sc.dt}, {"record_interval", sc.record_interval}};
  j["events"] = json::array();
  for (const auto& ev : sc.events)
    j["events"].push_back({{"time", ev.time}, {"breaker", ev.breaker}, {"action", ev.close ? "close" : "open"}});

  const auto& n = sc.network;
  json net = {{"s_base", n.base.s_base},
              {"f_nom", n.base.f_nom},
              {"e_nom", sc.der.e_nom},
              {"source_bus", n.source_bus},
              {"monitored_buses", sc.monitored_buses}};
  net["buses"] = json::array();
  for (const auto& b : n.buses) net["buses"].push_back({{"id", b.id}, {"base_kv", b.base_kv}});
  net["branches"] = json::array();
  for (const auto& b : n.branches) {
    json jb = {{"name", b.name},   {"from", b.from_bus},          {"to", b.to_bus},
               {"r", b.impedance.real()}, {"x", b.impedance.imag()}, {"tap", b.tap_ratio}};
    if (b.rated_kv) jb["rated_kv"] = {b.rated_kv->first, b.rated_kv->second};
    net["branches"].push_back(jb);
  }
  net["loads"] = json::array();
  for (const auto& l : n.loads) {
    json jl = {{"name", l.name}, {"bus", l.bus}, {"r", l.impedance.real()}, {"x", l.impedance.imag()}};
    if (l.breaker) {
      jl["breaker"] = *l.breaker;
      auto it = n.initial_breakers.find(*l.breaker);
      jl["closed"] = it != n.initial_breakers.end() && it->second;
    }
    net["loads"].push_back(jl);
  }
  if (n.electrolyzer) {
    net["electrolyzer"] = {{"bus", n.electrolyzer->pcc_bus},
                           {"r", n.electrolyzer->coupling_impedance.real()},
                           {"x", n.electrolyzer->coupling_impedance.imag()},
                           {"rated_kv", {n.electrolyzer->rated_kv.first, n.electrolyzer->rated_kv.second}}};
  }
  j["network"] = net;

  const auto& d = sc.der;
  j["der"] = {{"rated_p", d.rated_p},
              {"rated_q", d.rated_q},
              {"p_set", d.p_set_pu},
              {"q_set", d.q_set_pu},
              {"frequency_droop", d.frequency_droop},
              {"voltage_droop", d.voltage_droop},
              {"filter_time_constant", d.filter_time_constant},
              {"frequency_guard", {d.f_min, d.f_max}}};
  const auto& e = sc.electrolyzer;
  j["electrolyzer"] = {{"rated_p", e.rated_p},     {"rated_q", e.rated_q},
                       {"p_set", e.p_set},         {"q_set", e.q_set},
                       {"k_f", e.k_f},             {"k_v", e.k_v},
                       {"inner_kp", e.inner_kp},   {"inner_ki", e.inner_ki},
                       {"p_min", e.p_min},         {"p_max", e.p_max},
                       {"q_min", e.q_min},         {"q_max", e.q_max},
                       {"inner_rate_limit", e.inner_rate_limit},
                       {"efficiency", e.efficiency},
                       {"constant_p", e.constant_p}, {"constant_q", e.constant_q}};
  const auto& s = sc.secondary;
  j["secondary"] = {{"kp_f", s.kp_f},
                    {"ki_f", s.ki_f},
                    {"kp_v", s.kp_v},
                    {"ki_v", s.ki_v},
                    {"execution_period", s.execution_period},
                    {"delta_f_limit", s.delta_f_limit},
                    {"delta_e_limit", s.delta_e_limit},
                    {"monitor_time_constant", s.monitor_time_constant}};
  return j;
}

}  // namespace detail

/// Fully resolved scenario, re-parseable by parse_config.
inline nlohmann::json to_json(const Scenario& sc) {
  nlohmann::json j = detail::common_json(sc);
  j["kind"] = "scenario";
  j["name"] = sc.name;
  j["simulation"]["secondary_enabled"] = sc.secondary_enabled;
  j["simulation"]["electrolyzer_mode"] = std::string(to_string(sc.electrolyzer_mode));
  return j;
}

inline nlohmann::json to_json(const Study& st) {
  nlohmann::json j = detail::common_json(st.base);
  j["kind"] = "study";
  j["name"] = st.name;
  j["cases"] = nlohmann::json::array();
  for (const auto& c : st.cases)
    j["cases"].push_back({{"name", c.name},
                          {"electrolyzer_mode", std::string(to_string(c.mode))},
                          {"secondary_enabled", c.secondary_enabled}});
  return j;
}

}  // namespace h2grid
