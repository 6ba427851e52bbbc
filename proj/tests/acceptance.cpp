// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "h2grid/h2grid.hpp"

using namespace h2grid;
using cd = std::complex<double>;
using Clock = std::chrono::steady_clock;

namespace {

const std::string kStudyPath = std::string(H2GRID_CONFIG_DIR) + "/paper_study.yaml";

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// Samples of column `c` with t in [t0, t1).
std::vector<double> samples(const SimulationTrace& tr, Column c, double t0, double t1) {
  std::vector<double> out;
  for (std::size_t k = 0; k < tr.size(); ++k) {
    const double t = tr[Column::time][k];
    if (t >= t0 - 1e-9 && t < t1 - 1e-9) out.push_back(tr[c][k]);
  }
  if (out.empty()) throw std::runtime_error(fmt("no samples in [%g, %g)", t0, t1));
  return out;
}

double max_abs_dev(const std::vector<double>& xs, double ref) {
  double worst = 0.0;
  for (double x : xs) worst = std::max(worst, std::abs(x - ref));
  return worst;
}

double min_abs_dev(const std::vector<double>& xs, double ref) {
  double best = INFINITY;
  for (double x : xs) best = std::min(best, std::abs(x - ref));
  return best;
}

double rms(const std::vector<double>& a) {
  double s = 0.0;
  for (double x : a) s += x * x;
  return std::sqrt(s / static_cast<double>(a.size()));
}

// The shipped study, run once and shared by the behavior criteria.
struct StudyRuns {
  Study study;
  std::map<std::string, RunResult> results;
  std::map<std::string, double> wall;

  const RunResult& get(ElectrolyzerMode mode, bool secondary) const {
    for (const auto& c : study.cases)
      if (c.mode == mode && c.secondary_enabled == secondary) return results.at(c.name);
    throw std::runtime_error("study has no case for the requested mode");
  }
  double first_event() const { return study.base.events.front().time; }
  double last_event() const { return study.base.events.back().time; }
};

const StudyRuns& study_runs() {
  static const StudyRuns runs = [] {
    StudyRuns r;
    r.study = load_study(kStudyPath);
    for (const auto& c : r.study.cases) {
      const auto t0 = Clock::now();
      r.results.emplace(c.name, run(r.study.scenario_for(c)));
      r.wall[c.name] = seconds_since(t0);
    }
    return r;
  }();
  return runs;
}

constexpr ElectrolyzerMode kConstant = ElectrolyzerMode::constant_power;
constexpr ElectrolyzerMode kSupporting = ElectrolyzerMode::current_control;

const char* label(bool secondary) { return secondary ? "sec" : "no-sec"; }

Verdict round_trip() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(20240101);
  std::uniform_real_distribution<double> mag(0.5, 1.5), ang(-M_PI, M_PI), pq(-2.0, 2.0);
  double worst = 0.0;
  for (int n = 0; n < 10000; ++n) {
    const auto v = DqPhasor::from_complex(std::polar(mag(rng), ang(rng)));
    const double p = pq(rng), q = pq(rng);
    const auto s = dq_power(v, dq_current_refs(p, q, v));
    worst = std::max(worst, std::hypot(s.p - p, s.q - q) / std::hypot(p, q));
  }
  const double wall = seconds_since(t0);
  return {worst <= 1e-9 && wall < 1.0, fmt("max relative error %.2e over 1e4 samples, %.3f s", worst, wall)};
}

Verdict opposite_droop_points() {
  const auto gains = load_study(kStudyPath).base.electrolyzer.opposite_droop();
  // P* = p_set + k_f (f - f_nom), Q* = q_set + k_v (E - E_nom), by hand.
  const double p_low = opposite_droop_refs(59.9, 1.0, gains).p;
  const double q_low = opposite_droop_refs(60.0, 0.98, gains).q;
  const double p_high = opposite_droop_refs(60.05, 1.0, gains).p;
  const auto nominal = opposite_droop_refs(60.0, 1.0, gains);
  const bool ok = p_low == 400e3 + 52500.0 * (59.9 - 60.0) && std::abs(p_low - 394750.0) < 1e-9 &&
                  q_low == 1e4 * (0.98 - 1.0) && std::abs(q_low + 200.0) < 1e-9 &&
                  p_high == 400e3 + 52500.0 * (60.05 - 60.0) && nominal.p == 400e3 && nominal.q == 0.0;
  return {ok, fmt("P*(59.9 Hz)=%.6f W, Q*(0.98 pu)=%.6f var, P*(60.05 Hz)=%.6f W", p_low, q_low, p_high)};
}

Verdict pi_closed_form() {
  // dt and error chosen so the running integral is exact in binary.
  PiController exact{10.0, 0.1};
  const double e = 0.75, dt = 1.0 / 1024.0;
  bool exact_ok = true;
  for (int n = 1; n <= 10000; ++n) exact_ok &= exact.step(e, dt) == 10.0 * e + 0.1 * (e * n * dt);

  PiController general{10.0, 0.1};
  double worst_rel = 0.0;
  for (int n = 1; n <= 10000; ++n) {
    const double out = general.step(0.7, 1e-3);
    const double expected = 10.0 * 0.7 + 0.1 * 0.7 * n * 1e-3;
    worst_rel = std::max(worst_rel, std::abs(out - expected) / expected);
  }

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> err(-5.0, 5.0), dts(1e-5, 1e-2);
  PiController bounded{10.0, 0.1, 0.0, -2.0, 2.0};
  std::size_t violations = 0;
  for (int n = 0; n < 100000; ++n) {
    const double out = bounded.step(err(rng), dts(rng));
    if (out < -2.0 || out > 2.0) ++violations;
  }
  return {exact_ok && worst_rel < 1e-13 && violations == 0,
          fmt("exact ramp %s, general ramp rel err %.1e, %zu bound violations in 1e5 steps", exact_ok ? "equal" : "differs",
              worst_rel, violations)};
}

// Currents leaving each non-source bus computed from the reported branch
// currents, load draws and the electrolyzer current.
double kcl_residual(const NetworkModel& net, const NetworkSolution& sol, const BreakerStates& breakers) {
  const auto& cfg = net.config();
  std::map<int, cd> leaving;
  cd terminal = -sol.electrolyzer_current;
  for (const auto& br : net.branches()) {
    const cd i = sol.branch_currents.at(br.name);
    leaving[br.from_bus] += i / br.tap_ratio;
    if (br.to_bus == kElectrolyzerTerminal)
      terminal += i;
    else
      leaving[br.to_bus] -= i;
  }
  for (const auto& l : cfg.loads)
    if (net.load_connected(l, breakers)) leaving[l.bus] += sol.bus_voltages.at(l.bus) / l.impedance;
  double worst = net.has_electrolyzer() ? std::abs(terminal) : 0.0;
  for (const auto& b : cfg.buses)
    if (b.id != cfg.source_bus) worst = std::max(worst, std::abs(leaving[b.id]));
  return worst;
}

Verdict network_solver() {
  const auto net = build_network(load_study(kStudyPath).base.network);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> mag(0.9, 1.1), ang(-0.5, 0.5), cur(-0.2, 0.2);
  double kcl = 0.0, balance = 0.0;
  for (int n = 0; n < 2000; ++n) {
    const BreakerStates br{{"S", n % 2 == 0}};
    const auto sol = solve(net, std::polar(mag(rng), ang(rng)), cd(cur(rng), cur(rng)), br);
    kcl = std::max(kcl, kcl_residual(net, sol, br));
    balance = std::max(balance, std::abs(sol.source_power - sol.total_consumption()));
  }

  NetworkConfig two_bus;
  two_bus.buses = {{1, 13.2}, {2, 13.2}};
  const cd z{0.02, 0.07}, zl{0.8, 0.3};
  two_bus.branches = {{"line", 1, 2, z, 1.0, std::nullopt}};
  two_bus.loads = {{"Z", 2, zl, std::nullopt}};
  const auto divider = build_network(two_bus);
  double divider_err = 0.0;
  for (cd vs : {cd(1.0, 0.0), std::polar(0.97, -0.4), cd(1.05, 0.1)})
    divider_err = std::max(divider_err, std::abs(solve(divider, vs, 0.0, {}).bus_voltages.at(2) - vs * zl / (zl + z)));

  return {kcl < 1e-10 && balance < 1e-8 && divider_err < 1e-12,
          fmt("KCL %.1e pu, power balance %.1e pu over 2000 solves; divider error %.1e", kcl, balance, divider_err)};
}

Verdict determinism_and_dt() {
  const Study study = load_study(kStudyPath);
  bool identical = true;
  double worst = 0.0;
  std::string worst_col;
  for (const auto& c : study.cases) {
    const Scenario coarse = study.scenario_for(c);
    Scenario fine = coarse;
    fine.dt = coarse.dt / 2.0;
    const auto a = run(coarse).trace;
    identical &= a == run(coarse).trace;
    const auto b = run(fine).trace;
    if (a.size() != b.size()) return {false, "halved-dt trace has a different sample count"};
    for (std::size_t col = 1; col < kTraceColumns.size(); ++col) {
      std::vector<double> diff(a.size());
      for (std::size_t k = 0; k < a.size(); ++k) diff[k] = a.columns[col][k] - b.columns[col][k];
      const double scale = rms(b.columns[col]);
      const double rel = scale == 0.0 ? rms(diff) : rms(diff) / scale;
      if (rel > worst) {
        worst = rel;
        worst_col = c.name + "." + std::string(kTraceColumns[col]);
      }
    }
  }
  return {identical && worst < 0.005, fmt("repeat runs %s; worst halved-dt RMS change %.3g %% (%s)",
                                          identical ? "identical" : "DIFFER", 100.0 * worst, worst_col.c_str())};
}

Verdict swing_reduction() {
  const auto& s = study_runs();
  bool ok = true;
  std::string detail;
  for (bool sec : {false, true}) {
    const double sup = s.get(kSupporting, sec).metrics.p_g_swing;
    const double con = s.get(kConstant, sec).metrics.p_g_swing;
    ok &= sup <= 0.75 * con;
    detail += fmt("%s: %.1f/%.1f kW = %.3f; ", label(sec), sup / 1e3, con / 1e3, sup / con);
  }
  double slowest = 0.0;
  for (const auto& [name, w] : s.wall) slowest = std::max(slowest, w);
  ok &= slowest < 5.0;
  return {ok, detail + fmt("slowest 5 s case %.2f s wall (limit ratio 0.75)", slowest)};
}

Verdict frequency_support() {
  const auto& s = study_runs();
  bool ok = true;
  std::string detail;
  for (bool sec : {false, true}) {
    const auto dev = [&](ElectrolyzerMode m) {
      return max_abs_dev(samples(s.get(m, sec).trace, Column::f, s.first_event(), s.last_event()), 60.0);
    };
    const double sup = dev(kSupporting), con = dev(kConstant);
    ok &= sup < con;
    detail += fmt("%s: %.4f vs %.4f Hz; ", label(sec), sup, con);
  }
  return {ok, detail};
}

Verdict secondary_restoration() {
  const auto& s = study_runs();
  const auto& events = s.study.base.events;
  const double end = s.study.base.duration;
  bool ok = true;
  std::string detail;
  for (auto mode : {kConstant, kSupporting}) {
    const auto& tr = s.get(mode, true).trace;
    for (std::size_t k = 0; k < events.size(); ++k) {
      // When the next event comes exactly 1 s later, the last sample before it
      // is the one that counts.
      const double rec = s.study.base.record_interval;
      const double to = k + 1 < events.size() ? events[k + 1].time : end + 1e-3;
      const double from = std::min(events[k].time + 1.0, to - rec);
      const double dev = max_abs_dev(samples(tr, Column::f, from, to), 60.0);
      ok &= dev < 0.01;
      detail += fmt("%s sec, %.1f s+1 s: %.4f Hz; ", to_string(mode).data(), events[k].time, dev);
    }
    const double offset =
        min_abs_dev(samples(s.get(mode, false).trace, Column::f, s.last_event() - 0.5, s.last_event()), 60.0);
    ok &= offset > 0.005;
    detail += fmt("%s no-sec offset %.4f Hz; ", to_string(mode).data(), offset);
  }
  return {ok, detail};
}

Verdict electrolyzer_shape() {
  const auto& s = study_runs();
  const double t_on = s.first_event(), t_off = s.last_event(), end = s.study.base.duration;
  bool ok = true;
  std::string detail;
  for (bool sec : {false, true}) {
    const auto& tr = s.get(kSupporting, sec).trace;
    const double pre = samples(tr, Column::P_E, t_on - 0.01, t_on).back();
    double low = INFINITY;
    for (double p : samples(tr, Column::P_E, t_on, t_off)) low = std::min(low, p);
    const double last = tr[Column::P_E].back();
    const bool drop_ok = pre - low >= 50e3;
    const bool return_ok = std::abs(last - pre) <= 0.05 * pre;
    ok &= drop_ok && return_ok;
    detail += fmt("%s: drop %.1f kW (need 50), end %.1f vs pre %.1f kW; ", label(sec), (pre - low) / 1e3, last / 1e3,
                  pre / 1e3);
    const double con_dev = max_abs_dev(samples(s.get(kConstant, sec).trace, Column::P_E, 0.0, end + 1e-3), 400e3);
    ok &= con_dev <= 1e-6;
    detail += fmt("constant max |P_E-400 kW| %.1e W; ", con_dev);
  }
  return {ok, detail};
}

Verdict voltage_support() {
  const auto& s = study_runs();
  bool ok = true;
  std::string detail;
  for (bool sec : {false, true}) {
    const double sup = s.get(kSupporting, sec).metrics.v_max_dev;
    const double con = s.get(kConstant, sec).metrics.v_max_dev;
    ok &= sup < con;
    detail += fmt("%s: %.5f vs %.5f pu; ", label(sec), sup, con);
  }
  for (auto mode : {kConstant, kSupporting}) {
    const double e_bar = s.get(mode, true).trace[Column::V_bar].back();
    ok &= std::abs(e_bar - 1.0) < 0.005;
    detail += fmt("%s sec final E-bar %.5f; ", to_string(mode).data(), e_bar);
  }
  return {ok, detail};
}

Verdict hydrogen_impact() {
  const auto& s = study_runs();
  bool ok = true;
  std::string detail;
  for (bool sec : {false, true}) {
    const auto energy = [&](ElectrolyzerMode m) {
      return integrate(s.get(m, sec).trace, Column::p_dc, s.first_event(), s.last_event());
    };
    const double sup = energy(kSupporting), con = energy(kConstant);
    ok &= sup < con;
    detail += fmt("%s: %.1f vs %.1f kJ (%.2f %%); ", label(sec), sup / 1e3, con / 1e3, 100.0 * (sup - con) / con);
  }
  return {ok, detail};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"dq current reference round trip", round_trip},
      {"opposite-droop point checks", opposite_droop_points},
      {"discrete PI closed form and bounds", pi_closed_form},
      {"network solver KCL, power balance, divider", network_solver},
      {"determinism and dt convergence", determinism_and_dt},
      {"DER active-power swing reduction", swing_reduction},
      {"frequency support while load connected", frequency_support},
      {"secondary frequency restoration", secondary_restoration},
      {"electrolyzer active-power response", electrolyzer_shape},
      {"voltage support", voltage_support},
      {"hydrogen production impact", hydrogen_impact},
  };

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    if (!v.pass) ++failed;
    std::printf("[%s] criterion %zu: %s -- %s\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                v.detail.c_str());
  }
  std::printf("%d of %zu criteria failed\n", failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
