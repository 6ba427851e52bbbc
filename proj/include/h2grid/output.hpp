#pragma once

// Artifacts written by the command-line tool: CSV traces, the metrics summary
// (schema documented in docs/metrics_schema.md) and gnuplot scripts.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "h2grid/config.hpp"
#include "h2grid/errors.hpp"
#include "h2grid/simulation.hpp"

namespace h2grid {

inline constexpr const char* kCsvHeader = "time,P_G,Q_G,f,V_pcc,V_bar,P_E,Q_E,delta_f,delta_e,p_dc";
inline constexpr const char* kMetricsSchema = "h2grid-metrics/1";

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// CSV

inline std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline void write_trace_csv(std::ostream& out, const SimulationTrace& trace) {
  out << kCsvHeader << '\n';
  for (std::size_t k = 0; k < trace.size(); ++k) {
    for (std::size_t c = 0; c < kTraceColumns.size(); ++c) {
      if (c) out << ',';
      out << format_value(trace.columns[c][k]);
    }
    out << '\n';
  }
}

inline void write_trace_csv(const fs::path& path, const SimulationTrace& trace) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  write_trace_csv(out, trace);
  if (!out) throw IoError("failed while writing '" + path.string() + "'");
}

inline SimulationTrace read_trace_csv(std::istream& in, const std::string& origin = "<stream>") {
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader)
    throw ParseError("'" + origin + "' does not start with the trace header", 1, 1);
  SimulationTrace trace;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::array<double, kTraceColumns.size()> row{};
    std::size_t pos = 0;
    for (std::size_t c = 0; c < row.size(); ++c) {
      const auto end = line.find(',', pos);
      const bool last = c + 1 == row.size();
      if ((end == std::string::npos) != last)
        throw ParseError("'" + origin + "' row has the wrong number of fields", line_no, pos + 1);
      const std::string field = line.substr(pos, last ? std::string::npos : end - pos);
      try {
        std::size_t used = 0;
        row[c] = std::stod(field, &used);
        if (used != field.size()) throw std::invalid_argument(field);
      } catch (const std::exception&) {
        throw ParseError("'" + origin + "' has a non-numeric field '" + field + "'", line_no, pos + 1);
      }
      pos = end + 1;
    }
    trace.append(row);
  }
  return trace;
}

inline SimulationTrace read_trace_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return read_trace_csv(in, path.string());
}

// ---------------------------------------------------------------------------
// Output directory

/// Creates `dir` if needed and proves it is writable by writing a probe file.
inline void ensure_writable_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
  if (!fs::is_directory(dir)) throw IoError("output path '" + dir.string() + "' is not a directory");
  const fs::path probe = dir / ".h2grid_write_probe";
  {
    std::ofstream out(probe);
    if (!out || !(out << "probe\n") || !(out.flush()))
      throw IoError("output directory '" + dir.string() + "' is not writable");
  }
  fs::remove(probe, ec);
}

// ---------------------------------------------------------------------------
// Metrics JSON

inline nlohmann::json to_json(const ScenarioMetrics& m) {
  return {{"p_g_swing", m.p_g_swing},
          {"f_nadir_dev", m.f_nadir_dev},
          {"f_settle", m.f_settle ? nlohmann::json(*m.f_settle) : nlohmann::json(nullptr)},
          {"v_max_dev", m.v_max_dev},
          {"e_h2", m.e_h2}};
}

inline nlohmann::json case_json(const std::string& name, const Scenario& sc, const RunResult& r,
                                const std::string& trace_file) {
  const double residual = r.energy.der - r.energy.loads - r.energy.losses - r.energy.electrolyzer;
  return {{"name", name},
          {"electrolyzer_mode", std::string(to_string(sc.electrolyzer_mode))},
          {"secondary_enabled", sc.secondary_enabled},
          {"status", "ok"},
          {"trace_file", trace_file},
          {"window", {{"start", r.window.start}, {"end", r.window.end}, {"last_event", r.window.last_event}}},
          {"metrics", to_json(r.metrics)},
          {"energy",
           {{"der", r.energy.der},
            {"loads", r.energy.loads},
            {"losses", r.energy.losses},
            {"electrolyzer", r.energy.electrolyzer},
            {"balance_residual", residual}}},
          {"hydrogen", {{"energy_dc", r.hydrogen.energy_dc}, {"h2_kg", r.hydrogen.h2_proxy}}}};
}

inline nlohmann::json failed_case_json(const CaseOutcome& c) {
  return {{"name", c.spec.name},
          {"electrolyzer_mode", std::string(to_string(c.spec.mode))},
          {"secondary_enabled", c.spec.secondary_enabled},
          {"status", "error"},
          {"error",
           {{"kind", c.error_kind ? std::string(to_string(*c.error_kind)) : "unknown"},
            {"sim_time", c.error_time ? nlohmann::json(*c.error_time) : nlohmann::json(nullptr)},
            {"message", c.error_message}}}};
}

inline std::string trace_file_name(const std::string& case_name) { return case_name + ".csv"; }

inline nlohmann::json run_summary(const Scenario& sc, const RunResult& r) {
  return {{"schema", kMetricsSchema},
          {"kind", "run"},
          {"name", sc.name},
          {"config", to_json(sc)},
          {"cases", nlohmann::json::array({case_json(sc.name, sc, r, trace_file_name(sc.name))})},
          {"comparisons", nlohmann::json::array()}};
}

/// Pairs the constant-power and supporting (current-control) cases sharing a
/// secondary setting.
inline nlohmann::json study_comparisons(const StudyReport& report) {
  nlohmann::json out = nlohmann::json::array();
  for (bool secondary : {false, true}) {
    const CaseOutcome* constant = nullptr;
    const CaseOutcome* supporting = nullptr;
    for (const auto& c : report.cases) {
      if (c.spec.secondary_enabled != secondary || !c.result) continue;
      if (c.spec.mode == ElectrolyzerMode::constant_power && !constant) constant = &c;
      if (c.spec.mode == ElectrolyzerMode::current_control && !supporting) supporting = &c;
    }
    if (!constant || !supporting) continue;
    const auto& mc = constant->result->metrics;
    const auto& ms = supporting->result->metrics;
    out.push_back({{"secondary_enabled", secondary},
                   {"constant_case", constant->spec.name},
                   {"supporting_case", supporting->spec.name},
                   {"p_g_swing_ratio", mc.p_g_swing > 0.0 ? nlohmann::json(ms.p_g_swing / mc.p_g_swing) : nullptr},
                   {"f_nadir_dev_delta", ms.f_nadir_dev - mc.f_nadir_dev},
                   {"v_max_dev_delta", ms.v_max_dev - mc.v_max_dev},
                   {"e_h2_delta", ms.e_h2 - mc.e_h2}});
  }
  return out;
}

inline nlohmann::json study_summary(const Study& study, const StudyReport& report) {
  nlohmann::json cases = nlohmann::json::array();
  for (const auto& c : report.cases)
    cases.push_back(c.result ? case_json(c.spec.name, c.scenario, *c.result, trace_file_name(c.spec.name))
                             : failed_case_json(c));
  return {{"schema", kMetricsSchema},
          {"kind", "study"},
          {"name", study.name},
          {"config", to_json(study)},
          {"cases", cases},
          {"comparisons", study_comparisons(report)}};
}

inline void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed while writing '" + path.string() + "'");
}

// ---------------------------------------------------------------------------
// gnuplot scripts. Run from the output directory: `gnuplot fig8.gp`.

struct PlotPanel {
  std::string ylabel;
  Column column;
  double scale = 1.0;  // applied to the column before plotting
};

struct PlotSeries {
  std::string file;
  std::string title;
};

struct FigureSpec {
  std::string stem;
  std::string title;
  std::vector<PlotPanel> panels;
  std::vector<PlotSeries> series;
};

inline std::size_t column_number(Column c) { return static_cast<std::size_t>(c) + 1; }

inline std::string gnuplot_script(const FigureSpec& fig) {
  std::ostringstream s;
  s << "# " << fig.title << "\n"
    << "set datafile separator ','\n"
    << "set key autotitle columnhead\n"
    << "set terminal pngcairo size 900," << 300 * fig.panels.size() + 100 << "\n"
    << "set output '" << fig.stem << ".png'\n"
    << "set multiplot layout " << fig.panels.size() << ",1 title '" << fig.title << "'\n"
    << "set grid\n"
    << "set key outside right\n";
  for (std::size_t p = 0; p < fig.panels.size(); ++p) {
    const auto& panel = fig.panels[p];
    s << "set ylabel '" << panel.ylabel << "'\n";
    s << (p + 1 == fig.panels.size() ? "set xlabel 'time (s)'\n" : "unset xlabel\n");
    s << "plot ";
    for (std::size_t i = 0; i < fig.series.size(); ++i) {
      if (i) s << ", \\\n     ";
      s << "'" << fig.series[i].file << "' using 1:($" << column_number(panel.column) << "*" << panel.scale
        << ") with lines lw 2 title '" << fig.series[i].title << "'";
    }
    s << "\n";
  }
  s << "unset multiplot\n";
  return s.str();
}

inline std::vector<FigureSpec> study_figures(const StudyReport& report) {
  auto pick = [&](const std::function<bool(const StudyCase&)>& keep) {
    std::vector<PlotSeries> out;
    for (const auto& c : report.cases)
      if (c.result && keep(c.spec)) out.push_back({trace_file_name(c.spec.name), c.spec.name});
    return out;
  };
  auto with_secondary = [](bool on) { return [on](const StudyCase& c) { return c.secondary_enabled == on; }; };
  auto all = [](const StudyCase&) { return true; };

  const PlotPanel p_g{"P_G (kW)", Column::P_G, 1e-3};
  const PlotPanel f{"f (Hz)", Column::f};
  const PlotPanel v_pcc{"V_pcc (pu)", Column::V_pcc};
  const PlotPanel v_bar{"V_bar (pu)", Column::V_bar};
  const PlotPanel q_g{"Q_G (kvar)", Column::Q_G, 1e-3};
  const PlotPanel p_e{"P_E (kW)", Column::P_E, 1e-3};
  const PlotPanel q_e{"Q_E (kvar)", Column::Q_E, 1e-3};

  std::vector<FigureSpec> figs{
      {"fig8", "DER power and frequency, no secondary control", {p_g, f}, pick(with_secondary(false))},
      {"fig9", "DER power and frequency, secondary control", {p_g, f}, pick(with_secondary(true))},
      {"fig10", "Electrolyzer power", {p_e, q_e}, pick(all)},
      {"fig11", "DER reactive power and voltages, no secondary control", {q_g, v_pcc, v_bar},
       pick(with_secondary(false))},
      {"fig12", "DER reactive power and voltages, secondary control", {q_g, v_pcc, v_bar},
       pick(with_secondary(true))},
      {"fig13", "PCC voltage, all cases", {v_pcc}, pick(all)},
  };
  std::erase_if(figs, [](const FigureSpec& fig) { return fig.series.empty(); });
  return figs;
}

inline FigureSpec run_figure(const Scenario& sc) {
  return {"plot",
          sc.name,
          {{"P_G (kW)", Column::P_G, 1e-3},
           {"f (Hz)", Column::f},
           {"V_pcc (pu)", Column::V_pcc},
           {"P_E (kW)", Column::P_E, 1e-3}},
          {{trace_file_name(sc.name), sc.name}}};
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("failed while writing '" + path.string() + "'");
}

/// Writes <name>.csv, metrics.json and plot.gp for a single run.
inline void emit_run_outputs(const fs::path& dir, const Scenario& sc, const RunResult& r) {
  write_trace_csv(dir / trace_file_name(sc.name), r.trace);
  write_json(dir / "metrics.json", run_summary(sc, r));
  write_text(dir / "plot.gp", gnuplot_script(run_figure(sc)));
}

/// Writes one CSV per successful case, metrics.json and fig8..fig13 scripts.
inline void emit_study_outputs(const fs::path& dir, const Study& study, const StudyReport& report) {
  for (const auto& c : report.cases)
    if (c.result) write_trace_csv(dir / trace_file_name(c.spec.name), c.result->trace);
  write_json(dir / "metrics.json", study_summary(study, report));
  for (const auto& fig : study_figures(report)) write_text(dir / (fig.stem + ".gp"), gnuplot_script(fig));
}

}  // namespace h2grid
