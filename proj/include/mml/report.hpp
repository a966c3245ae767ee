#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mml/common.hpp"
#include "mml/loso.hpp"

namespace mml::harness {

// report.csv columns follow the reference table order:
//   feature_space, dim, rkl, rkl_ci, auc, auc_ci, cvg, cvg_ci,
//   ap, ap_ci, hl, hl_ci, jsc, jsc_ci
// Values are the pooled-prediction metrics (the headline numbers); the
// _ci columns are 95% Student-t half-widths across per-fold values.
inline std::string report_csv_header() {
  std::string h = "feature_space,dim";
  for (const auto& m : metric_order()) h += "," + m + "," + m + "_ci";
  return h;
}

inline std::string report_to_csv(const EvaluationReport& report) {
  std::string out = report_csv_header() + "\n";
  for (const auto& s : report.spaces) {
    out += feature_space_name(s.space);
    out += "," + std::to_string(s.dim);
    for (size_t m = 0; m < metric_order().size(); ++m) {
      out += "," + fmt_double(s.pooled[m].value);
      out += "," + fmt_double(s.fold_ci.at(metric_order()[m]));
    }
    out += "\n";
  }
  return out;
}

namespace detail {

inline nlohmann::json record_to_json(const MetricRecord& r) {
  nlohmann::json j;
  j["metric"] = r.metric;
  if (std::isnan(r.value))
    j["value"] = nullptr;
  else
    j["value"] = r.value;
  j["n_excluded"] = r.n_excluded;
  j["notes"] = r.notes;
  return j;
}

inline MetricRecord record_from_json(const nlohmann::json& j) {
  MetricRecord r;
  r.metric = j.at("metric").get<std::string>();
  if (!j.at("value").is_null()) r.value = j.at("value").get<double>();
  r.n_excluded = j.at("n_excluded").get<int>();
  r.notes = j.at("notes").get<std::string>();
  return r;
}

}  // namespace detail

inline nlohmann::json report_to_json(const EvaluationReport& report, bool with_timing = false) {
  nlohmann::json j;
  j["format"] = "evaluation-report-v1";
  j["n_folds"] = report.n_folds;
  j["seed"] = report.seed;
  j["leaky"] = report.leaky;
  nlohmann::json spaces = nlohmann::json::array();
  for (const auto& s : report.spaces) {
    nlohmann::json js;
    js["space"] = feature_space_name(s.space);
    js["dim"] = s.dim;
    nlohmann::json pooled = nlohmann::json::array();
    for (const auto& r : s.pooled) pooled.push_back(detail::record_to_json(r));
    js["pooled"] = std::move(pooled);
    nlohmann::json fold_mean = nlohmann::json::array();
    for (const auto& r : s.fold_mean) fold_mean.push_back(detail::record_to_json(r));
    js["fold_mean"] = std::move(fold_mean);
    js["fold_ci"] = s.fold_ci;
    js["fold_used"] = s.fold_used;
    js["excluded_label_folds"] = s.excluded_label_folds;
    js["component_checksums"] = s.component_checksums;
    js["objective_trace"] = s.objective_trace;
    if (with_timing) js["seconds"] = s.seconds;
    spaces.push_back(std::move(js));
  }
  j["spaces"] = std::move(spaces);
  return j;
}

inline EvaluationReport report_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "evaluation-report-v1")
    throw ValidationError("not an evaluation report");
  EvaluationReport report;
  report.n_folds = j.at("n_folds").get<int>();
  report.seed = j.at("seed").get<uint64_t>();
  report.leaky = j.at("leaky").get<bool>();
  for (const auto& js : j.at("spaces")) {
    SpaceResult s;
    s.space = feature_space_from_name(js.at("space").get<std::string>());
    s.dim = js.at("dim").get<int>();
    for (const auto& r : js.at("pooled")) s.pooled.push_back(detail::record_from_json(r));
    for (const auto& r : js.at("fold_mean")) s.fold_mean.push_back(detail::record_from_json(r));
    s.fold_ci = js.at("fold_ci").get<std::map<std::string, double>>();
    s.fold_used = js.at("fold_used").get<std::map<std::string, int>>();
    s.excluded_label_folds = js.at("excluded_label_folds").get<int>();
    s.component_checksums = js.at("component_checksums").get<std::vector<uint64_t>>();
    s.objective_trace = js.at("objective_trace").get<std::vector<double>>();
    if (js.contains("seconds")) s.seconds = js.at("seconds").get<double>();
    report.spaces.push_back(std::move(s));
  }
  return report;
}

// ----------------------------------------------------------------- plots

namespace detail {

inline std::string svg_open(int w, int h) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(w) +
         "\" height=\"" + std::to_string(h) + "\" viewBox=\"0 0 " + std::to_string(w) + " " +
         std::to_string(h) + "\">\n";
}

inline std::string svg_text(double x, double y, const std::string& s, int size = 11) {
  return "<text x=\"" + fmt_double(x) + "\" y=\"" + fmt_double(y) + "\" font-size=\"" +
         std::to_string(size) + "\" font-family=\"sans-serif\">" + s + "</text>\n";
}

}  // namespace detail

// one panel per metric, one bar per feature space
inline std::string metric_bars_svg(const EvaluationReport& report) {
  const auto& metrics = metric_order();
  const int panel_w = 180, panel_h = 140, cols = 3;
  const int rows = 2;
  std::string svg = detail::svg_open(panel_w * cols, panel_h * rows);
  static const char* kFills[] = {"#4878cf", "#6acc65", "#d65f5f", "#b47cc7", "#c4ad66"};
  for (size_t m = 0; m < metrics.size(); ++m) {
    const double ox = static_cast<double>(panel_w) * (m % cols);
    const double oy = static_cast<double>(panel_h) * (m / cols);
    svg += detail::svg_text(ox + 8, oy + 14, metrics[m], 13);
    double vmax = 1e-9;
    for (const auto& s : report.spaces)
      if (!std::isnan(s.pooled[m].value)) vmax = std::max(vmax, std::abs(s.pooled[m].value));
    const double bar_w = (panel_w - 30.0) / std::max<size_t>(1, report.spaces.size());
    for (size_t si = 0; si < report.spaces.size(); ++si) {
      const auto& s = report.spaces[si];
      const double v = std::isnan(s.pooled[m].value) ? 0.0 : s.pooled[m].value;
      const double h = (panel_h - 50.0) * std::abs(v) / vmax;
      const double x = ox + 15 + bar_w * static_cast<double>(si);
      const double y = oy + panel_h - 25.0 - h;
      svg += "<rect x=\"" + fmt_double(x) + "\" y=\"" + fmt_double(y) + "\" width=\"" +
             fmt_double(bar_w * 0.8) + "\" height=\"" + fmt_double(h) + "\" fill=\"" +
             kFills[si % 5] + "\"/>\n";
      svg += detail::svg_text(x, oy + panel_h - 10.0,
                              std::string(feature_space_name(s.space)).substr(0, 5), 8);
    }
  }
  svg += "</svg>\n";
  return svg;
}

inline std::string objective_trace_svg(const EvaluationReport& report) {
  const int w = 420, h = 240;
  std::string svg = detail::svg_open(w, h);
  svg += detail::svg_text(10, 16, "solver objective by sweep (fold 0)", 12);
  int color = 0;
  static const char* kStrokes[] = {"#4878cf", "#6acc65", "#d65f5f", "#b47cc7", "#c4ad66"};
  for (const auto& s : report.spaces) {
    if (s.objective_trace.size() < 2) continue;
    double lo = s.objective_trace[0], hi = s.objective_trace[0];
    for (double v : s.objective_trace) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    const double span = std::max(hi - lo, 1e-12);
    std::string pts;
    for (size_t i = 0; i < s.objective_trace.size(); ++i) {
      const double x = 30.0 + (w - 50.0) * static_cast<double>(i) /
                                  static_cast<double>(s.objective_trace.size() - 1);
      const double y = 30.0 + (h - 60.0) * (1.0 - (s.objective_trace[i] - lo) / span);
      pts += fmt_double(x) + "," + fmt_double(y) + " ";
    }
    svg += "<polyline fill=\"none\" stroke=\"" + std::string(kStrokes[color % 5]) +
           "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
    svg += detail::svg_text(34.0 + 60.0 * color, h - 8.0, feature_space_name(s.space), 10);
    ++color;
  }
  svg += "</svg>\n";
  return svg;
}

// writes report.csv + report.json (+ SVG plots); returns the paths
inline std::vector<std::filesystem::path> emit_report(const EvaluationReport& report,
                                                      const std::filesystem::path& dir,
                                                      bool plots = false,
                                                      bool with_timing = false) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (!fs::is_directory(dir))
    throw std::runtime_error("emit_report: cannot create directory " + dir.string());

  std::vector<fs::path> written;
  auto write = [&](const fs::path& p, const std::string& body) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("emit_report: cannot write " + p.string());
    out << body;
    written.push_back(p);
  };
  write(dir / "report.csv", report_to_csv(report));
  write(dir / "report.json", report_to_json(report, with_timing).dump(2) + "\n");
  if (plots) {
    write(dir / "metric_bars.svg", metric_bars_svg(report));
    write(dir / "objective_trace.svg", objective_trace_svg(report));
  }
  return written;
}

}  // namespace mml::harness
