#pragma once

#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "slimnas/archspace.hpp"

namespace slimnas {

// Channel-allocation trend statistics over the top candidates: per searchable
// position, the mean factor and the fraction of candidates keeping full
// width, split by whether the layer feeds the neck.

struct TrendRow {
  int position = 0;  // 1-based among searchable layers
  bool is_neck_output = false;
  double mean_factor = 0.0;
  double frac_full_width = 0.0;
};

struct TrendReport {
  int candidates_used = 0;
  std::vector<TrendRow> rows;
  std::optional<double> neck_mean;
  std::optional<double> other_mean;
};

inline TrendReport compute_trends(const std::vector<ArchConfig>& top, const BackboneSkeleton& skeleton) {
  TrendReport report;
  report.candidates_used = static_cast<int>(top.size());
  if (top.empty()) return report;

  std::vector<bool> neck_flags;
  for (const auto& l : skeleton.layers)
    if (l.searchable) neck_flags.push_back(l.is_neck_output);

  for (const auto& config : top)
    if (config.size() != neck_flags.size())
      throw ConfigError("trend report: config length does not match the skeleton");

  double neck_sum = 0, other_sum = 0;
  int neck_count = 0, other_count = 0;
  for (size_t i = 0; i < neck_flags.size(); ++i) {
    TrendRow row;
    row.position = static_cast<int>(i) + 1;
    row.is_neck_output = neck_flags[i];
    int full = 0;
    double sum = 0;
    for (const auto& config : top) {
      sum += config.at(i).value();
      full += config.at(i).quarters() == 4 ? 1 : 0;
    }
    row.mean_factor = sum / top.size();
    row.frac_full_width = static_cast<double>(full) / top.size();
    report.rows.push_back(row);
    if (neck_flags[i]) {
      neck_sum += sum;
      neck_count += static_cast<int>(top.size());
    } else {
      other_sum += sum;
      other_count += static_cast<int>(top.size());
    }
  }
  if (neck_count > 0) report.neck_mean = neck_sum / neck_count;
  if (other_count > 0) report.other_mean = other_sum / other_count;
  return report;
}

inline std::string render_trend_table(const TrendReport& report) {
  if (report.candidates_used == 0) return "no candidates in the log; nothing to report\n";
  std::string out = "channel-width trends over top " + std::to_string(report.candidates_used) +
                    " candidate(s)\n";
  out += "position  neck  mean_factor  frac_full_width\n";
  char buf[96];
  for (const auto& row : report.rows) {
    std::snprintf(buf, sizeof(buf), "%8d  %4s  %11.4f  %15.3f\n", row.position,
                  row.is_neck_output ? "yes" : "no", row.mean_factor, row.frac_full_width);
    out += buf;
  }
  if (report.neck_mean) {
    std::snprintf(buf, sizeof(buf), "neck-output positions mean factor:  %.4f\n", *report.neck_mean);
    out += buf;
  }
  if (report.other_mean) {
    std::snprintf(buf, sizeof(buf), "other positions mean factor:        %.4f\n", *report.other_mean);
    out += buf;
  }
  return out;
}

inline nlohmann::ordered_json trend_report_json(const TrendReport& report) {
  nlohmann::ordered_json j;
  j["candidates_used"] = report.candidates_used;
  j["positions"] = nlohmann::ordered_json::array();
  for (const auto& row : report.rows) {
    nlohmann::ordered_json r;
    r["position"] = row.position;
    r["is_neck_output"] = row.is_neck_output;
    r["mean_factor"] = row.mean_factor;
    r["frac_full_width"] = row.frac_full_width;
    j["positions"].push_back(r);
  }
  if (report.neck_mean) j["neck_mean_factor"] = *report.neck_mean;
  if (report.other_mean) j["other_mean_factor"] = *report.other_mean;
  return j;
}

}  // namespace slimnas
