#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "slimnas/errors.hpp"
#include "slimnas/evolution.hpp"

namespace slimnas {

using ordered_json = nlohmann::ordered_json;

// Line-delimited run log: one header record, then one record per candidate
// event. Field names are stable; the file is append-only while a run lives.

struct LoggedCandidate {
  std::string run_id;
  int generation = 0;
  std::string origin;
  std::string config;
  uint64_t params = 0;
  uint64_t flops = 0;
  double fitness = 0.0;
  int64_t wall_ms = 0;
};

struct ParsedRunLog {
  ordered_json header;
  std::vector<LoggedCandidate> candidates;
};

class RunLogWriter {
 public:
  explicit RunLogWriter(const std::string& path) : out_(path, std::ios::trunc) {
    if (!out_) throw IoError("cannot open run log '" + path + "' for writing");
  }

  void write_record(const ordered_json& record) { out_ << record.dump() << "\n"; }

  void write_candidate(const std::string& run_id, const Candidate& c, int64_t wall_ms) {
    ordered_json rec;
    rec["type"] = "candidate";
    rec["run_id"] = run_id;
    rec["generation"] = c.generation;
    rec["origin"] = to_string(c.origin);
    rec["config"] = c.key;
    rec["params"] = c.cost.params;
    rec["flops"] = c.cost.flops;
    rec["fitness"] = c.fitness.score;
    rec["wall_ms"] = wall_ms;
    out_ << rec.dump() << "\n";
  }

  void flush() { out_.flush(); }

 private:
  std::ofstream out_;
};

inline ParsedRunLog read_run_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open run log '" + path + "'");
  ParsedRunLog log;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    ordered_json rec;
    try {
      rec = ordered_json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("run log line " + std::to_string(line_no) + ": " + e.what());
    }
    try {
      const std::string type = rec.at("type").get<std::string>();
      if (type == "header") {
        if (!log.header.is_null())
          throw ParseError("run log line " + std::to_string(line_no) + ": duplicate header");
        log.header = rec;
      } else if (type == "candidate") {
        LoggedCandidate c;
        c.run_id = rec.at("run_id").get<std::string>();
        c.generation = rec.at("generation").get<int>();
        c.origin = rec.at("origin").get<std::string>();
        c.config = rec.at("config").get<std::string>();
        c.params = rec.at("params").get<uint64_t>();
        c.flops = rec.at("flops").get<uint64_t>();
        c.fitness = rec.at("fitness").get<double>();
        c.wall_ms = rec.at("wall_ms").get<int64_t>();
        log.candidates.push_back(std::move(c));
      } else {
        throw ParseError("run log line " + std::to_string(line_no) + ": unknown record type '" + type +
                         "'");
      }
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("run log line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (log.header.is_null()) throw ParseError("run log has no header record");
  return log;
}

}  // namespace slimnas
