#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "slimnas/evaluator.hpp"
#include "slimnas/evolution.hpp"
#include "slimnas/report.hpp"
#include "slimnas/runconfig.hpp"
#include "slimnas/runlog.hpp"
#include "slimnas/supernet.hpp"
#include "slimnas/version.hpp"

namespace slimnas {

// One command at a time per output directory; the lock file turns a second
// writer into a hard error instead of interleaved output.
class OutputLock {
 public:
  explicit OutputLock(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
    path_ = (std::filesystem::path(dir) / ".lock").string();
    std::FILE* f = std::fopen(path_.c_str(), "wx");
    if (!f)
      throw ConfigError("output directory '" + dir + "' is locked by another run (remove " + path_ +
                        " if stale)");
    std::fclose(f);
  }

  ~OutputLock() { std::remove(path_.c_str()); }

  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

 private:
  std::string path_;
};

namespace detail {

inline std::string join_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << text;
}

inline std::string run_id_for(const RunConfig& cfg, const std::string& evaluator_id) {
  ordered_json basis;
  basis["seed"] = cfg.evolution.seed;
  basis["skeleton_hash"] = hash_hex(cfg.skeleton.hash());
  basis["evaluator"] = evaluator_id;
  basis["config"] = cfg.to_json();
  return hash_hex(fnv1a64(basis.dump()));
}

inline ordered_json evolution_params_json(const EvolutionParams& p) {
  ordered_json j;
  j["population_size"] = p.population_size;
  j["epochs"] = p.epochs;
  j["prob"] = p.prob;
  j["mutation_times"] = p.mutation_times;
  j["crossover_times"] = p.crossover_times;
  j["top_k"] = p.top_k;
  j["top_n"] = p.top_n;
  j["seed"] = p.seed;
  j["max_sample_retries"] = p.max_sample_retries;
  return j;
}

inline ordered_json constraints_json(const HardwareConstraints& c) {
  ordered_json j;
  j["max_params"] = c.max_params ? ordered_json(*c.max_params) : ordered_json(nullptr);
  j["max_flops"] = c.max_flops ? ordered_json(*c.max_flops) : ordered_json(nullptr);
  return j;
}

inline ordered_json run_header(const RunConfig& cfg, const std::string& command,
                               const std::string& evaluator_id, const std::string& run_id) {
  ordered_json h;
  h["type"] = "header";
  h["run_id"] = run_id;
  h["command"] = command;
  h["code_version"] = kVersion;
  h["seed"] = cfg.evolution.seed;
  h["evaluator"] = evaluator_id;
  h["skeleton_hash"] = hash_hex(cfg.skeleton.hash());
  h["space_cardinality"] = space_cardinality(cfg.skeleton, 4).to_string();
  h["params"] = evolution_params_json(cfg.evolution);
  h["constraints"] = constraints_json(cfg.constraints);
  h["config"] = cfg.to_json();
  return h;
}

inline std::string summary_table(const std::vector<Candidate>& best) {
  std::string out = "rank  config            params      flops         fitness       human\n";
  char buf[200];
  int rank = 1;
  for (const auto& c : best) {
    std::snprintf(buf, sizeof(buf), "%4d  %-16s  %-10llu  %-12llu  %-12.6f  %s, %s\n", rank++,
                  c.key.c_str(), static_cast<unsigned long long>(c.cost.params),
                  static_cast<unsigned long long>(c.cost.flops), c.fitness.score,
                  human_params(c.cost.params).c_str(), human_flops(c.cost.flops).c_str());
    out += buf;
  }
  return out;
}

inline ordered_json summary_json(const std::vector<Candidate>& best, const std::string& run_id) {
  ordered_json j;
  j["run_id"] = run_id;
  j["top"] = ordered_json::array();
  int rank = 1;
  for (const auto& c : best) {
    ordered_json r;
    r["rank"] = rank++;
    r["config"] = c.key;
    r["params"] = c.cost.params;
    r["flops"] = c.cost.flops;
    r["fitness"] = c.fitness.score;
    r["origin"] = to_string(c.origin);
    r["generation"] = c.generation;
    j["top"].push_back(r);
  }
  return j;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// train-supernet
// ---------------------------------------------------------------------------

inline void cmd_train_supernet(const RunConfig& cfg, const std::string& out_dir) {
  OutputLock lock(out_dir);
  auto [train, val] = generate_dataset(cfg.dataset);
  SupernetWeights weights = init_weights(cfg.skeleton, cfg.train.seed);
  const TrainHistory history = train_supernet(weights, cfg.skeleton, train, cfg.train);

  const std::string weights_path = detail::join_path(out_dir, "weights.snas");
  save_weights(weights_path, weights);

  RunLogWriter log(detail::join_path(out_dir, "train_log.jsonl"));
  const std::string run_id = detail::run_id_for(cfg, "train-supernet");
  log.write_record(detail::run_header(cfg, "train-supernet", "train-supernet", run_id));
  for (size_t e = 0; e < history.epochs.size(); ++e) {
    ordered_json rec;
    rec["type"] = "epoch";
    rec["run_id"] = run_id;
    rec["epoch"] = e;
    rec["mean_total_loss"] = history.epochs[e].mean_total;
    rec["mean_largest_loss"] = history.epochs[e].mean_largest;
    rec["mean_smallest_loss"] = history.epochs[e].mean_smallest;
    rec["mean_random_loss"] = history.epochs[e].mean_random;
    log.write_record(rec);
  }

  const Fitness full = evaluate_supernet(weights, cfg.skeleton, uniform_config(cfg.skeleton, 4), val);
  std::cout << "trained supernet for " << cfg.train.epochs << " epochs; weights: " << weights_path
            << "\nfull-width validation accuracy: " << full.score << "\n";
}

// ---------------------------------------------------------------------------
// search
// ---------------------------------------------------------------------------

inline void cmd_search(const RunConfig& cfg, const std::string& weights_path,
                       const std::string& out_dir) {
  OutputLock lock(out_dir);

  // Assemble the evaluator. Surrogate mode needs no weights.
  SupernetWeights weights;
  LabeledSet val;
  std::unique_ptr<Evaluator> inner;
  if (cfg.evaluator == RunConfig::EvaluatorKind::supernet) {
    if (weights_path.empty())
      throw ConfigError("search with the supernet evaluator needs --weights <file>");
    weights = load_weights(weights_path);
    validate_weights(weights, cfg.skeleton);
    auto [train_set, val_set] = generate_dataset(cfg.dataset);
    val = std::move(val_set);
    inner = std::make_unique<SupernetEvaluator>(weights, cfg.skeleton, val);
  } else {
    inner = std::make_unique<SurrogateEvaluator>(cfg.skeleton.searchable_count(), cfg.surrogate_seed);
  }
  CachedEvaluator evaluator(*inner);

  // Baseline: the full-width architecture when it fits the constraints, else
  // the first feasible random sample (deterministic from the seed).
  ArchConfig baseline = uniform_config(cfg.skeleton, 4);
  if (!satisfies(evaluate_cost(cfg.skeleton, baseline), cfg.constraints)) {
    Rng baseline_rng = Rng::derive(cfg.evolution.seed, 0x62617365ull);
    baseline = sample_random(cfg.skeleton, cfg.constraints, baseline_rng, cfg.evolution.max_sample_retries);
  }

  const std::string run_id = detail::run_id_for(cfg, evaluator.id());
  RunLogWriter log(detail::join_path(out_dir, "runlog.jsonl"));
  log.write_record(detail::run_header(cfg, "search", evaluator.id(), run_id));

  const SearchResult result = run_search(
      cfg.skeleton, cfg.constraints, cfg.evolution, evaluator, baseline,
      [&](const Candidate& c, int64_t wall_ms) { log.write_candidate(run_id, c, wall_ms); },
      cfg.workers);
  log.flush();

  const std::string table = detail::summary_table(result.best);
  detail::write_text_file(detail::join_path(out_dir, "summary.txt"), table);
  detail::write_text_file(detail::join_path(out_dir, "summary.json"),
                          detail::summary_json(result.best, run_id).dump(2) + "\n");
  std::cout << "run " << run_id << ": " << result.best.size() << " architectures selected\n"
            << table << "evaluator cache: " << evaluator.hits() << " hits, " << evaluator.misses()
            << " misses\n";
}

// ---------------------------------------------------------------------------
// retrain
// ---------------------------------------------------------------------------

inline void cmd_retrain(const RunConfig& cfg, const std::vector<std::string>& archs,
                        const std::string& out_dir) {
  if (archs.empty()) throw ConfigError("retrain needs at least one architecture string");
  OutputLock lock(out_dir);

  std::vector<ArchConfig> configs;
  std::set<std::string> seen;
  for (const std::string& a : archs) {
    if (!seen.insert(a).second) {
      std::cerr << "warning: duplicate architecture " << a << " ignored\n";
      continue;
    }
    configs.push_back(decode(a, cfg.skeleton));
  }

  auto [train_set, val_set] = generate_dataset(cfg.dataset);
  std::vector<Candidate> ranked;
  std::vector<SupernetWeights> trained(configs.size());
  for (size_t i = 0; i < configs.size(); ++i) {
    const BackboneSkeleton materialized = materialize_skeleton(cfg.skeleton, configs[i]);
    TrainConfig tcfg = cfg.train;
    tcfg.seed = mix64(cfg.train.seed, fnv1a64(encode(configs[i])));  // fresh seeded init per arch
    SupernetWeights w = init_weights(materialized, tcfg.seed);
    train_standalone(w, materialized, train_set, tcfg);
    const Fitness acc = evaluate_supernet(w, materialized, ArchConfig{}, val_set);
    trained[i] = std::move(w);
    ranked.push_back(
        {configs[i], encode(configs[i]), evaluate_cost(cfg.skeleton, configs[i]), acc, Origin::seed, 0});
  }
  std::vector<size_t> order(ranked.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return precedes(ranked[a], ranked[b]); });

  std::vector<Candidate> sorted;
  for (size_t i : order) sorted.push_back(ranked[i]);
  const std::string table = detail::summary_table(sorted);
  const std::string run_id = detail::run_id_for(cfg, "retrain");
  detail::write_text_file(detail::join_path(out_dir, "retrain.txt"), table);
  detail::write_text_file(detail::join_path(out_dir, "retrain.json"),
                          detail::summary_json(sorted, run_id).dump(2) + "\n");
  const std::string best_path = detail::join_path(out_dir, "best_retrained.snas");
  save_weights(best_path, trained[order[0]]);
  std::cout << "retrained " << sorted.size() << " architecture(s); best " << sorted[0].key
            << " saved to " << best_path << "\n"
            << table;
}

// ---------------------------------------------------------------------------
// report-trends
// ---------------------------------------------------------------------------

inline TrendReport trends_from_log(const std::string& log_path, std::string* rendered = nullptr) {
  const ParsedRunLog log = read_run_log(log_path);
  if (!log.header.contains("config"))
    throw ParseError("run log header has no config echo; cannot recover the skeleton");
  RunConfig cfg;
  try {
    cfg = RunConfig::from_json(log.header.at("config"));
  } catch (const ConfigError& e) {
    throw ParseError(std::string("run log header config echo is invalid: ") + e.what());
  }

  // Reconstruct the run's top-n: dedup by canonical string, order by the
  // search's total order.
  std::vector<Candidate> candidates;
  std::set<std::string> seen;
  for (const auto& c : log.candidates) {
    if (!seen.insert(c.config).second) continue;
    candidates.push_back({decode(c.config, cfg.skeleton), c.config,
                          ResourceCost{c.params, c.flops}, Fitness{c.fitness}, Origin::random,
                          c.generation});
  }
  std::sort(candidates.begin(), candidates.end(), precedes);
  const size_t n = std::min(candidates.size(), static_cast<size_t>(cfg.evolution.top_n));
  std::vector<ArchConfig> top;
  for (size_t i = 0; i < n; ++i) top.push_back(candidates[i].config);

  const TrendReport report = compute_trends(top, cfg.skeleton);
  if (rendered) *rendered = render_trend_table(report);
  return report;
}

inline void cmd_report_trends(const std::string& log_path, const std::string& out_dir) {
  std::string rendered;
  const TrendReport report = trends_from_log(log_path, &rendered);
  std::cout << rendered;
  if (!out_dir.empty()) {
    OutputLock lock(out_dir);
    detail::write_text_file(detail::join_path(out_dir, "trends.txt"), rendered);
    detail::write_text_file(detail::join_path(out_dir, "trends.json"),
                            trend_report_json(report).dump(2) + "\n");
  }
}

}  // namespace slimnas
