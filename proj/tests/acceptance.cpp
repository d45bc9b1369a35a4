// Acceptance suite: one line per criterion, [PASS]/[FAIL] plus details.
// Exit status is the number of failed criteria.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "oracles.hpp"
#include "slimnas/commands.hpp"
#include "slimnas/evaluator.hpp"
#include "slimnas/evolution.hpp"
#include "slimnas/runconfig.hpp"
#include "slimnas/supernet.hpp"

using namespace slimnas;
using slimnas::testing::count_ops_bruteforce;
using slimnas::testing::eleven_layer_skeleton;
using slimnas::testing::for_each_config;
using slimnas::testing::kendall_tau_b;
using slimnas::testing::random_skeleton;
using slimnas::testing::toy_skeleton;

namespace {

namespace fs = std::filesystem;

struct Criterion {
  std::string name;
  double budget_seconds = 0;
  std::function<std::string()> body;  // returns "" on pass, else failure detail
};

std::string tmp_dir(const std::string& name) {
  const std::string dir = (fs::temp_directory_path() / ("slimnas_acceptance_" + name)).string();
  fs::remove_all(dir);
  return dir;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

#define CHECK(cond, msg)                    \
  do {                                      \
    if (!(cond)) return std::string(msg);   \
  } while (0)

// ---------------------------------------------------------------------------
// C1: exact cardinality and agreement with exhaustive enumeration
// ---------------------------------------------------------------------------
std::string c1_cardinality() {
  const BigUint card = space_cardinality(eleven_layer_skeleton(), 4);
  CHECK(card.to_string() == "4194304", "11-layer cardinality != 4194304");
  for (int n = 0; n <= 8; ++n) {
    uint64_t count = 0;
    const BackboneSkeleton s = toy_skeleton(n);
    for_each_config(s, [&](const ArchConfig&) { ++count; });
    if (!(space_cardinality(s, 4) == count))
      return "enumeration mismatch at " + std::to_string(n) + " layers";
  }
  return "";
}

// ---------------------------------------------------------------------------
// C2: evolutionary search recovers the constrained optimum
// ---------------------------------------------------------------------------
std::string c2_search_oracle() {
  const BackboneSkeleton s = toy_skeleton(8);
  SurrogateEvaluator surrogate(8, 2024);

  std::vector<uint64_t> all_flops;
  for_each_config(s, [&](const ArchConfig& c) { all_flops.push_back(evaluate_cost(s, c).flops); });
  std::sort(all_flops.begin(), all_flops.end());
  const HardwareConstraints constraints{std::nullopt, all_flops[all_flops.size() * 45 / 100]};

  uint64_t feasible = 0;
  std::vector<Candidate> ranked;
  for_each_config(s, [&](const ArchConfig& c) {
    const ResourceCost cost = evaluate_cost(s, c);
    if (!satisfies(cost, constraints)) return;
    ++feasible;
    ranked.push_back({c, encode(c), cost, surrogate.evaluate(c), Origin::random, 0});
  });
  std::sort(ranked.begin(), ranked.end(), precedes);
  CHECK(feasible * 2 <= all_flops.size(), "constraint excludes < 50% of the space");

  std::set<std::string> oracle_top10;
  for (int i = 0; i < 10; ++i) oracle_top10.insert(ranked[i].key);

  int top1_hits = 0, top10_hits = 0;
  for (uint64_t seed = 1; seed <= 20; ++seed) {
    EvolutionParams params;  // reference defaults P=50 T=20 p=0.1 m=25 k=20 n=10
    params.seed = seed;
    CachedEvaluator cached(surrogate);
    ArchConfig baseline = uniform_config(s, 4);
    if (!satisfies(evaluate_cost(s, baseline), constraints)) {
      Rng rng = Rng::derive(seed, 0x62617365ull);
      baseline = sample_random(s, constraints, rng, params.max_sample_retries);
    }
    const SearchResult r = run_search(s, constraints, params, cached, baseline);
    top1_hits += r.best[0].key == ranked[0].key ? 1 : 0;
    top10_hits += oracle_top10.count(r.best[0].key) != 0 ? 1 : 0;
  }
  std::printf("      top-1 exact in %d/20 runs (need >= 18), inside oracle top-10 in %d/20 (need 20)\n",
              top1_hits, top10_hits);
  CHECK(top1_hits >= 18, "top-1 recovered in only " + std::to_string(top1_hits) + "/20 runs");
  CHECK(top10_hits == 20, "top-1 outside oracle top-10 in " + std::to_string(20 - top10_hits) + " runs");
  return "";
}

// ---------------------------------------------------------------------------
// C3: analytic costs equal the loop-counting oracle; monotone in every factor
// ---------------------------------------------------------------------------
std::string c3_cost_oracle() {
  Rng rng(20240812);
  for (int i = 0; i < 10; ++i) {
    const BackboneSkeleton s = random_skeleton(rng);
    const ArchConfig c = random_config(s, rng);
    if (!(evaluate_cost(s, c) == count_ops_bruteforce(s, c)))
      return "oracle mismatch on seeded pair " + std::to_string(i);
  }
  const BackboneSkeleton s = toy_skeleton(4, 8, 6);
  std::string failure;
  for_each_config(s, [&](const ArchConfig& c) {
    const ResourceCost base = evaluate_cost(s, c);
    for (size_t i = 0; i < c.size(); ++i)
      for (int q = c.at(i).quarters() + 1; q <= 4; ++q) {
        auto factors = c.factors();
        factors[i] = ScaleFactor(q);
        const ResourceCost bumped = evaluate_cost(s, ArchConfig(factors));
        if (bumped.params < base.params || bumped.flops < base.flops)
          failure = "monotonicity violated at " + encode(c) + " layer " + std::to_string(i);
      }
  });
  return failure;
}

// ---------------------------------------------------------------------------
// C4: gradient checks against central finite differences
// ---------------------------------------------------------------------------
std::string c4_autodiff() {
  double worst_conv = 0, worst_tight = 0;
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    worst_conv = std::max(worst_conv, gradient_check(GradCheckKind::Conv3x3, seed));
    worst_conv = std::max(worst_conv, gradient_check(GradCheckKind::Conv1x1, seed));
    worst_tight = std::max(worst_tight, gradient_check(GradCheckKind::LinearHead, seed));
    worst_tight = std::max(worst_tight, gradient_check(GradCheckKind::ReluOffKink, seed));
  }
  std::printf("      max rel error: conv %.3e (tol 1e-3), head/relu %.3e (tol 1e-4)\n", worst_conv,
              worst_tight);
  CHECK(worst_conv < 1e-3, "conv gradient error " + std::to_string(worst_conv));
  CHECK(worst_tight < 1e-4, "head/relu gradient error " + std::to_string(worst_tight));
  return "";
}

// The frozen desk-scale recipe used by C5 and C6.
RunConfig c6_config() {
  RunConfig cfg;
  cfg.skeleton.input_height = 32;
  cfg.skeleton.input_width = 32;
  cfg.skeleton.input_channels = 1;
  cfg.skeleton.num_classes = 12;
  cfg.skeleton.layers = {
      {LayerKind::Conv3x3, 4, 1, false, false},  {LayerKind::Conv3x3, 4, 2, true, false},
      {LayerKind::Conv3x3, 8, 1, true, false},   {LayerKind::Conv3x3, 8, 2, true, false},
      {LayerKind::Conv3x3, 16, 1, true, true},   {LayerKind::Conv3x3, 16, 2, true, false},
      {LayerKind::Conv1x1, 16, 1, true, true},   {LayerKind::GlobalAvgPool, 0, 1, false, false},
      {LayerKind::LinearHead, 0, 1, false, false}};
  cfg.dataset = {7, 12, 80, 32, 32, 0.2};
  cfg.train = {30, 32, 0.01, 0.9, 1};
  cfg.evaluator = RunConfig::EvaluatorKind::supernet;
  cfg.output_dir = "/tmp/unused";
  cfg.validate();
  return cfg;
}

// ---------------------------------------------------------------------------
// C5: sliced shared weights match materialized standalone networks
// ---------------------------------------------------------------------------
std::string c5_inheritance() {
  const RunConfig cfg = c6_config();
  const BackboneSkeleton& s = cfg.skeleton;
  const SupernetWeights w = init_weights(s, 77);
  Tensor4 batch(4, 1, 32, 32);
  Rng data_rng(5);
  for (auto& x : batch.data) x = data_rng.uniform_float(0.f, 1.f);

  Rng rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    const ArchConfig c = random_config(s, rng);
    const Tensor2 shared = forward(w, s, c, batch);
    const Tensor2 solo = forward(slice_weights(w, s, c), materialize_skeleton(s, c), ArchConfig{}, batch);
    for (size_t i = 0; i < shared.data.size(); ++i)
      if (std::fabs(static_cast<double>(shared.data[i]) - solo.data[i]) > 1e-6)
        return "logit mismatch on trial " + std::to_string(trial);
  }
  const ArchConfig full = uniform_config(s, 4);
  const Tensor2 a = forward(w, s, full, batch);
  const Tensor2 b = forward(slice_weights(w, s, full), materialize_skeleton(s, full), ArchConfig{}, batch);
  for (size_t i = 0; i < a.data.size(); ++i)
    if (std::bit_cast<uint32_t>(a.data[i]) != std::bit_cast<uint32_t>(b.data[i]))
      return "full-width logits are not bitwise identical";
  return "";
}

// ---------------------------------------------------------------------------
// C6: sandwich training composition, learnability, and ranking fidelity
// ---------------------------------------------------------------------------
std::string c6_sandwich_training() {
  const RunConfig cfg = c6_config();
  const BackboneSkeleton& s = cfg.skeleton;
  auto [train_set, val_set] = generate_dataset(cfg.dataset);

  // Each step trains exactly the largest, the smallest and two sampled
  // sub-networks.
  {
    SupernetWeights w = init_weights(s, 3);
    SgdState state = make_sgd_state(w);
    Rng rng(4);
    Tensor4 batch(8, 1, 32, 32);
    Rng data_rng(6);
    for (auto& x : batch.data) x = data_rng.uniform_float(0.f, 1.f);
    std::vector<int> labels(8);
    for (auto& l : labels) l = data_rng.uniform_int(0, 11);
    for (int step = 0; step < 10; ++step) {
      const SandwichReport r = train_step_sandwich(w, state, s, batch, labels, rng, 0.005, 0.9);
      CHECK(r.arch_largest == "444444", "largest sub-network missing from a step");
      CHECK(r.arch_smallest == "111111", "smallest sub-network missing from a step");
      CHECK(r.arch_rand_a.size() == 6 && r.arch_rand_b.size() == 6, "random branch missing");
    }
  }

  SupernetWeights w = init_weights(s, cfg.train.seed);
  train_supernet(w, s, train_set, cfg.train);
  const double full_acc = evaluate_supernet(w, s, uniform_config(s, 4), val_set).score;
  std::printf("      all-max inherited accuracy after %d epochs: %.4f (need >= 0.9)\n",
              cfg.train.epochs, full_acc);
  CHECK(full_acc >= 0.9, "all-max accuracy " + std::to_string(full_acc) + " < 0.9");

  const std::vector<std::string> archs = {"444444", "111111", "444411", "114444",
                                          "332211", "122334", "424242", "213243"};
  std::vector<double> inherited, retrained;
  for (const auto& a : archs)
    inherited.push_back(evaluate_supernet(w, s, decode(a, s), val_set).score);
  for (const auto& a : archs) {
    const BackboneSkeleton materialized = materialize_skeleton(s, decode(a, s));
    TrainConfig tcfg{35, 32, 0.005, 0.9, mix64(cfg.train.seed, fnv1a64(a))};
    SupernetWeights solo = init_weights(materialized, tcfg.seed);
    train_standalone(solo, materialized, train_set, tcfg);
    retrained.push_back(evaluate_supernet(solo, materialized, ArchConfig{}, val_set).score);
  }
  const double tau = kendall_tau_b(inherited, retrained);
  std::printf("      inherited-vs-retrained Kendall tau-b over 8 configs: %.3f (soft gate >= 0.4: %s)\n",
              tau, tau >= 0.4 ? "met" : "NOT met, reported only");
  return "";
}

// ---------------------------------------------------------------------------
// C7: genetic-operator statistics
// ---------------------------------------------------------------------------
std::string c7_genetic_operators() {
  const BackboneSkeleton s = eleven_layer_skeleton();
  const ArchConfig parent = uniform_config(s, 4);
  Rng rng(3);
  const int trials = 40000;
  long long changed = 0;
  for (int t = 0; t < trials; ++t) {
    const ArchConfig child = mutate(parent, 0.1, rng, HardwareConstraints{}, s, 10);
    for (size_t i = 0; i < child.size(); ++i) changed += child.at(i) == parent.at(i) ? 0 : 1;
  }
  const double mean_changed = static_cast<double>(changed) / trials;
  std::printf("      mean changed layers %.4f (expect 0.825 +/- 0.05)\n", mean_changed);
  CHECK(std::fabs(mean_changed - 0.825) <= 0.05, "mutation rate off: " + std::to_string(mean_changed));

  const BackboneSkeleton s7 = toy_skeleton(7);
  Rng rng2(5);
  for (int t = 0; t < 500; ++t) {
    const ArchConfig p1 = random_config(s7, rng2);
    const ArchConfig p2 = random_config(s7, rng2);
    const ArchConfig child = crossover(p1, p2, 0.4, rng2, HardwareConstraints{}, s7, 10);
    for (size_t i = 0; i < child.size(); ++i)
      if (!(child.at(i) == p1.at(i) || child.at(i) == p2.at(i)))
        return "crossover invented a gene not present in either parent";
    if (!(mutate(p1, 0.0, rng2, HardwareConstraints{}, s7, 10) == p1)) return "mutate p=0 changed the parent";
    if (!(crossover(p1, p2, 1.0, rng2, HardwareConstraints{}, s7, 10) == p1)) return "crossover p=1 != parent1";
    if (!(crossover(p1, p2, 0.0, rng2, HardwareConstraints{}, s7, 10) == p2)) return "crossover p=0 != parent2";
  }
  return "";
}

// ---------------------------------------------------------------------------
// C8: byte-identical run logs across reruns and worker counts
// ---------------------------------------------------------------------------
std::string c8_determinism() {
  RunConfig cfg;
  cfg.skeleton = toy_skeleton(8, 8, 8);
  cfg.skeleton.num_classes = 3;
  cfg.dataset = {11, 3, 10, 8, 8, 0.2};
  cfg.evaluator = RunConfig::EvaluatorKind::surrogate;
  cfg.surrogate_seed = 404;
  cfg.evolution.seed = 1234;
  const ResourceCost full = evaluate_cost(cfg.skeleton, uniform_config(cfg.skeleton, 4));
  cfg.constraints.max_flops = full.flops * 4 / 5;
  cfg.output_dir = "/tmp/unused";
  cfg.validate();

  const std::string dir_a = tmp_dir("c8_a"), dir_b = tmp_dir("c8_b"), dir_c = tmp_dir("c8_c");
  {
    // keep the acceptance output to one line per criterion
    std::stringstream sink;
    auto* old = std::cout.rdbuf(sink.rdbuf());
    cmd_search(cfg, "", dir_a);
    cmd_search(cfg, "", dir_b);
    cfg.workers = 4;
    cmd_search(cfg, "", dir_c);
    std::cout.rdbuf(old);
  }
  const std::string log = read_file(dir_a + "/runlog.jsonl");
  CHECK(!log.empty(), "run log is empty");
  CHECK(log == read_file(dir_b + "/runlog.jsonl"), "reruns differ");
  CHECK(log == read_file(dir_c + "/runlog.jsonl"), "concurrent-evaluator log differs");
  return "";
}

// ---------------------------------------------------------------------------
// C9: reference ratio-vector fixtures and the trend report
// ---------------------------------------------------------------------------
std::string c9_reference_vectors() {
  const BackboneSkeleton s = eleven_layer_skeleton();
  for (const std::string arch : {"44444342334", "44444342434"})
    if (encode(decode(arch, s)) != arch) return "round-trip failed for " + arch;

  RunConfig cfg;
  cfg.skeleton = s;
  cfg.dataset = {1, 4, 10, 16, 16, 0.2};
  cfg.evaluator = RunConfig::EvaluatorKind::surrogate;
  cfg.output_dir = "/tmp/unused";
  cfg.validate();

  const std::string dir = tmp_dir("c9");
  fs::create_directories(dir);
  const std::string log_path = dir + "/runlog.jsonl";
  {
    RunLogWriter log(log_path);
    log.write_record(detail::run_header(cfg, "search", "surrogate:0", "0000000000000000"));
    double fitness = 0.9;
    for (const std::string arch : {"44444342334", "44444342434"}) {
      const ArchConfig c = decode(arch, s);
      log.write_candidate("0000000000000000",
                          {c, arch, evaluate_cost(s, c), Fitness{fitness}, Origin::random, 0}, 0);
      fitness -= 0.1;
    }
  }
  const TrendReport report = trends_from_log(log_path);
  CHECK(report.candidates_used == 2, "expected 2 candidates in the trend report");
  for (int pos : {1, 2, 3, 4, 5, 11})
    if (report.rows[pos - 1].mean_factor != 1.0)
      return "mean factor at position " + std::to_string(pos) + " != 1.0";
  CHECK(report.rows[5].mean_factor == 0.75, "mean factor at position 6 != 0.75");
  CHECK(report.rows[7].mean_factor == 0.5, "mean factor at position 8 != 0.5");
  return "";
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"C1 search-space cardinality", 1.0, c1_cardinality},
      {"C2 search-correctness oracle", 120.0, c2_search_oracle},
      {"C3 cost-model oracle", 10.0, c3_cost_oracle},
      {"C4 autodiff gradient gates", 30.0, c4_autodiff},
      {"C5 inheritance fidelity", 30.0, c5_inheritance},
      {"C6 sandwich training", 900.0, c6_sandwich_training},
      {"C7 genetic-operator statistics", 30.0, c7_genetic_operators},
      {"C8 determinism and logging", 60.0, c8_determinism},
      {"C9 reference-vector fixtures", 1.0, c9_reference_vectors},
  };

  int failures = 0;
  for (const auto& criterion : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    std::string detail;
    try {
      detail = criterion.body();
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (detail.empty() && elapsed > criterion.budget_seconds)
      detail = "runtime " + std::to_string(elapsed) + "s exceeds budget " +
               std::to_string(criterion.budget_seconds) + "s";
    if (detail.empty()) {
      std::printf("[PASS] %s (%.2fs)\n", criterion.name.c_str(), elapsed);
    } else {
      std::printf("[FAIL] %s (%.2fs): %s\n", criterion.name.c_str(), elapsed, detail.c_str());
      ++failures;
    }
    std::fflush(stdout);
  }
  if (failures == 0)
    std::printf("all %zu acceptance criteria passed\n", criteria.size());
  else
    std::printf("%d acceptance criteria FAILED\n", failures);
  return failures;
}
