#pragma once

#include <fstream>
#include <initializer_list>
#include <string>

#include <json.hpp>

#include "slimnas/archspace.hpp"
#include "slimnas/costmodel.hpp"
#include "slimnas/dataset.hpp"
#include "slimnas/errors.hpp"
#include "slimnas/evolution.hpp"
#include "slimnas/supernet.hpp"

namespace slimnas {

namespace detail {

using json = nlohmann::json;

inline void reject_unknown_keys(const json& obj, std::initializer_list<const char*> allowed,
                                const std::string& ctx) {
  if (!obj.is_object()) throw ConfigError(ctx + " must be a JSON object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        known = true;
        break;
      }
    if (!known) throw ConfigError("unknown key '" + it.key() + "' in " + ctx);
  }
}

template <typename T>
T field(const json& obj, const char* key, const std::string& ctx) {
  if (!obj.contains(key)) throw ConfigError("missing required field " + ctx + "." + key);
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("field " + ctx + "." + key + " has the wrong type");
  }
}

template <typename T>
T field_or(const json& obj, const char* key, const std::string& ctx, T fallback) {
  if (!obj.contains(key) || obj.at(key).is_null()) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("field " + ctx + "." + key + " has the wrong type");
  }
}

}  // namespace detail

// One declarative config file drives every command; flags only pick the
// command, the config path and the output dir. The effective (defaulted)
// config is echoed into run headers so any run can be reproduced from its
// own log.
struct RunConfig {
  enum class EvaluatorKind { supernet, surrogate };

  BackboneSkeleton skeleton;
  DatasetSpec dataset;
  TrainConfig train;
  HardwareConstraints constraints;
  EvolutionParams evolution;
  EvaluatorKind evaluator = EvaluatorKind::supernet;
  uint64_t surrogate_seed = 0;
  std::string output_dir;
  int workers = 1;

  void validate() const {
    skeleton.validate();
    train.validate();
    evolution.validate();
    if (dataset.num_classes < 2) throw ConfigError("dataset.num_classes must be >= 2");
    if (dataset.per_class < 2) throw ConfigError("dataset.per_class must be >= 2");
    if (dataset.noise_amplitude < 0) throw ConfigError("dataset.noise_amplitude must be >= 0");
    if (dataset.num_classes != skeleton.num_classes)
      throw ConfigError("dataset.num_classes must equal skeleton.num_classes");
    if (dataset.height != skeleton.input_height || dataset.width != skeleton.input_width)
      throw ConfigError("dataset dimensions must match the skeleton input size");
    if (skeleton.input_channels != 1)
      throw ConfigError("the synthetic dataset is single-channel; skeleton.input_channels must be 1");
    if (constraints.max_params && *constraints.max_params == 0)
      throw ConfigError("constraints.max_params must be positive when present");
    if (constraints.max_flops && *constraints.max_flops == 0)
      throw ConfigError("constraints.max_flops must be positive when present");
    if (output_dir.empty()) throw ConfigError("output_dir must be set");
    if (workers < 1) throw ConfigError("workers must be >= 1");
  }

  static RunConfig from_json(const nlohmann::json& j) {
    using detail::field;
    using detail::field_or;
    using detail::reject_unknown_keys;
    reject_unknown_keys(j, {"skeleton", "dataset", "train", "constraints", "evolution", "evaluator",
                            "surrogate_seed", "output_dir", "workers"},
                        "config");
    RunConfig cfg;

    if (!j.contains("skeleton")) throw ConfigError("missing required field config.skeleton");
    const auto& sk = j.at("skeleton");
    reject_unknown_keys(sk, {"input_height", "input_width", "input_channels", "num_classes", "layers"},
                        "skeleton");
    cfg.skeleton.input_height = field<int>(sk, "input_height", "skeleton");
    cfg.skeleton.input_width = field<int>(sk, "input_width", "skeleton");
    cfg.skeleton.input_channels = field<int>(sk, "input_channels", "skeleton");
    cfg.skeleton.num_classes = field<int>(sk, "num_classes", "skeleton");
    if (!sk.contains("layers") || !sk.at("layers").is_array())
      throw ConfigError("skeleton.layers must be an array");
    int li = 0;
    for (const auto& lj : sk.at("layers")) {
      const std::string ctx = "skeleton.layers[" + std::to_string(li++) + "]";
      reject_unknown_keys(lj, {"kind", "base_out_channels", "stride", "searchable", "is_neck_output"},
                          ctx);
      LayerDescriptor l;
      l.kind = layer_kind_from_string(field<std::string>(lj, "kind", ctx));
      if (is_conv(l.kind)) {
        l.base_out_channels = field<int>(lj, "base_out_channels", ctx);
        l.stride = field_or<int>(lj, "stride", ctx, 1);
        l.searchable = field_or<bool>(lj, "searchable", ctx, false);
      } else {
        for (const char* k : {"base_out_channels", "stride", "searchable"})
          if (lj.contains(k)) throw ConfigError(ctx + "." + k + " does not apply to " + to_string(l.kind));
      }
      l.is_neck_output = field_or<bool>(lj, "is_neck_output", ctx, false);
      cfg.skeleton.layers.push_back(l);
    }

    if (!j.contains("dataset")) throw ConfigError("missing required field config.dataset");
    const auto& ds = j.at("dataset");
    reject_unknown_keys(ds, {"seed", "num_classes", "per_class", "height", "width", "noise_amplitude"},
                        "dataset");
    cfg.dataset.seed = field<uint64_t>(ds, "seed", "dataset");
    cfg.dataset.num_classes = field_or<int>(ds, "num_classes", "dataset", 4);
    cfg.dataset.per_class = field_or<int>(ds, "per_class", "dataset", 100);
    cfg.dataset.height = field_or<int>(ds, "height", "dataset", 32);
    cfg.dataset.width = field_or<int>(ds, "width", "dataset", 32);
    cfg.dataset.noise_amplitude = field_or<double>(ds, "noise_amplitude", "dataset", 0.2);

    const auto tr = j.contains("train") ? j.at("train") : nlohmann::json::object();
    detail::reject_unknown_keys(tr, {"epochs", "batch_size", "learning_rate", "momentum", "seed"},
                                "train");
    cfg.train.epochs = field_or<int>(tr, "epochs", "train", 30);
    cfg.train.batch_size = field_or<int>(tr, "batch_size", "train", 32);
    cfg.train.learning_rate = field_or<double>(tr, "learning_rate", "train", 0.05);
    cfg.train.momentum = field_or<double>(tr, "momentum", "train", 0.9);
    cfg.train.seed = field_or<uint64_t>(tr, "seed", "train", 1);

    const auto cn = j.contains("constraints") ? j.at("constraints") : nlohmann::json::object();
    detail::reject_unknown_keys(cn, {"max_params", "max_flops"}, "constraints");
    if (cn.contains("max_params") && !cn.at("max_params").is_null())
      cfg.constraints.max_params = field<uint64_t>(cn, "max_params", "constraints");
    if (cn.contains("max_flops") && !cn.at("max_flops").is_null())
      cfg.constraints.max_flops = field<uint64_t>(cn, "max_flops", "constraints");

    const auto ev = j.contains("evolution") ? j.at("evolution") : nlohmann::json::object();
    detail::reject_unknown_keys(ev,
                                {"population_size", "epochs", "prob", "mutation_times",
                                 "crossover_times", "top_k", "top_n", "seed", "max_sample_retries"},
                                "evolution");
    cfg.evolution.population_size = field_or<int>(ev, "population_size", "evolution", 50);
    cfg.evolution.epochs = field_or<int>(ev, "epochs", "evolution", 20);
    cfg.evolution.prob = field_or<double>(ev, "prob", "evolution", 0.1);
    cfg.evolution.mutation_times = field_or<int>(ev, "mutation_times", "evolution", 25);
    cfg.evolution.crossover_times =
        field_or<int>(ev, "crossover_times", "evolution", cfg.evolution.mutation_times);
    cfg.evolution.top_k = field_or<int>(ev, "top_k", "evolution", 20);
    cfg.evolution.top_n = field_or<int>(ev, "top_n", "evolution", 10);
    cfg.evolution.seed = field_or<uint64_t>(ev, "seed", "evolution", 0);
    cfg.evolution.max_sample_retries = field_or<int>(ev, "max_sample_retries", "evolution", 10000);

    const std::string kind = field<std::string>(j, "evaluator", "config");
    if (kind == "supernet")
      cfg.evaluator = EvaluatorKind::supernet;
    else if (kind == "surrogate")
      cfg.evaluator = EvaluatorKind::surrogate;
    else
      throw ConfigError("config.evaluator must be 'supernet' or 'surrogate', got '" + kind + "'");

    cfg.surrogate_seed = field_or<uint64_t>(j, "surrogate_seed", "config", 0);
    cfg.output_dir = field<std::string>(j, "output_dir", "config");
    cfg.workers = field_or<int>(j, "workers", "config", 1);

    cfg.validate();
    return cfg;
  }

  static RunConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file '" + path + "'");
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
    }
    return from_json(j);
  }

  // Effective config with every default expanded; re-loading this document
  // reproduces the run.
  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    nlohmann::ordered_json sk;
    sk["input_height"] = skeleton.input_height;
    sk["input_width"] = skeleton.input_width;
    sk["input_channels"] = skeleton.input_channels;
    sk["num_classes"] = skeleton.num_classes;
    sk["layers"] = nlohmann::ordered_json::array();
    for (const auto& l : skeleton.layers) {
      nlohmann::ordered_json lj;
      lj["kind"] = to_string(l.kind);
      if (is_conv(l.kind)) {
        lj["base_out_channels"] = l.base_out_channels;
        lj["stride"] = l.stride;
        lj["searchable"] = l.searchable;
      }
      lj["is_neck_output"] = l.is_neck_output;
      sk["layers"].push_back(lj);
    }
    j["skeleton"] = sk;

    nlohmann::ordered_json ds;
    ds["seed"] = dataset.seed;
    ds["num_classes"] = dataset.num_classes;
    ds["per_class"] = dataset.per_class;
    ds["height"] = dataset.height;
    ds["width"] = dataset.width;
    ds["noise_amplitude"] = dataset.noise_amplitude;
    j["dataset"] = ds;

    nlohmann::ordered_json tr;
    tr["epochs"] = train.epochs;
    tr["batch_size"] = train.batch_size;
    tr["learning_rate"] = train.learning_rate;
    tr["momentum"] = train.momentum;
    tr["seed"] = train.seed;
    j["train"] = tr;

    nlohmann::ordered_json cn = nlohmann::ordered_json::object();
    if (constraints.max_params) cn["max_params"] = *constraints.max_params;
    if (constraints.max_flops) cn["max_flops"] = *constraints.max_flops;
    j["constraints"] = cn;

    nlohmann::ordered_json ev;
    ev["population_size"] = evolution.population_size;
    ev["epochs"] = evolution.epochs;
    ev["prob"] = evolution.prob;
    ev["mutation_times"] = evolution.mutation_times;
    ev["crossover_times"] = evolution.crossover_times;
    ev["top_k"] = evolution.top_k;
    ev["top_n"] = evolution.top_n;
    ev["seed"] = evolution.seed;
    ev["max_sample_retries"] = evolution.max_sample_retries;
    j["evolution"] = ev;

    j["evaluator"] = evaluator == EvaluatorKind::supernet ? "supernet" : "surrogate";
    j["surrogate_seed"] = surrogate_seed;
    j["output_dir"] = output_dir;
    // workers is an execution knob, not run identity: results are identical
    // for any worker count, so the echo (and thus the run_id) excludes it.
    return j;
  }
};

}  // namespace slimnas
