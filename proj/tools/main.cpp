#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "slimnas/commands.hpp"
#include "slimnas/version.hpp"

namespace {

// Exit codes: 0 success, 2 config validation, 3 infeasibility,
// 4 numeric/training failure, 1 anything else.
int run(int argc, char** argv) {
  CLI::App app{"one-shot channel-width architecture search"};
  app.set_version_flag("--version", std::string("slimnas ") + slimnas::kVersion);
  app.require_subcommand(1);

  std::string config_path, weights_path, out_dir, log_path, archs_csv;

  CLI::App* train = app.add_subcommand("train-supernet", "train the weight-sharing supernet");
  train->add_option("--config", config_path, "run config file")->required();
  train->add_option("--out", out_dir, "output directory (default: config output_dir)");

  CLI::App* search = app.add_subcommand("search", "run the evolutionary architecture search");
  search->add_option("--config", config_path, "run config file")->required();
  search->add_option("--weights", weights_path, "trained supernet weights (supernet evaluator)");
  search->add_option("--out", out_dir, "output directory (default: config output_dir)");

  CLI::App* retrain = app.add_subcommand("retrain", "train architectures from scratch and rank them");
  retrain->add_option("--config", config_path, "run config file")->required();
  retrain->add_option("--archs", archs_csv, "comma-separated architecture strings")->required();
  retrain->add_option("--out", out_dir, "output directory (default: config output_dir)");

  CLI::App* trends = app.add_subcommand("report-trends", "channel-allocation trends from a run log");
  trends->add_option("--log", log_path, "run log (runlog.jsonl)")->required();
  trends->add_option("--out", out_dir, "optional output directory for trend files");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (trends->parsed()) {
      slimnas::cmd_report_trends(log_path, out_dir);
      return 0;
    }
    const slimnas::RunConfig cfg = slimnas::RunConfig::load(config_path);
    const std::string out = out_dir.empty() ? cfg.output_dir : out_dir;
    if (train->parsed()) {
      slimnas::cmd_train_supernet(cfg, out);
    } else if (search->parsed()) {
      slimnas::cmd_search(cfg, weights_path, out);
    } else if (retrain->parsed()) {
      std::vector<std::string> archs;
      std::string cur;
      for (char c : archs_csv) {
        if (c == ',') {
          if (!cur.empty()) archs.push_back(cur);
          cur.clear();
        } else if (!std::isspace(static_cast<unsigned char>(c))) {
          cur.push_back(c);
        }
      }
      if (!cur.empty()) archs.push_back(cur);
      slimnas::cmd_retrain(cfg, archs, out);
    }
    return 0;
  } catch (const slimnas::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const slimnas::InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return 3;
  } catch (const slimnas::TrainingError& e) {
    std::cerr << "training failure: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
