// graphmem command-line interface: preprocess, train, cross-validate,
// evaluate, export cluster assignments, and run the gradient-check suite.
//
// Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numeric
// failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "graphmem/dataset_io.hpp"
#include "graphmem/error.hpp"
#include "graphmem/gradcheck_suite.hpp"
#include "graphmem/runner.hpp"

namespace fs = std::filesystem;
using namespace graphmem;

namespace {

constexpr const char* kCacheEnvVar = "GRAPHMEM_CACHE_DIR";

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> max_epochs;
  std::optional<std::int64_t> batch_size;
  std::optional<double> lr;
  std::optional<std::string> output_dir;
  std::optional<std::string> dataset_path;
  std::optional<std::string> model;
};

void add_override_flags(CLI::App* cmd, Overrides& ov) {
  cmd->add_option("--seed", ov.seed, "Override the config seed");
  cmd->add_option("--max-epochs", ov.max_epochs, "Override max_epochs");
  cmd->add_option("--batch-size", ov.batch_size, "Override batch_size");
  cmd->add_option("--lr", ov.lr, "Override the learning rate");
  cmd->add_option("--output-dir", ov.output_dir, "Override output_dir");
  cmd->add_option("--dataset-path", ov.dataset_path, "Override dataset.path");
  cmd->add_option("--model", ov.model, "Override the model kind (gmn|memgnn)");
}

RunConfig load_config(const std::string& path, const Overrides& ov) {
  RunConfig cfg = RunConfig::from_file(path);
  if (ov.seed) cfg.seed = *ov.seed;
  if (ov.max_epochs) cfg.max_epochs = *ov.max_epochs;
  if (ov.batch_size) cfg.batch_size = *ov.batch_size;
  if (ov.lr) cfg.lr = *ov.lr;
  if (ov.output_dir) cfg.output_dir = *ov.output_dir;
  if (ov.dataset_path) cfg.dataset_path = *ov.dataset_path;
  if (ov.model) cfg.model = *ov.model;
  cfg.validate();
  return cfg;
}

std::string cache_dir_from_env(const std::string& flag_value) {
  if (!flag_value.empty()) return flag_value;
  const char* env = std::getenv(kCacheEnvVar);
  return env ? std::string(env) : std::string();
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path);
  out << content;
}

int run_commands(int argc, char** argv) {
  CLI::App app{"Hierarchical graph representation learning with memory layers"};
  app.require_subcommand(1);

  std::string config_path, cache_flag, checkpoint_path, out_path;
  std::int64_t folds = 10;
  std::uint64_t gradcheck_seed = 1;
  bool inject_fault = false;
  Overrides ov;

  CLI::App* train = app.add_subcommand("train", "Train a model and write a checkpoint");
  train->add_option("config", config_path, "Run config JSON file")->required();
  train->add_option("--cache-dir", cache_flag, "Diffusion cache directory");
  add_override_flags(train, ov);

  CLI::App* cv = app.add_subcommand("cv", "K-fold cross-validation");
  cv->add_option("config", config_path, "Run config JSON file")->required();
  cv->add_option("-k,--folds", folds, "Fold count (default 10)");
  cv->add_option("--cache-dir", cache_flag, "Diffusion cache directory");
  add_override_flags(cv, ov);

  CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  eval->add_option("checkpoint", checkpoint_path, "Checkpoint file")->required();
  eval->add_option("config", config_path, "Run config JSON file")->required();
  eval->add_option("--cache-dir", cache_flag, "Diffusion cache directory");
  add_override_flags(eval, ov);

  CLI::App* exp = app.add_subcommand("export-clusters", "Write per-layer cluster CSVs");
  exp->add_option("checkpoint", checkpoint_path, "Checkpoint file")->required();
  exp->add_option("config", config_path, "Run config JSON file")->required();
  exp->add_option("--out", out_path, "Output directory (default: config output_dir)");
  exp->add_option("--cache-dir", cache_flag, "Diffusion cache directory");
  add_override_flags(exp, ov);

  CLI::App* grad = app.add_subcommand("gradcheck", "Finite-difference gradient suite");
  grad->add_option("--seed", gradcheck_seed, "Suite seed");
  grad->add_flag("--inject-fault", inject_fault,
                 "Add a corrupted backward rule (negative control; forces failure)");

  CLI::App* prep = app.add_subcommand("preprocess", "Compute and cache diffusion matrices");
  prep->add_option("config", config_path, "Run config JSON file")->required();
  prep->add_option("--cache-dir", cache_flag, "Diffusion cache directory");
  add_override_flags(prep, ov);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  const std::string cache_dir = cache_dir_from_env(cache_flag);

  if (grad->parsed()) {
    const auto lines = run_gradcheck_suite(gradcheck_seed, 1e-4, inject_fault);
    bool all_ok = true;
    for (const auto& line : lines) {
      std::cout << (line.ok ? "PASS" : "FAIL") << "  " << line.name << "  max_rel_err="
                << format_double(line.max_rel_err) << "\n";
      all_ok = all_ok && line.ok;
    }
    std::cout << (all_ok ? "gradcheck: all passed" : "gradcheck: FAILURES above") << "\n";
    return all_ok ? 0 : 3;
  }

  if (prep->parsed()) {
    const RunConfig cfg = load_config(config_path, ov);
    const std::string dir = cache_dir.empty() ? cfg.output_dir : cache_dir;
    const std::string path = run_preprocess(cfg, dir);
    std::cout << "wrote " << path << "\n";
    return 0;
  }

  if (train->parsed()) {
    const RunConfig cfg = load_config(config_path, ov);
    const PreparedRun prepared = prepare_run(cfg, cache_dir);
    const TrainOutput out = run_train(prepared);
    fs::create_directories(cfg.output_dir);
    const std::string ckpt = (fs::path(cfg.output_dir) / "checkpoint.gmck").string();
    save_checkpoint(out.checkpoint, ckpt);
    std::string log;
    for (const std::string& line : out.log_lines) log += line + "\n";
    write_text((fs::path(cfg.output_dir) / "train_log.jsonl").string(), log);
    std::cout << "checkpoint: " << ckpt << "\n";
    if (out.fit.best_epoch >= 0) {
      std::cout << "best_epoch: " << out.fit.best_epoch
                << "  metric: " << format_double(out.fit.best_val) << "\n";
    }
    return 0;
  }

  if (cv->parsed()) {
    const RunConfig cfg = load_config(config_path, ov);
    const PreparedRun prepared = prepare_run(cfg, cache_dir);
    const CvResult result = run_cv(prepared, folds);
    fs::create_directories(cfg.output_dir);
    const std::string csv_path = (fs::path(cfg.output_dir) / "cv_metrics.csv").string();
    write_text(csv_path, metrics_csv(result));
    std::cout << metrics_csv(result);
    std::cout << "wrote " << csv_path << "\n";
    return 0;
  }

  if (eval->parsed()) {
    const RunConfig cfg = load_config(config_path, ov);
    const ModelParams params = load_checkpoint(checkpoint_path);
    PreparedRun prepared = prepare_run(cfg, cache_dir);
    if (prepared.ds.d_in != params.config.d_in ||
        prepared.ds.max_nodes() > params.config.n_max) {
      throw DataError("eval: dataset dimensions do not match the checkpoint");
    }
    prepared.model_cfg = params.config;  // evaluate under the trained architecture
    prepared.topo = build_topo_cache(prepared.ds, params.config, cache_dir);
    std::vector<std::int64_t> all;
    for (std::int64_t i = 0; i < prepared.ds.size(); ++i) all.push_back(i);
    const Metrics metrics = evaluate_model(params, prepared.ds, all, prepared.topo);
    std::cout << eval_csv(metrics, params.config.task);
    return 0;
  }

  if (exp->parsed()) {
    const RunConfig cfg = load_config(config_path, ov);
    const ModelParams params = load_checkpoint(checkpoint_path);
    PreparedRun prepared = prepare_run(cfg, cache_dir);
    prepared.topo = build_topo_cache(prepared.ds, params.config, cache_dir);
    const std::string dir = out_path.empty() ? cfg.output_dir : out_path;
    for (const std::string& path :
         export_clusters(params, prepared.ds, prepared.topo, dir)) {
      std::cout << "wrote " << path << "\n";
    }
    return 0;
  }

  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_commands(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const ContractError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const FormatError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const ConvergenceError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
