#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "svddlab/checkpoint.hpp"
#include "svddlab/config.hpp"
#include "svddlab/dataset_io.hpp"
#include "svddlab/error.hpp"
#include "svddlab/evalreport.hpp"
#include "svddlab/experiments.hpp"
#include "svddlab/gradsuite.hpp"
#include "svddlab/metrics_log.hpp"
#include "svddlab/trainer.hpp"

namespace fs = std::filesystem;
using namespace svddlab;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNumeric = 2;

constexpr const char* kDatasetFile = "dataset.tds";
constexpr const char* kSplitsFile = "splits.txt";

struct CommonOptions {
  std::string config_path;
  std::string data_dir;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

RunConfig load_run_config(const CommonOptions& opt, const RunConfig& defaults) {
  RunConfig config = defaults;
  if (!opt.config_path.empty()) config = load_config(opt.config_path);
  return config;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

void write_resolved(const fs::path& dir, const RunConfig& config) {
  fs::create_directories(dir);
  write_text(dir / "resolved_config", resolved_config(config));
}

PreparedData load_prepared(const CommonOptions& opt, const RunConfig& config) {
  if (opt.data_dir.empty()) throw ConfigError("--data is required");
  const fs::path dir = opt.data_dir;
  if (!fs::exists(dir / kDatasetFile)) throw ConfigError("no " + std::string(kDatasetFile) + " in " + dir.string());
  SplitCorpus sc;
  sc.corpus = load_dataset(dir / kDatasetFile);
  sc.splits = load_splits(dir / kSplitsFile);
  if (sc.corpus.dims != config.dims) {
    throw ConfigError("dataset image dims differ from the config (channels/height/width)");
  }
  return prepare_data(std::move(sc), config.train.probe_size);
}

int cmd_gen(const CommonOptions& opt, const std::vector<std::size_t>& ppm) {
  RunConfig config = load_run_config(opt, RunConfig{});
  if (opt.seed) config.data_seed = *opt.seed;
  config.validate();
  const fs::path out = opt.out_dir;
  const SplitCorpus sc = generate_corpus(config);
  fs::create_directories(out);
  save_dataset(out / kDatasetFile, sc.corpus);
  save_splits(out / kSplitsFile, sc.splits);
  write_resolved(out, config);
  for (std::size_t idx : ppm) {
    if (idx >= sc.corpus.count()) throw ConfigError("--ppm index " + std::to_string(idx) + " out of range");
    export_ppm(out / ("image_" + std::to_string(idx) + ".ppm"), sc.corpus, idx);
  }
  if (!opt.quiet) {
    std::printf("wrote %zu images (train %zu, val %zu, test %zu) to %s\n", sc.corpus.count(),
                sc.splits.train.size(), sc.splits.val.size(), sc.splits.test.size(), out.string().c_str());
  }
  return kExitOk;
}

int cmd_train(const CommonOptions& opt) {
  RunConfig config = load_run_config(opt, RunConfig{});
  if (opt.seed) config.train.seed = *opt.seed;
  config.validate();
  const PreparedData data = load_prepared(opt, config);
  const fs::path out = opt.out_dir;
  write_resolved(out, config);

  const TrainResult result = train(config.encoder_spec(), config.train, data.train);
  save_metrics_csv(out / "metrics.csv", result.log);
  save_model(out / "final.ckpt", result.final_params, result.final_state);
  save_model(out / "best.ckpt", result.best_params, result.best_state);
  if (result.aborted) {
    std::fprintf(stderr, "training aborted: %s\n", result.abort_reason.c_str());
    return kExitNumeric;
  }
  if (!opt.quiet) {
    int collapsed = 0;
    for (const auto& row : result.log) collapsed += row.collapsed.value_or(false) ? 1 : 0;
    std::printf("epochs=%d best_epoch=%d best_val_auc=%s collapsed_epochs=%d\n", config.train.max_epochs,
                result.best_epoch, format_double(result.best_val_auc).c_str(), collapsed);
  }
  return kExitOk;
}

int cmd_eval(const CommonOptions& opt, const std::string& checkpoint, const std::string& split) {
  RunConfig config = load_run_config(opt, RunConfig{});
  if (opt.seed) config.train.seed = *opt.seed;
  config.validate();
  if (checkpoint.empty()) throw ConfigError("--checkpoint is required");
  const PreparedData data = load_prepared(opt, config);

  SvddState state;
  state.mode = config.train.mode;
  state.nu = config.train.nu;
  state.eta = config.train.eta;
  state.eps_inv = config.train.eps_inv;
  const LoadedModel model = load_model(checkpoint, config.encoder_spec(), state);

  const Tensor& x = split == "val" ? data.train.val_x : data.test_x;
  const auto& truth = split == "val" ? data.corpus.splits.val_truth : data.corpus.splits.test_truth;
  RunRecord rec;
  rec.config = "eval_" + split;
  rec.seed = config.train.seed;
  rec.scores = score_inputs(model.params, config.encoder_spec(), model.state, x);
  rec.truth = truth;
  rec.auc = roc_auc(rec.scores, rec.truth);

  const fs::path out = opt.out_dir;
  write_resolved(out, config);
  const RunRecord records[] = {rec};
  emit_report(records, out);
  std::printf("auc=%s\n", format_double(rec.auc).c_str());
  return kExitOk;
}

int cmd_gradcheck(const CommonOptions& opt) {
  const auto rows = run_grad_suite(default_grad_cases());
  bool ok = true;
  for (const auto& r : rows) ok = ok && r.pass;
  if (!opt.quiet || !ok) print_grad_table(std::cout, rows);
  return ok ? kExitOk : kExitNumeric;
}

int cmd_reproduce(const CommonOptions& opt, const std::string& name) {
  RunConfig base = load_run_config(opt, reproduce_defaults());
  if (opt.seed) base.train.seed = *opt.seed;
  base.validate();
  std::vector<std::string> names;
  if (name == "all") names = experiment_names();
  else names.push_back(name);
  std::vector<Experiment> experiments;
  for (const auto& n : names) experiments.push_back(make_experiment(n, base));

  const fs::path out = opt.out_dir;
  write_resolved(out, base);
  for (const auto& e : experiments) {
    if (!opt.quiet) std::printf("[%s] %zu cells x %zu seeds\n", e.name.c_str(), e.cells.size(), e.seeds);
    const auto runs = run_experiment(e, [&](const CellRun& r) {
      if (opt.quiet) return;
      std::printf("  %-20s seed=%llu test_auc=%.4f%s\n", r.label.c_str(), static_cast<unsigned long long>(r.seed),
                  r.outcome.test_auc, r.outcome.result.aborted ? " (aborted)" : "");
      std::fflush(stdout);
    });
    write_experiment(runs, out / e.name);
    if (!opt.quiet) {
      std::ifstream summary(out / e.name / "summary.csv");
      std::cout << summary.rdbuf();
    }
  }
  return kExitOk;
}

void add_common(CLI::App* cmd, CommonOptions& opt, bool data, bool config = true) {
  if (config) cmd->add_option("--config", opt.config_path, "flat key = value config file")->check(CLI::ExistingFile);
  if (data) cmd->add_option("--data", opt.data_dir, "directory written by `gen`");
  cmd->add_option("--out", opt.out_dir, "output directory")->capture_default_str();
  if (config) cmd->add_option("--seed", opt.seed, "override the seed key");
  cmd->add_flag("--quiet", opt.quiet, "suppress progress output");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deep SVDD toolkit with anti-collapse regularizers"};
  app.require_subcommand(1);
  app.footer("\n" + config_help() + "\nEnvironment: SVDDLAB_THREADS caps grid parallelism for `reproduce`.\n" +
             "Exit codes: 0 success, 1 usage or config error, 2 numerical abort.");

  CommonOptions opt;
  std::vector<std::size_t> ppm;
  std::string checkpoint, split = "test", experiment;

  auto* gen = app.add_subcommand("gen", "generate a synthetic corpus with splits (--seed sets data_seed)");
  add_common(gen, opt, false);
  gen->add_option("--ppm", ppm, "also export these image indices as PPM");

  auto* trn = app.add_subcommand("train", "train on a generated corpus");
  add_common(trn, opt, true);

  auto* evl = app.add_subcommand("eval", "score a split with a checkpoint and print auc=<value>");
  add_common(evl, opt, true);
  evl->add_option("--checkpoint", checkpoint, "checkpoint written by `train`")->required();
  evl->add_option("--split", split, "test or val")->check(CLI::IsMember({"test", "val"}))->capture_default_str();

  auto* grad = app.add_subcommand("gradcheck", "finite-difference check of every op and loss");
  add_common(grad, opt, false, false);

  auto* rep = app.add_subcommand("reproduce", "run a packaged 5-seed experiment grid");
  add_common(rep, opt, false);
  std::string names_help = "experiment name or all:";
  for (const auto& n : experiment_names()) names_help += " " + n;
  rep->add_option("experiment", experiment, names_help)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen) return cmd_gen(opt, ppm);
    if (*trn) return cmd_train(opt);
    if (*evl) return cmd_eval(opt, checkpoint, split);
    if (*grad) return cmd_gradcheck(opt);
    if (*rep) return cmd_reproduce(opt, experiment);
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return kExitNumeric;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  }
  return kExitUsage;
}
