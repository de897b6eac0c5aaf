#include "svddlab/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <thread>

#include "svddlab/error.hpp"
#include "svddlab/random.hpp"

namespace svddlab {

SplitCorpus generate_corpus(const RunConfig& config) {
  config.validate();
  const ImageCorpus naturals = generate_naturals(config.n_per_class, config.n_classes, config.dims, config.data_seed);
  return build_splits(naturals, config.split, config.corruption, splitmix64(config.data_seed));
}

PreparedData prepare_data(SplitCorpus corpus, std::size_t probe_size) {
  PreparedData d;
  d.train = TrainData::from_splits(corpus.corpus, corpus.splits, probe_size);
  d.test_x = images_as_matrix(corpus.corpus, corpus.splits.test);
  d.corpus = std::move(corpus);
  return d;
}

RunOutcome run_once(const RunConfig& config, const PreparedData& data) {
  config.validate();
  RunOutcome out;
  out.result = train(config.encoder_spec(), config.train, data.train);
  out.test_truth = data.corpus.splits.test_truth;
  out.test_scores = score_inputs(out.result.best_params, out.result.spec, out.result.best_state, data.test_x);
  const bool finite = std::all_of(out.test_scores.begin(), out.test_scores.end(),
                                  [](double s) { return std::isfinite(s); });
  out.test_auc = finite ? roc_auc(out.test_scores, out.test_truth) : std::numeric_limits<double>::quiet_NaN();
  return out;
}

std::size_t grid_threads() {
  if (const char* env = std::getenv("SVDDLAB_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return static_cast<std::size_t>(v);
    throw ConfigError("SVDDLAB_THREADS must be a positive integer, got '" + std::string(env) + "'");
  }
  return std::max<unsigned>(1, std::thread::hardware_concurrency());
}

std::vector<std::string> experiment_names() {
  return {"adaptive_vs_fixed", "collapse_lr_sweep", "unsup_vs_semisup", "k_grid"};
}

RunConfig reproduce_defaults() {
  RunConfig c;
  c.n_per_class = 100;
  c.activation = Activation::tanh;
  c.train.max_epochs = 30;
  c.train.seed = 1;
  return c;
}

namespace {

ExperimentCell cell(std::string label, RunConfig config) { return {std::move(label), std::move(config)}; }

RunConfig with_reg(RunConfig c, RegKind kind, Weighting w = Weighting::adaptive) {
  c.train.reg.kind = kind;
  c.train.reg.weighting = w;
  return c;
}

const RegKind kAllRegs[] = {RegKind::none, RegKind::noise, RegKind::variance};

}  // namespace

Experiment make_experiment(const std::string& name, const RunConfig& base) {
  Experiment e;
  e.name = name;
  if (name == "adaptive_vs_fixed") {
    for (RegKind reg : {RegKind::noise, RegKind::variance}) {
      for (Weighting w : {Weighting::adaptive, Weighting::fixed}) {
        e.cells.push_back(
            cell(std::string(to_string(reg)) + "_" + std::string(to_string(w)), with_reg(base, reg, w)));
      }
    }
  } else if (name == "collapse_lr_sweep") {
    const std::pair<const char*, double> rates[] = {{"1e-3", 1e-3}, {"1e-2", 1e-2}, {"1e-1", 1e-1}};
    for (const auto& [tag, lr] : rates) {
      for (RegKind reg : kAllRegs) {
        RunConfig c = with_reg(base, reg);
        c.train.lr = lr;
        c.train.lr_head.reset();
        c.train.max_epochs = std::max(c.train.max_epochs, 50);
        e.cells.push_back(cell(std::string(to_string(reg)) + "_lr" + tag, c));
      }
    }
  } else if (name == "unsup_vs_semisup") {
    for (bool semi : {false, true}) {
      for (RegKind reg : kAllRegs) {
        RunConfig c = with_reg(base, reg);
        c.split.semi_supervised = semi;
        c.train.mode = semi ? SvddMode::semi_supervised : SvddMode::one_class;
        e.cells.push_back(cell(std::string(semi ? "semi_" : "unsup_") + std::string(to_string(reg)), c));
      }
    }
  } else if (name == "k_grid") {
    for (std::size_t k : {5, 30, 50, 60, 70, 100, 130, 200}) {
      RunConfig c = with_reg(base, RegKind::noise);
      c.train.reg.k = k;
      e.cells.push_back(cell("k" + std::to_string(k), c));
    }
  } else {
    std::string known;
    for (const auto& n : experiment_names()) known += (known.empty() ? "" : ", ") + n;
    throw ConfigError("unknown experiment '" + name + "' (known: " + known + ")");
  }
  for (const auto& c : e.cells) c.config.validate();
  return e;
}

namespace {

// Configs that only differ in model/optimisation keys share one corpus.
std::string data_key(const RunConfig& c) {
  RunConfig k = c;
  k.train = TrainConfig{};
  k.train.probe_size = c.train.probe_size;
  k.layer_widths = {1};
  return resolved_config(k);
}

}  // namespace

std::vector<CellRun> run_experiment(const Experiment& experiment, const ProgressFn& progress) {
  std::map<std::string, PreparedData> data;
  std::vector<const PreparedData*> cell_data;
  for (const auto& c : experiment.cells) {
    const std::string key = data_key(c.config);
    auto it = data.find(key);
    if (it == data.end()) {
      it = data.emplace(key, prepare_data(generate_corpus(c.config), c.config.train.probe_size)).first;
    }
    cell_data.push_back(&it->second);
  }

  const std::size_t total = experiment.cells.size() * experiment.seeds;
  std::vector<CellRun> runs(total);
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::exception_ptr failure;

  auto worker = [&] {
    for (;;) {
      const std::size_t job = next.fetch_add(1);
      if (job >= total) return;
      const std::size_t ci = job / experiment.seeds, si = job % experiment.seeds;
      try {
        RunConfig config = experiment.cells[ci].config;
        config.train.seed += si;
        CellRun run;
        run.label = experiment.cells[ci].label;
        run.seed = config.train.seed;
        run.outcome = run_once(config, *cell_data[ci]);
        std::lock_guard lock(mu);
        runs[job] = std::move(run);
        if (progress) progress(runs[job]);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
        next.store(total);
      }
    }
  };

  const std::size_t n_threads = std::min(grid_threads(), std::max<std::size_t>(total, 1));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return runs;
}

void write_experiment(const std::vector<CellRun>& runs, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<RunRecord> records;
  for (const auto& r : runs) {
    RunRecord rec;
    rec.config = r.label;
    rec.seed = r.seed;
    rec.auc = r.outcome.test_auc;
    if (std::isfinite(r.outcome.test_auc)) {
      rec.scores = r.outcome.test_scores;
      rec.truth = r.outcome.test_truth;
    }
    rec.log = r.outcome.result.log;
    records.push_back(std::move(rec));
  }
  emit_report(records, dir);

  const auto path = dir / "runs.csv";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "config,seed,test_auc,best_epoch,best_val_auc,collapsed_epochs,min_collapse_metric,aborted\n";
  for (const auto& r : runs) {
    const TrainResult& res = r.outcome.result;
    int collapsed = 0;
    double min_metric = std::numeric_limits<double>::infinity();
    for (const auto& row : res.log) {
      if (row.collapsed && *row.collapsed) ++collapsed;
      if (row.collapse_metric) min_metric = std::min(min_metric, *row.collapse_metric);
    }
    out << r.label << ',' << r.seed << ',' << format_double(r.outcome.test_auc) << ',' << res.best_epoch << ','
        << format_double(res.best_val_auc) << ',' << collapsed << ','
        << (std::isfinite(min_metric) ? format_double(min_metric) : std::string()) << ','
        << (res.aborted ? "true" : "false") << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace svddlab
