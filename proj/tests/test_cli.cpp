#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

#include "svddlab/config.hpp"
#include "svddlab/dataset_io.hpp"
#include "svddlab/evalreport.hpp"
#include "svddlab/experiments.hpp"
#include "svddlab/metrics_log.hpp"

using namespace svddlab;
namespace fs = std::filesystem;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "svddlab_cli_tests";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
}

// Runs the CLI with stdout/stderr captured into files under kRoot.
int run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " \"" SVDDLAB_CLI "\" " + args + " > \"" + (kRoot / "stdout.txt").string() +
                          "\" 2> \"" + (kRoot / "stderr.txt").string() + "\"";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string out_text() { return slurp(kRoot / "stdout.txt"); }
std::string err_text() { return slurp(kRoot / "stderr.txt"); }

const char* kTinyConfig =
    "n_per_class = 12\n"
    "n_classes = 2\n"
    "channels = 1\n"
    "height = 8\n"
    "width = 8\n"
    "corruption = bp2\n"
    "layers = 6, 3\n"
    "activation = tanh\n"
    "reg = noise\n"
    "k = 4\n"
    "lr = 1e-3\n"
    "batch_size = 8\n"
    "epochs = 3\n"
    "probe_size = 8\n";

struct Setup {
  fs::path cfg = kRoot / "tiny.cfg";
  Setup() {
    fs::remove_all(kRoot);
    fs::create_directories(kRoot);
    write(cfg, kTinyConfig);
  }
  std::string c() const { return "--config \"" + cfg.string() + "\""; }
};

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

std::string tiny_with(const std::string& from, const std::string& to) {
  std::string text = kTinyConfig;
  text.replace(text.find(from), from.size(), to);
  return text;
}

}  // namespace

TEST_CASE("gen is byte-reproducible and round-trips") {
  const Setup s;
  REQUIRE(run("gen " + s.c() + " --quiet --out " + q(kRoot / "a")) == 0);
  REQUIRE(run("gen " + s.c() + " --quiet --out " + q(kRoot / "b")) == 0);
  CHECK(slurp(kRoot / "a/dataset.tds") == slurp(kRoot / "b/dataset.tds"));
  CHECK(slurp(kRoot / "a/splits.txt") == slurp(kRoot / "b/splits.txt"));

  const SplitCorpus expected = generate_corpus(load_config(s.cfg));
  const ImageCorpus loaded = load_dataset(kRoot / "a/dataset.tds");
  CHECK(loaded.pixels == expected.corpus.pixels);
  CHECK(loaded.provenance == expected.corpus.provenance);
  for (std::size_t i = 0; i < loaded.count(); ++i) {
    if (loaded.anomaly_flags[i]) CHECK(loaded.provenance[i].rfind("block_perm N=2", 0) == 0);
  }

  // The resolved config regenerates the same bytes.
  REQUIRE(run("gen --config " + q(kRoot / "a/resolved_config") + " --quiet --out " + q(kRoot / "c")) == 0);
  CHECK(slurp(kRoot / "a/dataset.tds") == slurp(kRoot / "c/dataset.tds"));

  REQUIRE(run("gen " + s.c() + " --quiet --seed 99 --out " + q(kRoot / "d")) == 0);
  CHECK(slurp(kRoot / "a/dataset.tds") != slurp(kRoot / "d/dataset.tds"));

  REQUIRE(run("gen " + s.c() + " --quiet --ppm 0 --out " + q(kRoot / "e")) == 0);
  CHECK(fs::exists(kRoot / "e/image_0.ppm"));
  CHECK(run("gen " + s.c() + " --ppm 100000 --out " + q(kRoot / "f")) == 1);
}

TEST_CASE("train then eval reproduces the selected validation AUC") {
  const Setup s;
  const fs::path data = kRoot / "data", t1 = kRoot / "t1", t2 = kRoot / "t2";
  REQUIRE(run("gen " + s.c() + " --quiet --out " + q(data)) == 0);
  REQUIRE(run("train " + s.c() + " --data " + q(data) + " --out " + q(t1)) == 0);
  const std::string summary = out_text();
  REQUIRE(run("train " + s.c() + " --quiet --data " + q(data) + " --out " + q(t2)) == 0);
  CHECK(slurp(t1 / "metrics.csv") == slurp(t2 / "metrics.csv"));
  CHECK(slurp(t1 / "best.ckpt") == slurp(t2 / "best.ckpt"));
  CHECK(slurp(t1 / "metrics.csv").rfind(kMetricsHeader, 0) == 0);
  CHECK(fs::exists(t1 / "resolved_config"));

  const auto pos = summary.find("best_val_auc=");
  REQUIRE(pos != std::string::npos);
  const std::string best = summary.substr(pos + 13, summary.find(' ', pos) - pos - 13);
  REQUIRE(run("eval " + s.c() + " --data " + q(data) + " --checkpoint " + q(t1 / "best.ckpt") +
              " --split val --out " + q(kRoot / "ev")) == 0);
  CHECK(out_text() == "auc=" + best + "\n");
  CHECK(fs::exists(kRoot / "ev/summary.csv"));

  REQUIRE(run("eval " + s.c() + " --data " + q(data) + " --checkpoint " + q(t1 / "final.ckpt") + " --out " +
              q(kRoot / "ev2")) == 0);
  CHECK(out_text().rfind("auc=", 0) == 0);
}

TEST_CASE("usage and configuration errors exit with 1") {
  const Setup s;
  CHECK(run("") == 1);
  CHECK(run("frobnicate") == 1);
  CHECK(run("train " + s.c()) == 1);  // no --data
  CHECK(err_text().find("--data") != std::string::npos);

  write(kRoot / "bad.cfg", "lr = 1e-3\nlearning_rate = 3\n");
  CHECK(run("train --config " + q(kRoot / "bad.cfg") + " --data " + q(kRoot)) == 1);
  CHECK(err_text().find("bad.cfg:2: unknown key 'learning_rate'") != std::string::npos);

  CHECK(run("gen --config " + q(kRoot / "missing.cfg")) == 1);
  CHECK(run("reproduce no_such_experiment " + s.c()) == 1);

  REQUIRE(run("gen " + s.c() + " --quiet --out " + q(kRoot / "data")) == 0);
  CHECK(run("eval " + s.c() + " --data " + q(kRoot / "data") + " --checkpoint " + q(kRoot / "none.ckpt") +
            " --out " + q(kRoot / "ev0")) == 1);
  CHECK(run("eval " + s.c() + " --data " + q(kRoot / "data") + " --checkpoint x --split train") == 1);

  // A split file whose validation set holds a single class cannot be scored.
  const fs::path one = kRoot / "oneclass";
  fs::create_directories(one);
  fs::copy_file(kRoot / "data/dataset.tds", one / "dataset.tds");
  Splits sp = load_splits(kRoot / "data/splits.txt");
  Splits filtered = sp;
  filtered.val.clear();
  filtered.val_truth.clear();
  for (std::size_t i = 0; i < sp.val.size(); ++i) {
    if (sp.val_truth[i] == 0) {
      filtered.val.push_back(sp.val[i]);
      filtered.val_truth.push_back(0);
    }
  }
  save_splits(one / "splits.txt", filtered);
  REQUIRE(run("train " + s.c() + " --quiet --data " + q(kRoot / "data") + " --out " + q(kRoot / "t")) == 0);
  CHECK(run("eval " + s.c() + " --data " + q(one) + " --checkpoint " + q(kRoot / "t/best.ckpt") +
            " --split val --out " + q(kRoot / "ev1")) == 1);

  CHECK(run("reproduce adaptive_vs_fixed " + s.c(), "SVDDLAB_THREADS=zero") == 1);
}

TEST_CASE("numerical blow-up exits with 2") {
  const Setup s;
  write(kRoot / "huge.cfg", tiny_with("lr = 1e-3", "lr = 1e300"));
  REQUIRE(run("gen --config " + q(kRoot / "huge.cfg") + " --quiet --out " + q(kRoot / "data")) == 0);
  CHECK(run("train --config " + q(kRoot / "huge.cfg") + " --data " + q(kRoot / "data") + " --out " +
            q(kRoot / "t")) == 2);
  CHECK(err_text().find("aborted") != std::string::npos);
}

TEST_CASE("gradcheck and help exit with 0") {
  const Setup s;
  CHECK(run("gradcheck") == 0);
  CHECK(out_text().find("loss_variance_reg") != std::string::npos);
  CHECK(run("--help") == 0);
  CHECK(out_text().find("lr_head") != std::string::npos);
  CHECK(out_text().find("SVDDLAB_THREADS") != std::string::npos);
}

TEST_CASE("reproduce writes identical summaries on repeat runs") {
  const Setup s;
  write(kRoot / "rep.cfg", tiny_with("epochs = 3", "epochs = 2"));
  const std::string cfg = "--config " + q(kRoot / "rep.cfg");
  REQUIRE(run("reproduce adaptive_vs_fixed --quiet " + cfg + " --out " + q(kRoot / "r1")) == 0);
  REQUIRE(run("reproduce adaptive_vs_fixed --quiet " + cfg + " --out " + q(kRoot / "r2"), "SVDDLAB_THREADS=3") == 0);
  const std::string a = slurp(kRoot / "r1/adaptive_vs_fixed/summary.csv");
  CHECK_FALSE(a.empty());
  CHECK(a == slurp(kRoot / "r2/adaptive_vs_fixed/summary.csv"));
  CHECK(slurp(kRoot / "r1/adaptive_vs_fixed/runs.csv") == slurp(kRoot / "r2/adaptive_vs_fixed/runs.csv"));
  CHECK(fs::exists(kRoot / "r1/adaptive_vs_fixed/roc_noise_adaptive_0.csv"));
  CHECK(fs::exists(kRoot / "r1/adaptive_vs_fixed/trajectory_variance_fixed_4.csv"));
}
