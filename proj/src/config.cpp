#include "svddlab/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>

#include "svddlab/error.hpp"
#include "svddlab/evalreport.hpp"

namespace svddlab {

EncoderSpec RunConfig::encoder_spec() const {
  EncoderSpec spec;
  spec.input_dim = dims.size();
  spec.layer_widths = layer_widths;
  spec.use_bias = use_bias;
  spec.activation = activation;
  if (train.reg.kind == RegKind::noise) spec.noise_head_k = train.reg.k;
  return spec;
}

void RunConfig::validate() const {
  if (dims.channels == 0 || dims.height == 0 || dims.width == 0) throw ConfigError("image dims must be positive");
  if (n_per_class == 0) throw ConfigError("n_per_class must be positive");
  if (n_classes == 0) throw ConfigError("n_classes must be positive");
  corruption.validate(dims);
  split.validate();
  if (split.setup == SplitSetup::one_vs_all) {
    if (n_classes < 2) throw ConfigError("one_vs_all needs at least 2 classes");
    if (split.normal_class < 0 || static_cast<std::size_t>(split.normal_class) >= n_classes) {
      throw ConfigError("normal_class out of range");
    }
  }
  if (split.semi_supervised != (train.mode == SvddMode::semi_supervised)) {
    throw ConfigError("semi_supervised = true requires mode = semi_supervised and vice versa");
  }
  encoder_spec().validate();
  train.validate();
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_integer(std::string_view v) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("expected an integer, got '" + std::string(v) + "'");
  }
  return out;
}

std::size_t parse_size(std::string_view v) {
  if (!v.empty() && v.front() == '-') throw ConfigError("expected a non-negative integer, got '" + std::string(v) + "'");
  return parse_integer<std::size_t>(v);
}

double parse_real(std::string_view v) {
  const std::string s(v);
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ConfigError("expected a number, got '" + s + "'");
  }
  if (used != s.size()) throw ConfigError("expected a number, got '" + s + "'");
  return out;
}

bool parse_bool(std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("expected true/false, got '" + std::string(v) + "'");
}

std::vector<std::size_t> parse_widths(std::string_view v) {
  std::vector<std::size_t> out;
  std::size_t start = 0;
  while (start <= v.size()) {
    const auto comma = v.find(',', start);
    const auto end = comma == std::string_view::npos ? v.size() : comma;
    out.push_back(parse_size(trim(v.substr(start, end - start))));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string join_widths(const std::vector<std::size_t>& w) {
  std::string s;
  for (std::size_t i = 0; i < w.size(); ++i) s += (i ? "," : "") + std::to_string(w[i]);
  return s;
}

std::string bool_text(bool b) { return b ? "true" : "false"; }

std::string_view kind_text(CorruptionKind k) { return k == CorruptionKind::block_perm ? "block_perm" : "strokes"; }

CorruptionKind parse_kind(std::string_view v) {
  if (v == "block_perm") return CorruptionKind::block_perm;
  if (v == "strokes") return CorruptionKind::strokes;
  throw ConfigError("unknown corruption kind '" + std::string(v) + "'");
}

struct Key {
  std::string name;
  std::string help;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

const std::vector<Key>& schema() {
  static const std::vector<Key> keys = [] {
    std::vector<Key> k;
    auto add = [&](std::string name, std::string help, std::function<void(RunConfig&, std::string_view)> set,
                   std::function<std::string(const RunConfig&)> get) {
      k.push_back({std::move(name), std::move(help), std::move(set), std::move(get)});
    };
    const auto real = [](double v) { return format_double(v); };

    add("setup", "alteration | one_vs_all",
        [](RunConfig& c, std::string_view v) { c.split.setup = parse_setup(v); },
        [](const RunConfig& c) { return std::string(to_string(c.split.setup)); });
    add("n_per_class", "natural images per class",
        [](RunConfig& c, std::string_view v) { c.n_per_class = parse_size(v); },
        [](const RunConfig& c) { return std::to_string(c.n_per_class); });
    add("n_classes", "number of natural image classes",
        [](RunConfig& c, std::string_view v) { c.n_classes = parse_size(v); },
        [](const RunConfig& c) { return std::to_string(c.n_classes); });
    add("channels", "image channels (1 or 3)",
        [](RunConfig& c, std::string_view v) { c.dims.channels = parse_size(v); },
        [](const RunConfig& c) { return std::to_string(c.dims.channels); });
    add("height", "image height",
        [](RunConfig& c, std::string_view v) { c.dims.height = parse_size(v); },
        [](const RunConfig& c) { return std::to_string(c.dims.height); });
    add("width", "image width",
        [](RunConfig& c, std::string_view v) { c.dims.width = parse_size(v); },
        [](const RunConfig& c) { return std::to_string(c.dims.width); });
    add("data_seed", "seed for corpus generation and splits",
        [](RunConfig& c, std::string_view v) { c.data_seed = parse_integer<std::uint64_t>(v); },
        [](const RunConfig& c) { return std::to_string(c.data_seed); });
    add("corruption", "preset: bp2 | bp8 | st_small | st_large (applied before the corruption_* keys)",
        [](RunConfig& c, std::string_view v) {
          c.corruption = CorruptionSpec::preset(v);
          c.corruption_preset = std::string(v);
        },
        [](const RunConfig& c) { return c.corruption_preset; });
    add("corruption_kind", "block_perm | strokes",
        [](RunConfig& c, std::string_view v) { c.corruption.kind = parse_kind(v); },
        [](const RunConfig& c) { return std::string(kind_text(c.corruption.kind)); });
    add("block_grid", "block permutation grid side N",
        [](RunConfig& c, std::string_view v) { c.corruption.grid = parse_size(v); },
        [](const RunConfig& c) { return std::to_string(c.corruption.grid); });
    add("stroke_thickness", "stroke thickness M in pixels",
        [](RunConfig& c, std::string_view v) { c.corruption.thickness = parse_size(v); },
        [](const RunConfig& c) { return std::to_string(c.corruption.thickness); });
    add("stroke_count_min", "fewest strokes per image",
        [](RunConfig& c, std::string_view v) { c.corruption.count_lo = parse_size(v); },
        [](const RunConfig& c) { return std::to_string(c.corruption.count_lo); });
    add("stroke_count_max", "most strokes per image",
        [](RunConfig& c, std::string_view v) { c.corruption.count_hi = parse_size(v); },
        [](const RunConfig& c) { return std::to_string(c.corruption.count_hi); });
    add("stroke_len_min", "shortest stroke, fraction of the image diagonal",
        [](RunConfig& c, std::string_view v) { c.corruption.len_lo = parse_real(v); },
        [real](const RunConfig& c) { return real(c.corruption.len_lo); });
    add("stroke_len_max", "longest stroke, fraction of the image diagonal",
        [](RunConfig& c, std::string_view v) { c.corruption.len_hi = parse_real(v); },
        [real](const RunConfig& c) { return real(c.corruption.len_hi); });
    add("normal_class", "normal class for one_vs_all",
        [](RunConfig& c, std::string_view v) { c.split.normal_class = parse_integer<std::int32_t>(v); },
        [](const RunConfig& c) { return std::to_string(c.split.normal_class); });
    add("labeled_anomaly_class", "labeled anomaly class for semi-supervised one_vs_all",
        [](RunConfig& c, std::string_view v) { c.split.labeled_anomaly_class = parse_integer<std::int32_t>(v); },
        [](const RunConfig& c) { return std::to_string(c.split.labeled_anomaly_class); });
    add("train_fraction", "share of normal images used for training",
        [](RunConfig& c, std::string_view v) { c.split.train_fraction = parse_real(v); },
        [real](const RunConfig& c) { return real(c.split.train_fraction); });
    add("val_fraction", "share of normal images used for validation",
        [](RunConfig& c, std::string_view v) { c.split.val_fraction = parse_real(v); },
        [real](const RunConfig& c) { return real(c.split.val_fraction); });
    add("semi_supervised", "add labeled anomalies to the training split",
        [](RunConfig& c, std::string_view v) { c.split.semi_supervised = parse_bool(v); },
        [](const RunConfig& c) { return bool_text(c.split.semi_supervised); });
    add("labeled_fraction", "share of labeled anomalies in the semi-supervised train split",
        [](RunConfig& c, std::string_view v) { c.split.labeled_anomaly_fraction = parse_real(v); },
        [real](const RunConfig& c) { return real(c.split.labeled_anomaly_fraction); });

    add("layers", "comma-separated layer widths, last is the feature dim",
        [](RunConfig& c, std::string_view v) { c.layer_widths = parse_widths(v); },
        [](const RunConfig& c) { return join_widths(c.layer_widths); });
    add("bias", "bias terms in every encoder layer",
        [](RunConfig& c, std::string_view v) { c.use_bias = parse_bool(v); },
        [](const RunConfig& c) { return bool_text(c.use_bias); });
    add("activation", "relu | leaky_relu | tanh | sigmoid",
        [](RunConfig& c, std::string_view v) { c.activation = parse_activation(v); },
        [](const RunConfig& c) { return std::string(to_string(c.activation)); });

    add("mode", "soft_boundary | one_class | semi_supervised",
        [](RunConfig& c, std::string_view v) { c.train.mode = parse_mode(v); },
        [](const RunConfig& c) { return std::string(to_string(c.train.mode)); });
    add("nu", "soft-boundary outlier fraction",
        [](RunConfig& c, std::string_view v) { c.train.nu = parse_real(v); },
        [real](const RunConfig& c) { return real(c.train.nu); });
    add("eta", "weight of labeled samples",
        [](RunConfig& c, std::string_view v) { c.train.eta = parse_real(v); },
        [real](const RunConfig& c) { return real(c.train.eta); });
    add("eps_inv", "offset inside the inverted anomaly distance",
        [](RunConfig& c, std::string_view v) { c.train.eps_inv = parse_real(v); },
        [real](const RunConfig& c) { return real(c.train.eps_inv); });
    add("center_floor", "minimum magnitude of each center coordinate",
        [](RunConfig& c, std::string_view v) { c.train.center_floor = parse_real(v); },
        [real](const RunConfig& c) { return real(c.train.center_floor); });

    add("reg", "none | noise | variance",
        [](RunConfig& c, std::string_view v) { c.train.reg.kind = parse_reg_kind(v); },
        [](const RunConfig& c) { return std::string(to_string(c.train.reg.kind)); });
    add("weighting", "adaptive | fixed (c_t = 1)",
        [](RunConfig& c, std::string_view v) { c.train.reg.weighting = parse_weighting(v); },
        [](const RunConfig& c) { return std::string(to_string(c.train.reg.weighting)); });
    add("k", "noise head tasks",
        [](RunConfig& c, std::string_view v) { c.train.reg.k = parse_size(v); },
        [](const RunConfig& c) { return std::to_string(c.train.reg.k); });
    add("d0", "initial variance threshold",
        [](RunConfig& c, std::string_view v) { c.train.reg.d0 = parse_real(v); },
        [real](const RunConfig& c) { return real(c.train.reg.d0); });
    add("r", "epochs between tenfold threshold decreases",
        [](RunConfig& c, std::string_view v) { c.train.reg.r = parse_integer<int>(v); },
        [](const RunConfig& c) { return std::to_string(c.train.reg.r); });
    add("alpha", "weight moving-average factor",
        [](RunConfig& c, std::string_view v) { c.train.reg.alpha = parse_real(v); },
        [real](const RunConfig& c) { return real(c.train.reg.alpha); });
    add("beta", "weight loss-ratio factor",
        [](RunConfig& c, std::string_view v) { c.train.reg.beta = parse_real(v); },
        [real](const RunConfig& c) { return real(c.train.reg.beta); });
    add("c0", "initial regularizer weight",
        [](RunConfig& c, std::string_view v) { c.train.reg.c0 = parse_real(v); },
        [real](const RunConfig& c) { return real(c.train.reg.c0); });

    add("lr", "encoder learning rate",
        [](RunConfig& c, std::string_view v) { c.train.lr = parse_real(v); },
        [real](const RunConfig& c) { return real(c.train.lr); });
    add("lr_head", "noise head learning rate, or auto for 10 * lr",
        [](RunConfig& c, std::string_view v) {
          if (v == "auto") c.train.lr_head.reset();
          else c.train.lr_head = parse_real(v);
        },
        [real](const RunConfig& c) { return c.train.lr_head ? real(*c.train.lr_head) : std::string("auto"); });
    add("weight_decay", "lambda of the (lambda/2) sum ||W||^2 term",
        [](RunConfig& c, std::string_view v) { c.train.weight_decay = parse_real(v); },
        [real](const RunConfig& c) { return real(c.train.weight_decay); });
    add("batch_size", "minibatch size",
        [](RunConfig& c, std::string_view v) { c.train.batch_size = parse_size(v); },
        [](const RunConfig& c) { return std::to_string(c.train.batch_size); });
    add("epochs", "number of epochs",
        [](RunConfig& c, std::string_view v) { c.train.max_epochs = parse_integer<int>(v); },
        [](const RunConfig& c) { return std::to_string(c.train.max_epochs); });
    add("seed", "training seed (init, shuffling, noise labels)",
        [](RunConfig& c, std::string_view v) { c.train.seed = parse_integer<std::uint64_t>(v); },
        [](const RunConfig& c) { return std::to_string(c.train.seed); });
    add("collapse_tau", "probe variance below which an epoch is flagged collapsed",
        [](RunConfig& c, std::string_view v) { c.train.collapse_tau = parse_real(v); },
        [real](const RunConfig& c) { return real(c.train.collapse_tau); });
    add("probe_size", "validation normals in the collapse probe batch",
        [](RunConfig& c, std::string_view v) { c.train.probe_size = parse_size(v); },
        [](const RunConfig& c) { return std::to_string(c.train.probe_size); });
    return k;
  }();
  return keys;
}

const Key* find_key(std::string_view name) {
  for (const auto& k : schema()) {
    if (k.name == name) return &k;
  }
  return nullptr;
}

}  // namespace

void apply_setting(RunConfig& config, std::string_view key, std::string_view value) {
  const Key* k = find_key(key);
  if (!k) throw ConfigError("unknown key '" + std::string(key) + "'");
  k->set(config, value);
}

RunConfig parse_config(std::istream& in, const std::string& source) {
  struct Entry {
    std::string key, value;
    std::size_t line;
  };
  std::vector<Entry> entries;
  std::map<std::string, std::size_t> seen;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = source + ":" + std::to_string(line_no) + ": ";
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
    Entry e{trim(line.substr(0, eq)), trim(line.substr(eq + 1)), line_no};
    if (e.key.empty()) throw ConfigError(where + "missing key");
    if (!find_key(e.key)) throw ConfigError(where + "unknown key '" + e.key + "'");
    if (e.value.empty()) throw ConfigError(where + "missing value for '" + e.key + "'");
    if (auto it = seen.find(e.key); it != seen.end()) {
      throw ConfigError(where + "duplicate key '" + e.key + "' (first set on line " + std::to_string(it->second) + ")");
    }
    seen[e.key] = line_no;
    entries.push_back(std::move(e));
  }

  RunConfig config;
  auto apply = [&](const Entry& e) {
    try {
      apply_setting(config, e.key, e.value);
    } catch (const ConfigError& err) {
      throw ConfigError(source + ":" + std::to_string(e.line) + ": " + e.key + ": " + err.what());
    }
  };
  // The preset goes first so individual corruption keys can refine it.
  for (const auto& e : entries) {
    if (e.key == "corruption") apply(e);
  }
  for (const auto& e : entries) {
    if (e.key != "corruption") apply(e);
  }
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  return parse_config(in, path.string());
}

std::string resolved_config(const RunConfig& config) {
  std::string out;
  for (const auto& k : schema()) out += k.name + " = " + k.get(config) + "\n";
  return out;
}

std::string config_help() {
  const RunConfig defaults;
  std::ostringstream out;
  out << "Config keys (one `key = value` per line, # starts a comment):\n";
  for (const auto& k : schema()) {
    out << "  " << k.name << " = " << k.get(defaults) << "\n      " << k.help << "\n";
  }
  return out.str();
}

}  // namespace svddlab
