#pragma once

// Experiment configuration: flat `key = value` text grouped under bracketed
// section headers.
//
//   # comment
//   [network]
//   width = 9
//
// Every key has a default, so an empty file is a complete configuration.
// Unknown sections and keys are rejected with their line number. The sections
// [record] and [summary] carry provenance in exported metadata files and are
// skipped on load, which lets a metadata file be fed back as a config.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <vector>

#include "losslab/dataset.hpp"
#include "losslab/nanonet.hpp"

namespace losslab::lab {

class ConfigError : public std::domain_error {
 public:
  ConfigError(const std::string& msg, std::size_t line = 0, std::size_t column = 0)
      : std::domain_error(line == 0 ? msg
                                    : "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + msg),
        line_(line),
        column_(column) {}

  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

struct NetworkSection {
  std::size_t width = 9;
  std::size_t depth = 3;
  nn::Activation activation = nn::Activation::relu;
  nn::InitKind init = nn::InitKind::he_normal;
  double init_scale = 1.0;
  friend bool operator==(const NetworkSection&, const NetworkSection&) = default;
};

struct DataSection {
  std::string path;  ///< empty: the bundled sample (or synthetic when synthetic_rows > 0)
  std::string label = "survived";
  std::vector<std::string> numeric{"age"};
  std::vector<std::string> categoric{"sex", "pclass"};
  std::size_t synthetic_rows = 0;
  std::size_t synthetic_features = 2;
  double label_noise = 0.0;
  double test_fraction = 0.2;
  friend bool operator==(const DataSection&, const DataSection&) = default;
};

struct TrainSection {
  double lr = 0.1;
  std::size_t epochs = 200;
  std::size_t batch_size = 10;
  std::size_t snapshot_every = 20;
  friend bool operator==(const TrainSection&, const TrainSection&) = default;
};

struct HistSection {
  std::uint64_t trials = 100000;
  std::string bins = "fixed";  ///< fixed | min_anchored
  double bin_width = 0.01;
  double max_loss = 20.0;
  std::size_t bin_count = 100;
  std::vector<std::size_t> samples{0};
  double prominence = 0.05;
  double noise_sigmas = 5.0;
  double tau = 0.05;
  double delta = 0.1;
  double left_boundary = std::numbers::ln2 - 0.1;
  std::uint64_t target_count = 2000;
  std::uint64_t max_trials = 2000000;
  friend bool operator==(const HistSection&, const HistSection&) = default;
};

struct SphereSection {
  std::size_t n_max = 30;
  double radius = 1.0;
  std::uint64_t trials = 100000;
  std::vector<std::size_t> dims{2, 8, 32, 128};
  std::size_t support_dim = 1;
  double sigma = 1.0;
  double threshold = 1e-10;
  friend bool operator==(const SphereSection&, const SphereSection&) = default;
};

struct FitSection {
  std::string family = "lognormal";
  std::string input;  ///< one positive value per line; empty: sample losses from [hist]
  friend bool operator==(const FitSection&, const FitSection&) = default;
};

struct ProbeSection {
  std::size_t batch_size = 1;
  std::size_t k = 12;
  std::size_t cadence = 20;
  std::size_t samples = 3;  ///< training rows used by `probe tendril`
  friend bool operator==(const ProbeSection&, const ProbeSection&) = default;
};

struct SweepSection {
  std::vector<std::size_t> widths{1, 2, 4, 8, 16, 32};
  std::vector<std::size_t> sizes{10, 20, 40, 80, 160};
  std::size_t repeats = 3;
  friend bool operator==(const SweepSection&, const SweepSection&) = default;
};

struct RunSection {
  std::uint64_t seed = 42;
  std::size_t workers = 1;
  friend bool operator==(const RunSection&, const RunSection&) = default;
};

struct ExperimentConfig {
  NetworkSection network;
  DataSection data;
  TrainSection train;
  HistSection hist;
  SphereSection sphere;
  FitSection fit;
  ProbeSection probe;
  SweepSection sweep;
  RunSection run;
  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

namespace detail {

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto comma = s.find(',', start);
    out.push_back(trim(s.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

template <typename T>
T parse_unsigned(const std::string& s) {
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty())
    throw std::invalid_argument("expected a non-negative integer, found '" + s + "'");
  return v;
}

inline double parse_real(const std::string& s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty())
    throw std::invalid_argument("expected a number, found '" + s + "'");
  return v;
}

template <typename T>
std::string join(const std::vector<T>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ',';
    if constexpr (std::is_same_v<T, std::string>) out += xs[i];
    else out += std::to_string(xs[i]);
  }
  return out;
}

struct Field {
  std::string_view section;
  std::string_view key;
  std::string_view doc;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

#define LOSSLAB_UINT(sec, member, key, doc)                                                                  \
  Field {                                                                                                    \
    sec, key, doc, [](const ExperimentConfig& c) { return std::to_string(c.member); },                       \
        [](ExperimentConfig& c, const std::string& v) {                                                      \
          c.member = parse_unsigned<std::remove_reference_t<decltype(c.member)>>(v);                         \
        }                                                                                                    \
  }
#define LOSSLAB_REAL(sec, member, key, doc)                                                                  \
  Field {                                                                                                    \
    sec, key, doc, [](const ExperimentConfig& c) { return format_double(c.member); },                        \
        [](ExperimentConfig& c, const std::string& v) { c.member = parse_real(v); }                          \
  }
#define LOSSLAB_TEXT(sec, member, key, doc)                                                                  \
  Field {                                                                                                    \
    sec, key, doc, [](const ExperimentConfig& c) { return c.member; },                                       \
        [](ExperimentConfig& c, const std::string& v) { c.member = v; }                                      \
  }
#define LOSSLAB_UINT_LIST(sec, member, key, doc)                                                             \
  Field {                                                                                                    \
    sec, key, doc, [](const ExperimentConfig& c) { return join(c.member); },                                 \
        [](ExperimentConfig& c, const std::string& v) {                                                      \
          c.member.clear();                                                                                  \
          for (const auto& item : split_list(v)) c.member.push_back(parse_unsigned<std::size_t>(item));      \
        }                                                                                                    \
  }
#define LOSSLAB_TEXT_LIST(sec, member, key, doc)                                                             \
  Field {                                                                                                    \
    sec, key, doc, [](const ExperimentConfig& c) { return join(c.member); },                                 \
        [](ExperimentConfig& c, const std::string& v) { c.member = split_list(v); }                          \
  }

inline const std::vector<Field>& fields() {
  static const std::vector<Field> all = {
      LOSSLAB_UINT("network", network.width, "width", "hidden layer width"),
      LOSSLAB_UINT("network", network.depth, "depth", "number of hidden layers"),
      Field{"network", "activation", "relu | tanh",
            [](const ExperimentConfig& c) { return std::string(nn::to_string(c.network.activation)); },
            [](ExperimentConfig& c, const std::string& v) { c.network.activation = nn::parse_activation(v); }},
      Field{"network", "init", "he_normal | he_uniform | xavier_normal | plain_normal | plain_uniform",
            [](const ExperimentConfig& c) { return std::string(nn::to_string(c.network.init)); },
            [](ExperimentConfig& c, const std::string& v) { c.network.init = nn::parse_init_kind(v); }},
      LOSSLAB_REAL("network", network.init_scale, "init_scale", "std or half-range of the plain schemes"),

      LOSSLAB_TEXT("data", data.path, "path", "CSV dataset; empty uses the bundled sample"),
      LOSSLAB_TEXT("data", data.label, "label", "label column (values 0/1)"),
      LOSSLAB_TEXT_LIST("data", data.numeric, "numeric", "numeric columns, z-scored"),
      LOSSLAB_TEXT_LIST("data", data.categoric, "categoric", "categoric columns, one-hot"),
      LOSSLAB_UINT("data", data.synthetic_rows, "synthetic_rows", "rows of planted-rule data; 0 reads a CSV"),
      LOSSLAB_UINT("data", data.synthetic_features, "synthetic_features", "numeric features of synthetic data"),
      LOSSLAB_REAL("data", data.label_noise, "label_noise", "fraction of labels flipped before splitting"),
      LOSSLAB_REAL("data", data.test_fraction, "test_fraction", "held-out fraction"),

      LOSSLAB_REAL("train", train.lr, "lr", "constant SGD learning rate"),
      LOSSLAB_UINT("train", train.epochs, "epochs", "epoch budget"),
      LOSSLAB_UINT("train", train.batch_size, "batch_size", "minibatch size"),
      LOSSLAB_UINT("train", train.snapshot_every, "snapshot_every", "weight snapshot cadence in epochs"),

      LOSSLAB_UINT("hist", hist.trials, "trials", "Monte-Carlo initializations"),
      LOSSLAB_TEXT("hist", hist.bins, "bins", "fixed | min_anchored"),
      LOSSLAB_REAL("hist", hist.bin_width, "bin_width", "fixed bin width"),
      LOSSLAB_REAL("hist", hist.max_loss, "max_loss", "upper edge of fixed bins"),
      LOSSLAB_UINT("hist", hist.bin_count, "bin_count", "bins for min_anchored"),
      LOSSLAB_UINT_LIST("hist", hist.samples, "samples", "dataset rows whose mean loss is binned"),
      LOSSLAB_REAL("hist", hist.prominence, "prominence", "mode prominence as a fraction of the peak count"),
      LOSSLAB_REAL("hist", hist.noise_sigmas, "noise_sigmas", "mode prominence in counting-noise units"),
      LOSSLAB_REAL("hist", hist.tau, "tau", "zero-mode loss threshold"),
      LOSSLAB_REAL("hist", hist.delta, "delta", "left-tail offset below ln 2"),
      LOSSLAB_REAL("hist", hist.left_boundary, "left_boundary", "tail resampling boundary"),
      LOSSLAB_UINT("hist", hist.target_count, "target_count", "tail samples to retain"),
      LOSSLAB_UINT("hist", hist.max_trials, "max_trials", "tail resampling budget"),

      LOSSLAB_UINT("sphere", sphere.n_max, "n_max", "largest dimension in curve tables"),
      LOSSLAB_REAL("sphere", sphere.radius, "radius", "ball radius"),
      LOSSLAB_UINT("sphere", sphere.trials, "trials", "pairwise-distance trials"),
      LOSSLAB_UINT_LIST("sphere", sphere.dims, "dims", "dimensions for the distance estimate"),
      LOSSLAB_UINT("sphere", sphere.support_dim, "support_dim", "Gaussian support dimension"),
      LOSSLAB_REAL("sphere", sphere.sigma, "sigma", "Gaussian support standard deviation"),
      LOSSLAB_REAL("sphere", sphere.threshold, "threshold", "Gaussian support density threshold"),

      LOSSLAB_TEXT("fit", fit.family, "family", "lognormal | gamma | weibull"),
      LOSSLAB_TEXT("fit", fit.input, "input", "file of positive values; empty samples [hist] losses"),

      LOSSLAB_UINT("probe", probe.batch_size, "batch_size", "minibatch size of gradient ensembles"),
      LOSSLAB_UINT("probe", probe.k, "k", "gradients per ensemble"),
      LOSSLAB_UINT("probe", probe.cadence, "cadence", "probe cadence in epochs"),
      LOSSLAB_UINT("probe", probe.samples, "samples", "training rows for probe tendril"),

      LOSSLAB_UINT_LIST("sweep", sweep.widths, "widths", "capacity sweep widths"),
      LOSSLAB_UINT_LIST("sweep", sweep.sizes, "sizes", "fidelity sweep training-set sizes"),
      LOSSLAB_UINT("sweep", sweep.repeats, "repeats", "fidelity sweep repeats"),

      LOSSLAB_UINT("run", run.seed, "seed", "master seed"),
      LOSSLAB_UINT("run", run.workers, "workers", "worker threads"),
  };
  return all;
}

#undef LOSSLAB_UINT
#undef LOSSLAB_REAL
#undef LOSSLAB_TEXT
#undef LOSSLAB_UINT_LIST
#undef LOSSLAB_TEXT_LIST

inline bool is_provenance_section(std::string_view s) { return s == "record" || s == "summary"; }

}  // namespace detail

/// (section.key, value) in a fixed order.
inline std::vector<std::pair<std::string, std::string>> flatten(const ExperimentConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& f : detail::fields()) out.emplace_back(std::string(f.section) + "." + std::string(f.key), f.get(cfg));
  return out;
}

/// Config file text with every key spelled out.
inline std::string to_text(const ExperimentConfig& cfg) {
  std::string out;
  std::string_view section;
  for (const auto& f : detail::fields()) {
    if (f.section != section) {
      if (!section.empty()) out += '\n';
      section = f.section;
      out += "[" + std::string(section) + "]\n";
    }
    out += std::string(f.key) + " = " + f.get(cfg) + "\n";
  }
  return out;
}

/// One line per key: `section.key  default  description`.
inline std::string describe_defaults() {
  const ExperimentConfig defaults;
  std::string out;
  for (const auto& f : detail::fields()) {
    std::string name = std::string(f.section) + "." + std::string(f.key);
    name.resize(std::max<std::size_t>(name.size() + 1, 24), ' ');
    std::string value = f.get(defaults);
    if (value.empty()) value = "\"\"";
    value.resize(std::max<std::size_t>(value.size() + 1, 22), ' ');
    out += "  " + name + value + std::string(f.doc) + "\n";
  }
  return out;
}

inline ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig cfg;
  std::string line;
  std::string section;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#' || line[first] == ';') continue;
    if (line[first] == '[') {
      const auto close = line.find(']', first);
      if (close == std::string::npos) throw ConfigError("unterminated section header", line_no, first + 1);
      section = detail::trim(std::string_view(line).substr(first + 1, close - first - 1));
      if (!detail::trim(std::string_view(line).substr(close + 1)).empty())
        throw ConfigError("unexpected text after section header", line_no, close + 2);
      const bool known = detail::is_provenance_section(section) ||
                         std::any_of(detail::fields().begin(), detail::fields().end(),
                                     [&](const detail::Field& f) { return f.section == section; });
      if (!known) throw ConfigError("unknown section '" + section + "'", line_no, first + 1);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("expected 'key = value'", line_no, first + 1);
    const std::string key = detail::trim(std::string_view(line).substr(0, eq));
    const std::string value = detail::trim(std::string_view(line).substr(eq + 1));
    if (section.empty()) throw ConfigError("key '" + key + "' appears before any [section]", line_no, first + 1);
    if (detail::is_provenance_section(section)) continue;
    const auto& fs = detail::fields();
    const auto it = std::find_if(fs.begin(), fs.end(), [&](const detail::Field& f) {
      return f.section == section && f.key == key;
    });
    if (it == fs.end()) throw ConfigError("unknown key '" + section + "." + key + "'", line_no, first + 1);
    const auto value_col = line.find_first_not_of(" \t", eq + 1);
    try {
      it->set(cfg, value);
    } catch (const std::exception& e) {
      throw ConfigError(section + "." + key + ": " + e.what(), line_no,
                        (value_col == std::string::npos ? eq + 1 : value_col) + 1);
    }
  }
  return cfg;
}

inline ExperimentConfig parse_config(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data::IoError("cannot open config '" + path + "'");
  return parse_config(in);
}

/// Applies one `section.key=value` assignment.
inline void apply_override(ExperimentConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  const auto dot = assignment.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq)
    throw ConfigError("override '" + assignment + "' is not of the form section.key=value");
  const std::string section = detail::trim(std::string_view(assignment).substr(0, dot));
  const std::string key = detail::trim(std::string_view(assignment).substr(dot + 1, eq - dot - 1));
  const std::string value = detail::trim(std::string_view(assignment).substr(eq + 1));
  const auto& fs = detail::fields();
  const auto it =
      std::find_if(fs.begin(), fs.end(), [&](const detail::Field& f) { return f.section == section && f.key == key; });
  if (it == fs.end()) throw ConfigError("unknown key '" + section + "." + key + "'");
  try {
    it->set(cfg, value);
  } catch (const std::exception& e) {
    throw ConfigError(section + "." + key + ": " + e.what());
  }
}

/// Keys a subcommand cannot run without; throws naming the first missing one.
inline void require_keys(const ExperimentConfig& cfg, std::string_view command) {
  if (command == "fit" && cfg.fit.input.empty() && cfg.hist.trials == 0)
    throw ConfigError("missing required key 'fit.input' (or a nonzero 'hist.trials' to sample losses)");
  if (command == "sweep fidelity" && cfg.sweep.sizes.empty()) throw ConfigError("missing required key 'sweep.sizes'");
  if (command == "sweep capacity" && cfg.sweep.widths.empty()) throw ConfigError("missing required key 'sweep.widths'");
  if (command.starts_with("hist") && cfg.hist.samples.empty()) throw ConfigError("missing required key 'hist.samples'");
}

}  // namespace losslab::lab
