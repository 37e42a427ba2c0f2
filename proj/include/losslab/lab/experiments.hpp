#pragma once

// Drivers that turn an ExperimentConfig into ExperimentRecords: histograms,
// the fixed histogram recipes, training sweeps and probe runs.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "losslab/dataset.hpp"
#include "losslab/geometry_probes.hpp"
#include "losslab/lab/config.hpp"
#include "losslab/lab/record.hpp"
#include "losslab/mc_histogram.hpp"
#include "losslab/nanonet.hpp"
#include "losslab/parallel.hpp"
#include "losslab/rng.hpp"
#include "losslab/spherekit.hpp"

namespace losslab::lab {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// ---------------------------------------------------------------- data

struct PreparedData {
  data::RawDataset raw;  ///< after label noise
  data::Split split;
  data::Encoder encoder;  ///< z-score statistics from the training rows
  std::vector<nn::EncodedSample> train;
  std::vector<nn::EncodedSample> test;
};

inline data::RawDataset load_raw(const ExperimentConfig& cfg) {
  if (cfg.data.synthetic_rows > 0)
    return data::synthetic_dataset({cfg.data.synthetic_rows, cfg.data.synthetic_features, 0.0, cfg.run.seed});
  data::Schema schema{cfg.data.label, cfg.data.numeric, cfg.data.categoric};
  return cfg.data.path.empty() ? data::load_csv(data::bundled_sample_path(), schema)
                               : data::load_csv(cfg.data.path, schema);
}

/// Loads, applies label noise once, splits, and encodes with training-row statistics.
inline PreparedData prepare_data(const ExperimentConfig& cfg) {
  PreparedData p;
  p.raw = load_raw(cfg);
  data::apply_label_noise(p.raw, cfg.data.label_noise, cfg.run.seed);
  p.split = data::split_rows(p.raw.size(), cfg.data.test_fraction, cfg.run.seed);
  p.encoder = data::fit_encoder(p.raw, p.split.train);
  p.train = data::encode(p.raw, p.encoder, p.split.train);
  p.test = data::encode(p.raw, p.encoder, p.split.test);
  return p;
}

/// Every row, encoded with statistics over every row. Histograms index into this.
inline std::vector<nn::EncodedSample> histogram_data(const ExperimentConfig& cfg) {
  auto raw = load_raw(cfg);
  data::apply_label_noise(raw, cfg.data.label_noise, cfg.run.seed);
  return data::encode(raw, data::fit_encoder(raw));
}

inline nn::NetworkSpec network_spec(const ExperimentConfig& cfg, std::size_t input_dim) {
  nn::NetworkSpec s{input_dim, cfg.network.width, cfg.network.depth, cfg.network.activation,
                    {cfg.network.init, cfg.network.init_scale}};
  s.validate();
  return s;
}

/// Width whose parameter count is closest to `budget` (ties to the narrower net).
inline std::size_t width_for_budget(std::size_t input_dim, std::size_t depth, std::size_t budget) {
  std::size_t best = 1;
  std::size_t best_gap = std::numeric_limits<std::size_t>::max();
  for (std::size_t w = 1; w <= std::max<std::size_t>(budget, 1); ++w) {
    const std::size_t pc = nn::param_count({input_dim, w, depth});
    const std::size_t gap = pc > budget ? pc - budget : budget - pc;
    if (gap < best_gap) best_gap = gap, best = w;
    if (pc > budget) break;
  }
  return best;
}

// ---------------------------------------------------------------- histograms

inline mc::BinPolicy bin_policy(const ExperimentConfig& cfg) {
  if (cfg.hist.bins == "fixed") return mc::FixedBins{cfg.hist.bin_width, cfg.hist.max_loss};
  if (cfg.hist.bins == "min_anchored") return mc::MinAnchoredBins{cfg.hist.bin_count};
  throw ConfigError("hist.bins must be 'fixed' or 'min_anchored', found '" + cfg.hist.bins + "'");
}

inline mc::HistogramConfig histogram_config(const ExperimentConfig& cfg, std::size_t input_dim) {
  return {network_spec(cfg, input_dim), cfg.hist.samples, cfg.hist.trials, bin_policy(cfg), cfg.run.seed};
}

inline std::string format_modes(const std::vector<mc::Mode>& modes) {
  std::string out;
  for (const auto& m : modes)
    out += (out.empty() ? "" : ";") + detail::format_double(m.center) + ":" + std::to_string(m.count) + ":" +
           std::to_string(m.prominence);
  return out;
}

inline Table histogram_table(const mc::LossHistogram& h) {
  Table t{{"bin_left", "bin_right", "count"}, {}};
  for (std::size_t k = 0; k < h.counts.size(); ++k)
    t.rows.push_back({h.bin_edges[k], h.bin_edges[k + 1], static_cast<double>(h.counts[k])});
  return t;
}

/// Rebuilds a histogram from an exported record (edges, counts, overflow, trials).
inline mc::LossHistogram histogram_from_record(const ExperimentRecord& r) {
  if (r.kind != RecordKind::histogram) throw std::domain_error("record is not a histogram");
  mc::LossHistogram h;
  const auto lefts = r.results.values("bin_left");
  const auto rights = r.results.values("bin_right");
  const auto counts = r.results.values("count");
  if (lefts.empty()) throw std::domain_error("histogram record has no bins");
  h.bin_edges = lefts;
  h.bin_edges.push_back(rights.back());
  for (double c : counts) h.counts.push_back(static_cast<std::uint64_t>(c));
  auto get = [&](const std::string& k, double fallback) {
    const auto it = r.summary.find(k);
    return it == r.summary.end() ? fallback : detail::parse_real(it->second);
  };
  h.overflow_count = static_cast<std::uint64_t>(get("overflow_count", 0.0));
  h.n_trials = static_cast<std::uint64_t>(get("n_trials", static_cast<double>(h.total_counted())));
  h.min_loss = get("min_loss", h.bin_edges.front());
  h.max_loss = get("max_loss", h.bin_edges.back());
  return h;
}

inline void add_mode_summary(ExperimentRecord& rec, const mc::ModeReport& m) {
  rec.summary["mode_count"] = std::to_string(m.modes.size());
  rec.summary["modes"] = format_modes(m.modes);
  rec.summary["central_mode_loss"] = detail::format_double(m.central_mode_loss);
  rec.summary["central_reference"] = detail::format_double(m.central_reference);
  rec.summary["zero_mode_mass"] = detail::format_double(m.zero_mode_mass);
  rec.summary["left_tail_mass"] = detail::format_double(m.left_tail_mass);
}

inline ExperimentRecord histogram_record(const mc::LossHistogram& h, const ExperimentConfig& cfg, std::string label) {
  auto rec = make_record(RecordKind::histogram, std::move(label), cfg);
  rec.results = histogram_table(h);
  rec.summary["n_trials"] = std::to_string(h.n_trials);
  rec.summary["overflow_count"] = std::to_string(h.overflow_count);
  rec.summary["min_loss"] = detail::format_double(h.min_loss);
  rec.summary["max_loss"] = detail::format_double(h.max_loss);
  rec.summary["param_count"] = std::to_string(nn::param_count(h.config.spec));
  add_mode_summary(rec, mc::detect_modes(h, cfg.hist.prominence, cfg.hist.tau, cfg.hist.delta, cfg.hist.noise_sigmas));
  return rec;
}

inline ExperimentRecord run_histogram(const ExperimentConfig& cfg, std::string label = {}) {
  const auto data = histogram_data(cfg);
  const auto hc = histogram_config(cfg, data.front().features.size());
  return histogram_record(mc::sample_histogram(hc, data, cfg.run.workers), cfg, std::move(label));
}

/// Tail resampling past the trials of the main histogram.
inline ExperimentRecord run_tail(const ExperimentConfig& cfg, std::string label = "tail") {
  const auto data = histogram_data(cfg);
  const auto hc = histogram_config(cfg, data.front().features.size());
  const auto tr = mc::tail_resample(hc, data, cfg.hist.left_boundary, cfg.hist.target_count, cfg.hist.max_trials,
                                    cfg.run.workers);
  auto rec = make_record(RecordKind::histogram, std::move(label), cfg);
  rec.results = histogram_table(tr.tail);
  rec.summary["n_trials"] = std::to_string(tr.tail.n_trials);
  rec.summary["overflow_count"] = std::to_string(tr.tail.overflow_count);
  rec.summary["min_loss"] = detail::format_double(tr.tail.min_loss);
  rec.summary["max_loss"] = detail::format_double(tr.tail.max_loss);
  rec.summary["param_count"] = std::to_string(nn::param_count(hc.spec));
  rec.summary["retained"] = std::to_string(tr.retained);
  rec.summary["trials_consumed"] = std::to_string(tr.trials_consumed);
  rec.summary["acceptance_rate"] = detail::format_double(tr.acceptance_rate);
  rec.summary["reachable"] = tr.reachable ? "true" : "false";
  rec.summary["left_boundary"] = detail::format_double(cfg.hist.left_boundary);
  if (!tr.message.empty()) rec.summary["message"] = tr.message;
  if (tr.retained > 0) {
    // Share of the tail inside the zero mode, and the tallest tail mode.
    rec.summary["zero_share"] = detail::format_double(mc::zero_mode_mass(tr.tail, cfg.hist.tau));
    const auto modes = mc::detect_modes(tr.tail, cfg.hist.prominence, cfg.hist.tau, cfg.hist.delta, cfg.hist.noise_sigmas);
    rec.summary["modes"] = format_modes(modes.modes);
    const mc::Mode* top = nullptr;
    for (const auto& m : modes.modes)
      if (!top || m.count > top->count) top = &m;
    rec.summary["dominant_mode"] = top ? detail::format_double(top->center) : "nan";
  }
  return rec;
}

// ---------------------------------------------------------------- recipes

struct RecipePanel {
  std::string label;
  ExperimentConfig config;  ///< the panel's full configuration
  bool tail = false;        ///< tail resampling instead of a full histogram
};

inline const std::vector<std::string>& recipe_names() {
  static const std::vector<std::string> names{"relu_vs_tanh", "width_transition", "depth_transition",
                                              "tail_closeup", "init_scaling",     "sample_aggregation"};
  return names;
}

/// Panels of a named recipe. Architecture, init, and sample choices are fixed
/// by the recipe; trial count, bins, seed and workers come from `base`.
inline std::vector<RecipePanel> recipe_panels(const std::string& name, const ExperimentConfig& base) {
  const std::size_t input_dim = histogram_data(base).front().features.size();
  auto panel = [&](std::string label, std::size_t width, std::size_t depth, nn::Activation act, nn::InitKind init,
                   double scale, std::vector<std::size_t> samples = {0}) {
    RecipePanel p{std::move(label), base, false};
    p.config.network = {width, depth, act, init, scale};
    p.config.hist.samples = std::move(samples);
    return p;
  };
  using nn::Activation;
  using nn::InitKind;
  const std::size_t budget = nn::param_count({input_dim, 9, 3});
  std::vector<RecipePanel> out;
  if (name == "relu_vs_tanh") {
    out.push_back(panel("relu", 9, 3, Activation::relu, InitKind::plain_uniform, 1.0));
    out.push_back(panel("tanh", 9, 3, Activation::tanh, InitKind::plain_uniform, 1.0));
  } else if (name == "width_transition") {
    for (std::size_t w : {6, 9, 12})
      out.push_back(panel("width" + std::to_string(w), w, 3, Activation::relu, InitKind::plain_uniform, 1.0));
  } else if (name == "depth_transition") {
    for (std::size_t d : {3, 6, 9})
      out.push_back(panel("depth" + std::to_string(d), width_for_budget(input_dim, d, budget), d, Activation::relu,
                          InitKind::plain_uniform, 1.0));
  } else if (name == "tail_closeup") {
    for (std::size_t d : {2, 3, 4, 5, 6, 8, 9, 10, 11, 12}) {
      auto p = panel("tail_depth" + std::to_string(d), width_for_budget(input_dim, d, budget), d, Activation::relu,
                     InitKind::plain_uniform, 1.0);
      p.tail = true;
      out.push_back(std::move(p));
    }
  } else if (name == "init_scaling") {
    out.push_back(panel("he_normal", 9, 3, Activation::relu, InitKind::he_normal, 1.0));
    out.push_back(panel("he_uniform", 9, 3, Activation::relu, InitKind::he_uniform, 1.0));
    for (double s : {0.5, 1.0, 2.0})
      out.push_back(panel("uniform" + detail::format_double(s), 9, 3, Activation::relu, InitKind::plain_uniform, s));
  } else if (name == "sample_aggregation") {
    for (std::size_t n : {1, 2, 3, 50}) {
      std::vector<std::size_t> rows(n);
      std::iota(rows.begin(), rows.end(), std::size_t{0});
      out.push_back(panel("samples" + std::to_string(n), 9, 3, Activation::relu, InitKind::he_normal, 1.0, rows));
    }
  } else {
    std::string known;
    for (const auto& n : recipe_names()) known += (known.empty() ? "" : ", ") + n;
    throw ConfigError("unknown recipe '" + name + "' (" + known + ")");
  }
  return out;
}

inline std::vector<ExperimentRecord> run_recipe(const std::string& name, const ExperimentConfig& base) {
  std::vector<ExperimentRecord> out;
  for (const auto& p : recipe_panels(name, base)) {
    auto rec = p.tail ? run_tail(p.config, name + "_" + p.label) : run_histogram(p.config, name + "_" + p.label);
    rec.summary["recipe"] = name;
    out.push_back(std::move(rec));
  }
  return out;
}

// ---------------------------------------------------------------- sweeps

struct FitStats {
  double train_loss = kNaN, test_loss = kNaN, train_error = kNaN, test_error = kNaN;
  bool failed = false;
};

inline FitStats train_and_score(const nn::NetworkSpec& spec, std::span<const nn::EncodedSample> train_set,
                                std::span<const nn::EncodedSample> test_set, const nn::TrainConfig& tc) {
  FitStats s;
  try {
    const auto run = nn::train(spec, train_set, tc);
    const auto& w = run.snapshots.back().weights;
    s.train_loss = nn::mean_loss(w, train_set);
    s.train_error = nn::error_rate(w, train_set);
    if (!test_set.empty()) {
      s.test_loss = nn::mean_loss(w, test_set);
      s.test_error = nn::error_rate(w, test_set);
    }
  } catch (const nn::TrainingAborted&) {
    s.failed = true;
  }
  return s;
}

inline nn::TrainConfig train_config(const ExperimentConfig& cfg, std::size_t n_train, std::uint64_t seed) {
  if (n_train == 0) throw std::domain_error("no training rows");
  return {cfg.train.lr, cfg.train.epochs, std::min(cfg.train.batch_size, n_train), seed, cfg.train.epochs};
}

/// One network per width in sweep.widths (depth from [network]); cell i trains
/// with seed derive_seed(run.seed, i). Rows are ordered by parameter count.
inline ExperimentRecord run_capacity_sweep(const ExperimentConfig& cfg) {
  require_keys(cfg, "sweep capacity");
  const auto data = prepare_data(cfg);
  const std::size_t input_dim = data.encoder.input_dim();
  const auto& widths = cfg.sweep.widths;
  if (widths.size() < 2) throw ConfigError("sweep.widths needs at least two widths");
  for (auto w : widths)
    if (w == 0) throw ConfigError("sweep.widths entries must be >= 1");
  if (data.test.empty()) throw ConfigError("capacity sweep needs at least one test row (data.test_fraction)");
  const auto cells = map_blocks(widths.size(), 1, cfg.run.workers, [&](std::size_t begin, std::size_t) {
    auto c = cfg;
    c.network.width = widths[begin];
    return train_and_score(network_spec(c, input_dim), data.train, data.test,
                           train_config(cfg, data.train.size(), derive_seed(cfg.run.seed, begin)));
  });
  auto rec = make_record(RecordKind::capacity_sweep, "", cfg);
  rec.results.columns = {"param_count", "width", "train_loss", "test_loss", "train_error", "test_error", "failed"};
  rec.plot_columns = {"train_loss", "test_loss"};
  std::vector<std::size_t> order(widths.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto pc = [&](std::size_t i) { return nn::param_count({input_dim, widths[i], cfg.network.depth}); };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return pc(a) < pc(b); });
  std::size_t failures = 0;
  for (auto i : order) {
    const auto& s = cells[i];
    failures += s.failed;
    rec.results.rows.push_back({static_cast<double>(pc(i)), static_cast<double>(widths[i]), s.train_loss, s.test_loss,
                                s.train_error, s.test_error, s.failed ? 1.0 : 0.0});
  }
  rec.summary["train_rows"] = std::to_string(data.train.size());
  rec.summary["test_rows"] = std::to_string(data.test.size());
  rec.summary["failed_cells"] = std::to_string(failures);
  return rec;
}

/// One training run; every epoch logs train and test loss, and every
/// probe.cadence epochs a gradient ensemble gives confusion and both ID
/// estimates. Row 0 is the initialization.
inline ExperimentRecord run_epoch_sweep(const ExperimentConfig& cfg) {
  if (cfg.probe.cadence == 0) throw ConfigError("probe.cadence must be >= 1");
  if (cfg.train.epochs < cfg.probe.cadence) throw ConfigError("train.epochs must be >= probe.cadence");
  const auto data = prepare_data(cfg);
  const auto spec = network_spec(cfg, data.encoder.input_dim());
  auto tc = train_config(cfg, data.train.size(), cfg.run.seed);
  tc.snapshot_every = cfg.probe.cadence;
  if (cfg.probe.batch_size == 0 || cfg.probe.batch_size > data.train.size())
    throw ConfigError("probe.batch_size must be in [1, training rows]");

  std::vector<double> test_loss(cfg.train.epochs + 1, kNaN), test_error(cfg.train.epochs + 1, kNaN);
  auto score = [&](std::size_t epoch, const nn::WeightSet& w) {
    if (data.test.empty()) return;
    test_loss[epoch] = nn::mean_loss(w, data.test);
    test_error[epoch] = nn::error_rate(w, data.test);
  };
  auto rec = make_record(RecordKind::epoch_sweep, "", cfg);
  rec.results.columns = {"epoch", "train_loss", "test_loss", "test_error", "confusion", "id_two_nn", "id_participation"};
  rec.plot_columns = {"train_loss", "test_loss", "confusion"};

  nn::TrainRun run;
  try {
    run = nn::train(spec, data.train, tc, score);
  } catch (const nn::TrainingAborted& e) {
    run = e.partial();
    rec.summary["aborted_at_epoch"] = std::to_string(e.epoch());
  }
  score(0, run.snapshots.front().weights);
  std::map<std::size_t, probe::TendrilRow> probes;
  if (run.snapshots.size() >= 2)
    for (auto& row : probe::tendril_profile(run, data.train, cfg.probe.batch_size, cfg.probe.k, cfg.run.seed))
      probes[row.epoch] = row;
  std::string notes;
  for (std::size_t e = 0; e <= run.epoch_losses.size(); ++e) {
    const double train_loss = e == 0 ? run.initial_loss : run.epoch_losses[e - 1];
    std::vector<double> row{static_cast<double>(e), train_loss, test_loss[e], test_error[e], kNaN, kNaN, kNaN};
    if (const auto it = probes.find(e); it != probes.end()) {
      row[4] = it->second.confusion;
      row[5] = it->second.id_two_nn;
      row[6] = it->second.id_participation;
      if (!it->second.note.empty() && notes.empty()) notes = "epoch " + std::to_string(e) + ": " + it->second.note;
    }
    rec.results.rows.push_back(std::move(row));
  }
  if (!notes.empty()) rec.summary["probe_note"] = notes;
  rec.summary["param_count"] = std::to_string(nn::param_count(spec));
  rec.summary["best_loss"] = detail::format_double(run.best_loss);
  return rec;
}

/// Row order for repeat r of the fidelity sweep: a permutation of the
/// training rows drawn with derive_seed(seed, r). The size-n subset is its
/// first n entries, so smaller subsets are prefixes of larger ones.
inline std::vector<std::size_t> fidelity_order(std::size_t n_train, std::uint64_t seed, std::size_t repeat) {
  std::vector<std::size_t> perm(n_train);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Engine eng(derive_seed(seed, repeat));
  std::shuffle(perm.begin(), perm.end(), eng);
  return perm;
}

/// Test metrics against training-set size. A subset is presented to training
/// in ascending row order and trains with seed derive_seed(run.seed, r), so the
/// full-size subset of repeat 0 equals a direct train call on the training
/// rows. Batch size is capped at the subset size. The test set is the same
/// for every cell.
inline ExperimentRecord run_fidelity_sweep(const ExperimentConfig& cfg) {
  require_keys(cfg, "sweep fidelity");
  const auto data = prepare_data(cfg);
  const auto spec = network_spec(cfg, data.encoder.input_dim());
  const auto& sizes = cfg.sweep.sizes;
  if (cfg.sweep.repeats == 0) throw ConfigError("sweep.repeats must be >= 1");
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (sizes[i] == 0 || sizes[i] > data.train.size())
      throw ConfigError("sweep.sizes entries must be in [1, " + std::to_string(data.train.size()) + "]");
    if (i > 0 && sizes[i] <= sizes[i - 1]) throw ConfigError("sweep.sizes must be strictly increasing");
  }
  const std::size_t n_cells = sizes.size() * cfg.sweep.repeats;
  const auto cells = map_blocks(n_cells, 1, cfg.run.workers, [&](std::size_t cell, std::size_t) {
    const std::size_t r = cell / sizes.size(), n = sizes[cell % sizes.size()];
    const std::uint64_t seed = derive_seed(cfg.run.seed, r);
    auto perm = fidelity_order(data.train.size(), cfg.run.seed, r);
    perm.resize(n);
    std::sort(perm.begin(), perm.end());
    std::vector<nn::EncodedSample> subset;
    for (auto i : perm) subset.push_back(data.train[i]);
    return train_and_score(spec, subset, data.test, train_config(cfg, n, seed));
  });
  auto rec = make_record(RecordKind::fidelity_sweep, "", cfg);
  rec.results.columns = {"size", "train_loss", "test_loss", "train_error", "test_error", "failed_repeats"};
  rec.plot_columns = {"train_loss", "test_loss"};
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    double sums[4] = {0, 0, 0, 0};
    std::size_t ok = 0;
    for (std::size_t r = 0; r < cfg.sweep.repeats; ++r) {
      const auto& s = cells[r * sizes.size() + i];
      if (s.failed) continue;
      ++ok;
      sums[0] += s.train_loss, sums[1] += s.test_loss, sums[2] += s.train_error, sums[3] += s.test_error;
    }
    std::vector<double> row{static_cast<double>(sizes[i])};
    for (double v : sums) row.push_back(ok ? v / static_cast<double>(ok) : kNaN);
    row.push_back(static_cast<double>(cfg.sweep.repeats - ok));
    rec.results.rows.push_back(std::move(row));
  }
  rec.summary["train_rows"] = std::to_string(data.train.size());
  rec.summary["test_rows"] = std::to_string(data.test.size());
  return rec;
}

/// Trains on the first probe.samples rows of the dataset and records the
/// gradient-ensemble geometry at every snapshot (snapshot_every = probe.cadence).
inline ExperimentRecord run_tendril(const ExperimentConfig& cfg) {
  auto all = histogram_data(cfg);
  if (cfg.probe.samples == 0 || cfg.probe.samples > all.size())
    throw ConfigError("probe.samples must be in [1, " + std::to_string(all.size()) + "]");
  all.resize(cfg.probe.samples);
  const auto spec = network_spec(cfg, all.front().features.size());
  auto tc = train_config(cfg, all.size(), cfg.run.seed);
  tc.snapshot_every = cfg.probe.cadence;
  const auto run = nn::train(spec, all, tc);
  const auto rows = probe::tendril_profile(run, all, std::min(cfg.probe.batch_size, all.size()), cfg.probe.k,
                                           cfg.run.seed);
  auto rec = make_record(RecordKind::tendril, "", cfg);
  rec.results.columns = {"epoch", "loss", "id_two_nn", "id_participation", "confusion"};
  rec.plot_columns = {"id_two_nn", "id_participation"};
  std::string notes;
  for (const auto& r : rows) {
    rec.results.rows.push_back({static_cast<double>(r.epoch), r.loss, r.id_two_nn, r.id_participation, r.confusion});
    if (!r.note.empty() && notes.empty()) notes = "epoch " + std::to_string(r.epoch) + ": " + r.note;
  }
  if (!notes.empty()) rec.summary["probe_note"] = notes;
  rec.summary["param_count"] = std::to_string(nn::param_count(spec));
  return rec;
}

inline ExperimentRecord run_sphere_curve(const ExperimentConfig& cfg) {
  const auto curve = sphere::sphere_curve(static_cast<unsigned>(cfg.sphere.n_max), cfg.sphere.radius);
  auto rec = make_record(RecordKind::sphere_curve, "", cfg);
  rec.results.columns = {"dimension", "volume", "surface"};
  for (const auto& m : curve) rec.results.rows.push_back({m.dimension, m.volume, m.surface});
  const auto vp = sphere::volume_peak_dimension(cfg.sphere.radius);
  const auto sp = sphere::surface_peak_dimension(cfg.sphere.radius);
  rec.summary["volume_peak_real"] = detail::format_double(vp.real_peak);
  rec.summary["volume_peak_integer"] = std::to_string(vp.integer_peak);
  rec.summary["surface_peak_real"] = detail::format_double(sp.real_peak);
  rec.summary["surface_peak_integer"] = std::to_string(sp.integer_peak);
  return rec;
}

/// Re-runs the experiment a record came from, using only its config echo.
inline std::vector<ExperimentRecord> rerun(const ExperimentRecord& r) {
  switch (r.kind) {
    case RecordKind::capacity_sweep: return {run_capacity_sweep(r.config)};
    case RecordKind::epoch_sweep: return {run_epoch_sweep(r.config)};
    case RecordKind::fidelity_sweep: return {run_fidelity_sweep(r.config)};
    case RecordKind::tendril: return {run_tendril(r.config)};
    case RecordKind::sphere_curve: return {run_sphere_curve(r.config)};
    case RecordKind::histogram: {
      const auto it = r.summary.find("retained");
      return {it != r.summary.end() ? run_tail(r.config, r.label) : run_histogram(r.config, r.label)};
    }
  }
  return {};
}

}  // namespace losslab::lab
