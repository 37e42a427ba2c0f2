#pragma once

// Tiny fully connected binary classifier: hidden layers of equal width, one
// sigmoid output unit, binary cross-entropy, exact backpropagation and
// constant-rate SGD without momentum.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "losslab/rng.hpp"

namespace losslab::nn {

/// Sigmoid outputs are clamped to [kProbEpsilon, 1 - kProbEpsilon].
inline constexpr double kProbEpsilon = 1e-7;

enum class Activation { relu, tanh };

enum class InitKind { he_normal, he_uniform, xavier_normal, plain_normal, plain_uniform };

struct InitScheme {
  InitKind kind = InitKind::he_normal;
  double scale = 1.0;  ///< std (plain_normal) or half-range (plain_uniform); unused otherwise

  friend bool operator==(const InitScheme&, const InitScheme&) = default;
};

inline std::string_view to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }

inline Activation parse_activation(std::string_view s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  throw std::domain_error("unknown activation '" + std::string(s) + "'");
}

inline std::string_view to_string(InitKind k) {
  switch (k) {
    case InitKind::he_normal: return "he_normal";
    case InitKind::he_uniform: return "he_uniform";
    case InitKind::xavier_normal: return "xavier_normal";
    case InitKind::plain_normal: return "plain_normal";
    case InitKind::plain_uniform: return "plain_uniform";
  }
  return "?";
}

inline InitKind parse_init_kind(std::string_view s) {
  for (auto k : {InitKind::he_normal, InitKind::he_uniform, InitKind::xavier_normal,
                 InitKind::plain_normal, InitKind::plain_uniform})
    if (to_string(k) == s) return k;
  throw std::domain_error("unknown init scheme '" + std::string(s) + "'");
}

struct NetworkSpec {
  std::size_t input_dim = 1;
  std::size_t hidden_width = 1;
  std::size_t hidden_depth = 0;  ///< number of hidden layers; 0 is logistic regression
  Activation activation = Activation::relu;
  InitScheme init{};

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;

  void validate() const {
    if (input_dim == 0) throw std::domain_error("input_dim must be >= 1");
    if (hidden_width == 0) throw std::domain_error("hidden_width must be >= 1");
    if ((init.kind == InitKind::plain_normal || init.kind == InitKind::plain_uniform) &&
        !(std::isfinite(init.scale) && init.scale > 0.0))
      throw std::domain_error("init scale must be finite and > 0");
  }

  /// Node counts from input to output: {input, width x depth, 1}.
  std::vector<std::size_t> layer_sizes() const {
    std::vector<std::size_t> sizes{input_dim};
    sizes.insert(sizes.end(), hidden_depth, hidden_width);
    sizes.push_back(1);
    return sizes;
  }
};

/// Number of weights and biases, sum over layers of fan_in * fan_out + fan_out.
inline std::size_t param_count(const NetworkSpec& spec) {
  spec.validate();
  const auto sizes = spec.layer_sizes();
  std::size_t count = 0;
  for (std::size_t l = 1; l < sizes.size(); ++l) count += sizes[l - 1] * sizes[l] + sizes[l];
  return count;
}

struct Layer {
  std::size_t fan_in = 0;
  std::size_t fan_out = 0;
  std::vector<double> weights;  ///< fan_out x fan_in, row-major
  std::vector<double> bias;     ///< fan_out

  double& w(std::size_t out, std::size_t in) { return weights[out * fan_in + in]; }
  double w(std::size_t out, std::size_t in) const { return weights[out * fan_in + in]; }

  friend bool operator==(const Layer&, const Layer&) = default;
};

/// A point in weight space.
///
/// Flattened order (gradients, snapshots): layers from input to output; within
/// a layer the weight matrix row-major, then the bias vector.
struct WeightSet {
  Activation activation = Activation::relu;
  std::vector<Layer> layers;

  friend bool operator==(const WeightSet&, const WeightSet&) = default;

  std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().fan_in; }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weights.size() + l.bias.size();
    return n;
  }

  std::vector<double> flatten() const {
    std::vector<double> flat;
    flat.reserve(param_count());
    for (const auto& l : layers) {
      flat.insert(flat.end(), l.weights.begin(), l.weights.end());
      flat.insert(flat.end(), l.bias.begin(), l.bias.end());
    }
    return flat;
  }

  void assign_flat(std::span<const double> flat) {
    if (flat.size() != param_count()) throw std::domain_error("flat vector length mismatch");
    auto it = flat.begin();
    for (auto& l : layers) {
      std::copy_n(it, l.weights.size(), l.weights.begin());
      it += static_cast<std::ptrdiff_t>(l.weights.size());
      std::copy_n(it, l.bias.size(), l.bias.begin());
      it += static_cast<std::ptrdiff_t>(l.bias.size());
    }
  }

  /// Chain and finiteness invariants.
  void validate() const {
    if (layers.empty()) throw std::domain_error("weight set has no layers");
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto& layer = layers[l];
      if (layer.weights.size() != layer.fan_in * layer.fan_out || layer.bias.size() != layer.fan_out)
        throw std::domain_error("layer " + std::to_string(l) + " storage does not match its shape");
      if (l > 0 && layer.fan_in != layers[l - 1].fan_out)
        throw std::domain_error("layer " + std::to_string(l) + " fan_in does not chain");
      for (double v : layer.weights)
        if (!std::isfinite(v)) throw std::domain_error("non-finite weight");
      for (double v : layer.bias)
        if (!std::isfinite(v)) throw std::domain_error("non-finite bias");
    }
    if (layers.back().fan_out != 1) throw std::domain_error("output layer must have one unit");
  }
};

/// Zero-filled weights with the layer shapes of `spec`.
inline WeightSet zero_weights(const NetworkSpec& spec) {
  spec.validate();
  const auto sizes = spec.layer_sizes();
  WeightSet ws;
  ws.activation = spec.activation;
  for (std::size_t l = 1; l < sizes.size(); ++l) {
    Layer layer;
    layer.fan_in = sizes[l - 1];
    layer.fan_out = sizes[l];
    layer.weights.assign(layer.fan_in * layer.fan_out, 0.0);
    layer.bias.assign(layer.fan_out, 0.0);
    ws.layers.push_back(std::move(layer));
  }
  return ws;
}

/// Fills `ws` (shaped for `spec`) with a fresh draw. Biases are zero.
inline void fill_init_weights(const NetworkSpec& spec, Engine& eng, WeightSet& ws) {
  for (auto& layer : ws.layers) {
    const double fan_in = static_cast<double>(layer.fan_in);
    const double fan_out = static_cast<double>(layer.fan_out);
    switch (spec.init.kind) {
      case InitKind::he_normal: {
        std::normal_distribution<double> d(0.0, std::sqrt(2.0 / fan_in));
        for (auto& v : layer.weights) v = d(eng);
        break;
      }
      case InitKind::he_uniform: {
        const double limit = std::sqrt(6.0 / fan_in);
        std::uniform_real_distribution<double> d(-limit, limit);
        for (auto& v : layer.weights) v = d(eng);
        break;
      }
      case InitKind::xavier_normal: {
        std::normal_distribution<double> d(0.0, std::sqrt(2.0 / (fan_in + fan_out)));
        for (auto& v : layer.weights) v = d(eng);
        break;
      }
      case InitKind::plain_normal: {
        std::normal_distribution<double> d(0.0, spec.init.scale);
        for (auto& v : layer.weights) v = d(eng);
        break;
      }
      case InitKind::plain_uniform: {
        std::uniform_real_distribution<double> d(-spec.init.scale, spec.init.scale);
        for (auto& v : layer.weights) v = d(eng);
        break;
      }
    }
    std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
  }
}

/// Same (spec, trial_seed) always yields the same WeightSet.
inline WeightSet init_weights(const NetworkSpec& spec, std::uint64_t trial_seed) {
  WeightSet ws = zero_weights(spec);
  Engine eng(trial_seed);
  fill_init_weights(spec, eng, ws);
  return ws;
}

struct EncodedSample {
  std::vector<double> features;
  int label = 0;

  friend bool operator==(const EncodedSample&, const EncodedSample&) = default;
};

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline double clamp_probability(double p) { return std::clamp(p, kProbEpsilon, 1.0 - kProbEpsilon); }

inline double activate(Activation a, double z) {
  // ReLU(0) = 0 and its subgradient at 0 is taken as 0.
  return a == Activation::relu ? (z > 0.0 ? z : 0.0) : std::tanh(z);
}

/// Scratch buffers for allocation-free forward passes.
struct ForwardWorkspace {
  std::vector<double> a, b;
};

inline double forward_logit(const WeightSet& ws, std::span<const double> features,
                            ForwardWorkspace& scratch) {
  if (features.size() != ws.input_dim())
    throw std::domain_error("feature length " + std::to_string(features.size()) +
                            " does not match input_dim " + std::to_string(ws.input_dim()));
  scratch.a.assign(features.begin(), features.end());
  const std::size_t last = ws.layers.size() - 1;
  for (std::size_t l = 0; l <= last; ++l) {
    const Layer& layer = ws.layers[l];
    scratch.b.resize(layer.fan_out);
    for (std::size_t o = 0; o < layer.fan_out; ++o) {
      const double* row = &layer.weights[o * layer.fan_in];
      double z = layer.bias[o];
      for (std::size_t i = 0; i < layer.fan_in; ++i) z += row[i] * scratch.a[i];
      scratch.b[o] = l == last ? z : activate(ws.activation, z);
    }
    std::swap(scratch.a, scratch.b);
  }
  return scratch.a[0];
}

/// Clamped sigmoid output.
inline double forward(const WeightSet& ws, std::span<const double> features, ForwardWorkspace& scratch) {
  return clamp_probability(sigmoid(forward_logit(ws, features, scratch)));
}

inline double forward(const WeightSet& ws, std::span<const double> features) {
  ForwardWorkspace scratch;
  return forward(ws, features, scratch);
}

inline double bce_loss(double prob, int label) {
  return label == 1 ? -std::log(prob) : -std::log1p(-prob);
}

inline double mean_loss(const WeightSet& ws, std::span<const EncodedSample> samples,
                        ForwardWorkspace& scratch) {
  if (samples.empty()) throw std::domain_error("mean_loss needs at least one sample");
  double total = 0.0;
  for (const auto& s : samples) total += bce_loss(forward(ws, s.features, scratch), s.label);
  return total / static_cast<double>(samples.size());
}

inline double mean_loss(const WeightSet& ws, std::span<const EncodedSample> samples) {
  ForwardWorkspace scratch;
  return mean_loss(ws, samples, scratch);
}

/// Fraction misclassified with decision threshold 0.5 (p >= 0.5 predicts 1).
inline double error_rate(const WeightSet& ws, std::span<const EncodedSample> samples) {
  if (samples.empty()) throw std::domain_error("error_rate needs at least one sample");
  ForwardWorkspace scratch;
  std::size_t wrong = 0;
  for (const auto& s : samples) wrong += ((forward(ws, s.features, scratch) >= 0.5) ? 1 : 0) != s.label;
  return static_cast<double>(wrong) / static_cast<double>(samples.size());
}

/// Exact gradient of mean_loss over data[indices], flattened in WeightSet order.
///
/// Where the sigmoid output sits outside the clamp band the loss is locally
/// constant and that sample contributes zero.
inline std::vector<double> gradient(const WeightSet& ws, std::span<const EncodedSample> data,
                                    std::span<const std::size_t> indices) {
  if (indices.empty()) throw std::domain_error("gradient needs a non-empty batch");
  const std::size_t n_layers = ws.layers.size();
  std::vector<double> grad(ws.param_count(), 0.0);

  std::vector<std::size_t> offsets(n_layers);
  for (std::size_t l = 0, off = 0; l < n_layers; ++l) {
    offsets[l] = off;
    off += ws.layers[l].weights.size() + ws.layers[l].bias.size();
  }

  // acts[0] = input, acts[l+1] = post-activation output of layer l.
  std::vector<std::vector<double>> acts(n_layers + 1);
  std::vector<double> delta, prev_delta;
  for (std::size_t idx : indices) {
    if (idx >= data.size()) throw std::domain_error("batch index out of range");
    const EncodedSample& s = data[idx];
    if (s.features.size() != ws.input_dim())
      throw std::domain_error("feature length does not match input_dim");
    acts[0] = s.features;
    for (std::size_t l = 0; l < n_layers; ++l) {
      const Layer& layer = ws.layers[l];
      acts[l + 1].resize(layer.fan_out);
      for (std::size_t o = 0; o < layer.fan_out; ++o) {
        double z = layer.bias[o];
        for (std::size_t i = 0; i < layer.fan_in; ++i) z += layer.w(o, i) * acts[l][i];
        acts[l + 1][o] = l + 1 == n_layers ? z : activate(ws.activation, z);
      }
    }
    const double p = sigmoid(acts[n_layers][0]);
    if (!(p > kProbEpsilon && p < 1.0 - kProbEpsilon)) continue;
    delta.assign(1, p - static_cast<double>(s.label));

    for (std::size_t l = n_layers; l-- > 0;) {
      const Layer& layer = ws.layers[l];
      double* g = &grad[offsets[l]];
      const auto& input = acts[l];
      for (std::size_t o = 0; o < layer.fan_out; ++o) {
        for (std::size_t i = 0; i < layer.fan_in; ++i) g[o * layer.fan_in + i] += delta[o] * input[i];
        g[layer.weights.size() + o] += delta[o];
      }
      if (l == 0) break;
      prev_delta.assign(layer.fan_in, 0.0);
      for (std::size_t o = 0; o < layer.fan_out; ++o)
        for (std::size_t i = 0; i < layer.fan_in; ++i) prev_delta[i] += layer.w(o, i) * delta[o];
      // input[i] is the activation of layer l-1; derive its slope from it.
      for (std::size_t i = 0; i < layer.fan_in; ++i) {
        const double a = input[i];
        prev_delta[i] *= ws.activation == Activation::relu ? (a > 0.0 ? 1.0 : 0.0) : 1.0 - a * a;
      }
      std::swap(delta, prev_delta);
    }
  }
  const double inv = 1.0 / static_cast<double>(indices.size());
  for (auto& g : grad) g *= inv;
  return grad;
}

inline std::vector<double> gradient(const WeightSet& ws, std::span<const EncodedSample> batch) {
  std::vector<std::size_t> all(batch.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return gradient(ws, batch, all);
}

struct TrainConfig {
  double learning_rate = 0.1;
  std::size_t epochs = 100;
  std::size_t batch_size = 1;
  std::uint64_t seed = 0;
  std::size_t snapshot_every = 10;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct Snapshot {
  std::size_t epoch = 0;
  WeightSet weights;
};

struct TrainRun {
  double initial_loss = 0.0;         ///< full-data loss at initialization
  std::vector<double> epoch_losses;  ///< full-data loss after each epoch, epochs 1..E
  std::vector<Snapshot> snapshots;   ///< epoch 0, every snapshot_every epochs, and the last epoch
  double best_loss = 0.0;            ///< min(epoch_losses); empirical stand-in for the global minimum
  TrainConfig config;
};

/// Raised when the full-data loss stops being finite. Carries the run so far.
class TrainingAborted : public std::runtime_error {
 public:
  TrainingAborted(std::size_t epoch, TrainRun partial)
      : std::runtime_error("training aborted: non-finite loss at epoch " + std::to_string(epoch)),
        epoch_(epoch),
        partial_(std::move(partial)) {}

  std::size_t epoch() const { return epoch_; }
  const TrainRun& partial() const { return partial_; }

 private:
  std::size_t epoch_;
  TrainRun partial_;
};

/// Called after every epoch with (epoch, current weights).
using EpochObserver = std::function<void(std::size_t, const WeightSet&)>;

/// Plain minibatch SGD with a constant learning rate and no momentum.
///
/// Initial weights come from init_weights(spec, derive_seed(seed, 0)); the
/// per-epoch shuffle uses the stream derive_seed(seed, 1). The final partial
/// batch of an epoch is kept.
inline TrainRun train(const NetworkSpec& spec, std::span<const EncodedSample> data, const TrainConfig& cfg,
                      const EpochObserver& observer = {}) {
  spec.validate();
  if (data.empty()) throw std::domain_error("train needs at least one sample");
  if (!(std::isfinite(cfg.learning_rate) && cfg.learning_rate >= 0.0))
    throw std::domain_error("learning rate must be finite and >= 0");
  if (cfg.epochs == 0) throw std::domain_error("epochs must be >= 1");
  if (cfg.batch_size == 0 || cfg.batch_size > data.size())
    throw std::domain_error("batch_size must be in [1, |data|]");
  if (cfg.snapshot_every == 0) throw std::domain_error("snapshot_every must be >= 1");
  for (const auto& s : data)
    if (s.features.size() != spec.input_dim) throw std::domain_error("feature length does not match input_dim");

  TrainRun run;
  run.config = cfg;
  WeightSet ws = init_weights(spec, derive_seed(cfg.seed, 0));
  Engine shuffle_eng = make_engine(cfg.seed, 1);
  ForwardWorkspace scratch;

  run.initial_loss = mean_loss(ws, data, scratch);
  run.snapshots.push_back({0, ws});
  run.best_loss = run.initial_loss;

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> flat = ws.flatten();

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_eng);
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      const auto g = gradient(ws, data, std::span(order).subspan(begin, end - begin));
      for (std::size_t k = 0; k < flat.size(); ++k) flat[k] -= cfg.learning_rate * g[k];
      ws.assign_flat(flat);
    }
    const double loss = mean_loss(ws, data, scratch);
    if (!std::isfinite(loss)) {
      run.snapshots.push_back({epoch, ws});
      throw TrainingAborted(epoch, std::move(run));
    }
    run.epoch_losses.push_back(loss);
    run.best_loss = run.epoch_losses.size() == 1 ? loss : std::min(run.best_loss, loss);
    if (observer) observer(epoch, ws);
    if (epoch % cfg.snapshot_every == 0 || epoch == cfg.epochs) run.snapshots.push_back({epoch, ws});
  }
  return run;
}

}  // namespace losslab::nn
