// losslab command line: sphere geometry, loss histograms, fits, training
// sweeps and gradient probes. Exit codes: 0 ok, 1 bad input or config, 2 I/O.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "losslab/distfit.hpp"
#include "losslab/geometry_probes.hpp"
#include "losslab/lab/config.hpp"
#include "losslab/lab/experiments.hpp"
#include "losslab/lab/record.hpp"
#include "losslab/mc_histogram.hpp"
#include "losslab/nanonet.hpp"
#include "losslab/spherekit.hpp"

using namespace losslab;
using lab::detail::format_double;

namespace {

struct Globals {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::string out;
  std::string format = "both";
};

void kv(const std::string& key, const std::string& value) { std::cout << key << " = " << value << "\n"; }
void kv(const std::string& key, double value) { kv(key, format_double(value)); }

std::filesystem::path out_dir(const Globals& g) {
  if (!g.out.empty()) return g.out;
  if (const char* env = std::getenv("LOSSLAB_OUT"); env && *env) return env;
  return "losslab_out";
}

void emit(const lab::ExperimentRecord& r, const Globals& g) {
  const auto written = lab::export_record(r, out_dir(g), lab::parse_format(g.format));
  for (const auto& [k, v] : r.summary) kv(k, v);
  for (const auto& p : written) std::cout << "wrote " << p.string() << "\n";
}

std::vector<double> read_values(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data::IoError("cannot open '" + path + "'");
  std::vector<double> xs;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto t = lab::detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    try {
      xs.push_back(lab::detail::parse_real(t));
    } catch (const std::invalid_argument& e) {
      throw std::domain_error(path + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return xs;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"losslab: loss-landscape experiments for small binary classifiers"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", lab::version_string());
  app.footer("Config keys (section.key, default, meaning); set them in a --config file or with --set:\n" +
             lab::describe_defaults() + "\nOutput goes to --out, else $LOSSLAB_OUT, else ./losslab_out.");

  Globals g;
  app.add_option("--config", g.config_path, "config file (section/key = value)");
  app.add_option("--set", g.overrides, "override a key, e.g. --set network.width=12")->take_all();
  app.add_option("--seed", g.seed, "master seed");
  app.add_option("--workers", g.workers, "worker threads");
  app.add_option("--out", g.out, "output directory (default $LOSSLAB_OUT or ./losslab_out)");
  app.add_option("--format", g.format, "csv | svg | both")->check(CLI::IsMember({"csv", "svg", "both"}));

  // Subcommand-local shortcuts; each lands in the config before running.
  std::vector<std::string> local;
  auto shortcut = [&local](CLI::App* cmd, const std::string& flag, const std::string& key, const std::string& help) {
    cmd->add_option_function<std::string>(flag, [&local, key](const std::string& v) { local.push_back(key + "=" + v); },
                                          help + " (" + key + ")");
  };

  auto* config_cmd = app.add_subcommand("config", "print the resolved configuration, or key docs with --keys");
  bool list_keys = false;
  config_cmd->add_flag("--keys", list_keys, "list every key with its default");

  auto* sphere_cmd = app.add_subcommand("sphere", "n-ball volume, surface and sampling");
  sphere_cmd->require_subcommand(1);
  auto* sphere_curve = sphere_cmd->add_subcommand("curve", "volume and surface for n = 1..n_max");
  shortcut(sphere_curve, "--n-max", "sphere.n_max", "largest dimension");
  shortcut(sphere_curve, "--radius", "sphere.radius", "radius");
  auto* sphere_peak = sphere_cmd->add_subcommand("peak", "dimensions maximizing volume and surface");
  shortcut(sphere_peak, "--radius", "sphere.radius", "radius");
  auto* sphere_distance = sphere_cmd->add_subcommand("distance", "mean distance between two uniform ball points");
  shortcut(sphere_distance, "--dims", "sphere.dims", "dimensions, comma separated");
  shortcut(sphere_distance, "--trials", "sphere.trials", "point pairs per dimension");
  shortcut(sphere_distance, "--radius", "sphere.radius", "radius");
  auto* sphere_support = sphere_cmd->add_subcommand("support", "volume where a Gaussian exceeds a density");
  shortcut(sphere_support, "--dim", "sphere.support_dim", "dimension");
  shortcut(sphere_support, "--sigma", "sphere.sigma", "standard deviation");
  shortcut(sphere_support, "--threshold", "sphere.threshold", "density threshold");

  auto* hist_cmd = app.add_subcommand("hist", "Monte-Carlo loss histograms at initialization");
  hist_cmd->require_subcommand(1);
  auto* hist_sample = hist_cmd->add_subcommand("sample", "sample and export a histogram");
  auto* hist_modes = hist_cmd->add_subcommand("modes", "mode report of a histogram");
  auto* hist_tail = hist_cmd->add_subcommand("tail", "resample the region left of hist.left_boundary");
  for (auto* c : {hist_sample, hist_modes, hist_tail}) {
    shortcut(c, "--trials", "hist.trials", "initializations");
    shortcut(c, "--samples", "hist.samples", "dataset rows");
  }
  std::string hist_input;
  hist_modes->add_option("--input", hist_input, "exported histogram .csv; omitted samples a new one");
  auto* hist_compare = hist_cmd->add_subcommand("compare", "shift between two exported histograms");
  std::string compare_a, compare_b;
  hist_compare->add_option("a", compare_a, "first histogram .csv")->required();
  hist_compare->add_option("b", compare_b, "second histogram .csv")->required();

  auto* fit_cmd = app.add_subcommand("fit", "fit a left-bounded distribution and run a KS test");
  shortcut(fit_cmd, "--family", "fit.family", "lognormal | gamma | weibull");
  shortcut(fit_cmd, "--input", "fit.input", "file of positive values");

  auto* train_cmd = app.add_subcommand("train", "train one network and report losses");

  auto* probe_cmd = app.add_subcommand("probe", "gradient geometry probes");
  probe_cmd->require_subcommand(1);
  auto* probe_tendril = probe_cmd->add_subcommand("tendril", "ID and confusion at every snapshot of a small run");
  auto* probe_confusion = probe_cmd->add_subcommand("confusion", "gradient confusion at initialization");
  auto* probe_influence = probe_cmd->add_subcommand("influence", "weight interaction count per parameter");
  std::optional<std::size_t> influence_input;
  shortcut(probe_influence, "--width", "network.width", "hidden width");
  shortcut(probe_influence, "--depth", "network.depth", "hidden layers");
  probe_influence->add_option("--input-dim", influence_input, "input features (default: from the dataset)");

  auto* sweep_cmd = app.add_subcommand("sweep", "training sweeps");
  sweep_cmd->require_subcommand(1);
  auto* sweep_capacity = sweep_cmd->add_subcommand("capacity", "train and test loss against parameter count");
  auto* sweep_epoch = sweep_cmd->add_subcommand("epoch", "losses and probes against epoch");
  auto* sweep_fidelity = sweep_cmd->add_subcommand("fidelity", "test loss against training-set size");

  auto* recipe_cmd = app.add_subcommand("recipe", "fixed histogram panels");
  std::string recipe_name;
  recipe_cmd->add_option("name", recipe_name, "recipe name")
      ->check(CLI::IsMember(lab::recipe_names()))
      ->required();

  auto* export_cmd = app.add_subcommand("export", "re-export a record in another format");
  std::string export_input;
  export_cmd->add_option("input", export_input, "record .csv")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    lab::ExperimentConfig cfg = g.config_path.empty() ? lab::ExperimentConfig{} : lab::load_config(g.config_path);
    if (g.seed) cfg.run.seed = *g.seed;
    if (g.workers) cfg.run.workers = *g.workers;
    for (const auto& o : g.overrides) lab::apply_override(cfg, o);
    for (const auto& o : local) lab::apply_override(cfg, o);

    if (*config_cmd) {
      std::cout << (list_keys ? lab::describe_defaults() : lab::to_text(cfg));
    } else if (*sphere_curve) {
      emit(lab::run_sphere_curve(cfg), g);
    } else if (*sphere_peak) {
      const auto v = sphere::volume_peak_dimension(cfg.sphere.radius);
      const auto s = sphere::surface_peak_dimension(cfg.sphere.radius);
      kv("radius", cfg.sphere.radius);
      kv("volume_peak_real", v.real_peak);
      kv("volume_peak_integer", std::to_string(v.integer_peak));
      kv("surface_peak_real", s.real_peak);
      kv("surface_peak_integer", std::to_string(s.integer_peak));
    } else if (*sphere_distance) {
      for (auto n : cfg.sphere.dims) {
        const auto d = sphere::expected_pairwise_distance(static_cast<unsigned>(n), cfg.sphere.radius,
                                                          cfg.sphere.trials, cfg.run.seed, cfg.run.workers);
        kv("dim" + std::to_string(n) + ".mean", d.mean);
        kv("dim" + std::to_string(n) + ".stderr", d.stderr_);
      }
    } else if (*sphere_support) {
      const sphere::SupportVolumeQuery q{static_cast<unsigned>(cfg.sphere.support_dim), cfg.sphere.sigma,
                                         cfg.sphere.threshold};
      kv("radius", sphere::gaussian_support_radius(q));
      kv("volume", sphere::gaussian_support_volume(q));
    } else if (*hist_sample) {
      lab::require_keys(cfg, "hist sample");
      emit(lab::run_histogram(cfg), g);
    } else if (*hist_modes) {
      lab::require_keys(cfg, "hist modes");
      const auto rec = hist_input.empty() ? lab::run_histogram(cfg) : lab::import_record(hist_input);
      const auto h = lab::histogram_from_record(rec);
      const auto& c = rec.config.hist;
      const auto m = mc::detect_modes(h, c.prominence, c.tau, c.delta, c.noise_sigmas);
      kv("mode_count", std::to_string(m.modes.size()));
      for (std::size_t i = 0; i < m.modes.size(); ++i) {
        kv("mode" + std::to_string(i) + ".center", m.modes[i].center);
        kv("mode" + std::to_string(i) + ".count", std::to_string(m.modes[i].count));
        kv("mode" + std::to_string(i) + ".prominence", std::to_string(m.modes[i].prominence));
      }
      kv("central_mode_loss", m.central_mode_loss);
      kv("central_reference", m.central_reference);
      kv("zero_mode_mass", m.zero_mode_mass);
      kv("left_tail_mass", m.left_tail_mass);
    } else if (*hist_tail) {
      lab::require_keys(cfg, "hist tail");
      emit(lab::run_tail(cfg), g);
    } else if (*hist_compare) {
      const auto a = lab::histogram_from_record(lab::import_record(compare_a));
      const auto b = lab::histogram_from_record(lab::import_record(compare_b));
      const auto s = mc::compare_histograms(a, b, cfg.hist.tau, cfg.hist.delta);
      kv("zero_mode_mass_delta", s.zero_mode_mass_delta);
      kv("left_tail_mass_delta", s.left_tail_mass_delta);
      kv("wasserstein", s.wasserstein);
    } else if (*fit_cmd) {
      lab::require_keys(cfg, "fit");
      std::vector<double> xs;
      if (!cfg.fit.input.empty()) {
        xs = read_values(cfg.fit.input);
      } else {
        const auto data = lab::histogram_data(cfg);
        xs = mc::sample_losses(lab::histogram_config(cfg, data.front().features.size()), data, 0, cfg.hist.trials,
                               cfg.run.workers);
      }
      const auto f = fit::fit(fit::parse_family(cfg.fit.family), xs);
      kv("family", std::string(fit::to_string(f.family)));
      kv("n", std::to_string(xs.size()));
      kv("p1", f.p1);
      kv("p2", f.p2);
      kv("log_likelihood", f.log_likelihood);
      kv("converged", f.converged ? "true" : "false");
      kv("iterations", std::to_string(f.iterations));
      if (!f.converged) throw std::domain_error("fit did not converge");
      const auto gof = fit::ks_test(xs, f);
      kv("ks_statistic", gof.ks_statistic);
      kv("p_value", gof.p_value);
    } else if (*train_cmd) {
      const auto data = lab::prepare_data(cfg);
      const auto spec = lab::network_spec(cfg, data.encoder.input_dim());
      const auto run = nn::train(spec, data.train, lab::train_config(cfg, data.train.size(), cfg.run.seed));
      const auto& w = run.snapshots.back().weights;
      kv("param_count", std::to_string(nn::param_count(spec)));
      kv("initial_loss", run.initial_loss);
      kv("final_train_loss", run.epoch_losses.back());
      kv("best_loss", run.best_loss);
      kv("train_error", nn::error_rate(w, data.train));
      if (!data.test.empty()) {
        kv("test_loss", nn::mean_loss(w, data.test));
        kv("test_error", nn::error_rate(w, data.test));
      }
    } else if (*probe_tendril) {
      emit(lab::run_tendril(cfg), g);
    } else if (*probe_confusion) {
      const auto data = lab::histogram_data(cfg);
      const auto spec = lab::network_spec(cfg, data.front().features.size());
      const auto w = nn::init_weights(spec, derive_seed(cfg.run.seed, 0));
      const auto ens = probe::gradient_ensemble(w, data, std::min(cfg.probe.batch_size, data.size()), cfg.probe.k,
                                                cfg.run.seed);
      kv("param_count", std::to_string(nn::param_count(spec)));
      kv("confusion", probe::gradient_confusion(ens));
    } else if (*probe_influence) {
      const std::size_t in = influence_input ? *influence_input : lab::histogram_data(cfg).front().features.size();
      const auto spec = lab::network_spec(cfg, in);
      kv("param_count", std::to_string(nn::param_count(spec)));
      kv("interactions", std::to_string(probe::influence_interactions(spec)));
      kv("influence_ratio", probe::influence_ratio(spec));
    } else if (*sweep_capacity) {
      emit(lab::run_capacity_sweep(cfg), g);
    } else if (*sweep_epoch) {
      emit(lab::run_epoch_sweep(cfg), g);
    } else if (*sweep_fidelity) {
      emit(lab::run_fidelity_sweep(cfg), g);
    } else if (*recipe_cmd) {
      for (const auto& r : lab::run_recipe(recipe_name, cfg)) {
        std::cout << "[" << r.label << "]\n";
        emit(r, g);
      }
    } else if (*export_cmd) {
      const auto r = lab::import_record(export_input);
      for (const auto& p : lab::export_record(r, out_dir(g), lab::parse_format(g.format)))
        std::cout << "wrote " << p.string() << "\n";
    }
  } catch (const data::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
