// Acceptance suite: one PASS/FAIL line per criterion. Tolerances and budgets
// are pinned here. Exit status counts only failures not listed in kKnown.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <string>

#include "losslab/distfit.hpp"
#include "losslab/lab/experiments.hpp"

using namespace losslab;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

// Criteria that cannot pass as worded; printed as FAIL with the reason.
const std::map<int, std::string> kKnown{
    {11,
     "with one training row every minibatch is that row, so all K gradients are identical and the participation "
     "ratio is 0/0 at every snapshot"},
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string join(const std::vector<double>& xs, const char* f = "%.4g") {
  std::string s;
  for (double x : xs) s += (s.empty() ? "" : ", ") + fmt(f, x);
  return "{" + s + "}";
}

bool strictly_increasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] > v[i - 1])) return false;
  return true;
}

const std::vector<nn::EncodedSample>& bundled() {
  static const auto x = lab::histogram_data(lab::ExperimentConfig{});
  return x;
}

mc::LossHistogram histogram_of(const lab::ExperimentConfig& c) {
  return mc::sample_histogram(lab::histogram_config(c, bundled().front().features.size()), bundled(), c.run.workers);
}

lab::ExperimentConfig base_config() {
  lab::ExperimentConfig c;
  c.hist.trials = 100000;
  c.run.seed = 42;
  c.run.workers = 4;
  return c;
}

// ---------------------------------------------------------------------------

Outcome c1_sphere() {
  const double rel = std::abs(sphere::ball_volume(3, 1) - 4 * std::numbers::pi / 3) / (4 * std::numbers::pi / 3);
  const int vp = sphere::volume_peak_dimension(1).integer_peak;
  const int sp = sphere::surface_peak_dimension(1).integer_peak;
  const double v100 = sphere::ball_volume(100, 1);
  return {rel < 1e-9 && vp == 5 && sp == 7 && v100 < 1e-39,
          "V3 rel err " + fmt("%.2e", rel) + " (tol 1e-9), argmax V " + std::to_string(vp) + ", argmax S " +
              std::to_string(sp) + ", V100 " + fmt("%.3e", v100) + " (< 1e-39)"};
}

Outcome c2_distance() {
  std::vector<double> means;
  for (unsigned n : {2u, 8u, 32u, 128u}) means.push_back(sphere::expected_pairwise_distance(n, 1, 100000, 42, 4).mean);
  const auto d1 = sphere::expected_pairwise_distance(1, 1, 100000, 42, 4);
  const double z = std::abs(d1.mean - 2.0 / 3.0) / d1.stderr_;
  return {strictly_increasing(means) && z < 3,
          "means n={2,8,32,128} " + join(means) + ", n=1 mean " + fmt("%.5f", d1.mean) + " is " + fmt("%.2f", z) +
              " stderr from 2/3 (tol 3)"};
}

Outcome c3_gradient() {
  std::mt19937_64 pick(7);
  int passed = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const nn::NetworkSpec spec{1 + pick() % 6, 1 + pick() % 8, pick() % 4, nn::Activation::tanh,
                               {nn::InitKind::plain_normal, 0.8}};
    auto ws = nn::init_weights(spec, 500 + trial);
    auto flat = ws.flatten();
    std::normal_distribution<double> g(0.0, 0.3);
    for (auto& v : flat) v += g(pick);
    ws.assign_flat(flat);
    std::vector<nn::EncodedSample> batch(1 + pick() % 10);
    for (auto& s : batch) {
      for (std::size_t k = 0; k < spec.input_dim; ++k) s.features.push_back(g(pick) * 3);
      s.label = static_cast<int>(pick() % 2);
    }
    const auto grad = nn::gradient(ws, batch);
    bool ok = true;
    for (std::size_t k = 0; k < flat.size(); ++k) {
      const double h = 1e-5;
      auto p = flat, m = flat;
      p[k] += h;
      m[k] -= h;
      auto wp = ws, wm = ws;
      wp.assign_flat(p);
      wm.assign_flat(m);
      const double fd = (nn::mean_loss(wp, batch) - nn::mean_loss(wm, batch)) / (2 * h);
      const double err = std::abs(grad[k]) < 1e-8 ? std::abs(fd - grad[k]) : std::abs(fd - grad[k]) / std::abs(grad[k]);
      worst = std::max(worst, err);
      if (err >= 1e-4) ok = false;
    }
    passed += ok;
  }
  return {passed == 100, std::to_string(passed) + "/100 configurations, worst rel err " + fmt("%.2e", worst) +
                             " (tol 1e-4)"};
}

Outcome c4_determinism() {
  auto c = base_config();
  c.network.activation = nn::Activation::relu;
  c.hist.trials = 1000;
  bool same = true;
  c.run.workers = 1;
  const auto ref = histogram_of(c);
  for (std::size_t w : {2u, 4u, 8u}) {
    c.run.workers = w;
    const auto h = histogram_of(c);
    same = same && h.counts == ref.counts && h.min_loss == ref.min_loss && h.max_loss == ref.max_loss &&
           h.overflow_count == ref.overflow_count;
  }
  c.hist.trials = 100000;
  c.run.workers = 4;
  const auto a = histogram_of(c);
  const auto b = histogram_of(c);
  const bool repeat = a.counts == b.counts && a.min_loss == b.min_loss && a.max_loss == b.max_loss;
  return {same && repeat, std::string("workers {1,2,4,8} at 1e3: ") + (same ? "identical" : "DIFFER") +
                              ", repeated 1e5 runs: " + (repeat ? "identical" : "DIFFER")};
}

Outcome c5_central_mode() {
  auto c = base_config();
  c.network = {3, 3, nn::Activation::relu, nn::InitKind::he_normal, 1.0};
  c.hist.samples = {0};
  const auto h = histogram_of(c);
  const auto k = static_cast<std::size_t>(std::max_element(h.counts.begin(), h.counts.end()) - h.counts.begin());
  const bool hit = h.bin_edges[k] <= std::numbers::ln2 && std::numbers::ln2 < h.bin_edges[k + 1];
  return {hit, "modal bin [" + fmt("%.4f", h.bin_edges[k]) + ", " + fmt("%.4f", h.bin_edges[k + 1]) + ") holding " +
                   std::to_string(h.counts[k]) + " of 1e5; ln2 = 0.6931"};
}

std::vector<double> panel_values(const std::string& recipe, const std::vector<std::string>& labels,
                                 double (*metric)(const mc::LossHistogram&, const lab::ExperimentConfig&)) {
  std::vector<double> out;
  for (const auto& p : lab::recipe_panels(recipe, base_config()))
    if (labels.empty() || std::find(labels.begin(), labels.end(), p.label) != labels.end())
      out.push_back(metric(histogram_of(p.config), p.config));
  return out;
}

double zmm(const mc::LossHistogram& h, const lab::ExperimentConfig& c) { return mc::zero_mode_mass(h, c.hist.tau); }
double ltm(const mc::LossHistogram& h, const lab::ExperimentConfig& c) { return mc::left_tail_mass(h, c.hist.delta); }

Outcome c6_transitions() {
  const auto w = panel_values("width_transition", {}, zmm);
  auto d = panel_values("depth_transition", {}, zmm);
  std::vector<double> neg;
  for (double v : d) neg.push_back(-v);
  return {strictly_increasing(w) && strictly_increasing(neg),
          "zero_mode_mass widths {6,9,12} " + join(w) + " (strictly up), depths {3,6,9} " + join(d) +
              " (strictly down)"};
}

Outcome c7_aggregation() {
  const auto t = panel_values("sample_aggregation", {}, ltm);
  bool ok = true;
  for (std::size_t i = 1; i < t.size(); ++i) ok = ok && t[i] <= t[i - 1];
  return {ok, "left_tail_mass samples {1,2,3,50} " + join(t) + " (non-increasing)"};
}

Outcome c8_trained_below_min() {
  auto c = base_config();
  c.network = {9, 3, nn::Activation::relu, nn::InitKind::he_normal, 1.0};
  c.hist.samples.resize(50);
  std::iota(c.hist.samples.begin(), c.hist.samples.end(), std::size_t{0});
  const auto h = histogram_of(c);
  const std::span<const nn::EncodedSample> rows = std::span(bundled()).first(50);
  const auto run = nn::train(lab::network_spec(c, rows.front().features.size()), rows, {0.1, 200, 10, 42, 200});
  const double trained = nn::mean_loss(run.snapshots.back().weights, rows);
  return {trained < h.min_loss,
          "trained loss " + fmt("%.4f", trained) + " vs histogram minimum " + fmt("%.4f", h.min_loss) + " (strictly below)"};
}

Outcome c9_init_scaling() {
  const auto z = panel_values("init_scaling", {"uniform0.5", "uniform1", "uniform2"}, zmm);
  return {z.size() == 3 && strictly_increasing(z), "zero_mode_mass uniform scale {0.5,1,2} " + join(z) + " (increasing)"};
}

Outcome c10_id() {
  std::mt19937_64 eng(10);
  std::normal_distribution<double> g;
  std::vector<probe::Point> gauss(10000, probe::Point(5));
  for (auto& p : gauss)
    for (auto& v : p) v = g(eng);
  std::uniform_real_distribution<double> ang(0, 2 * std::numbers::pi);
  std::vector<probe::Point> circle(10000, probe::Point(10, 0.0));
  for (auto& p : circle) {
    const double a = ang(eng);
    p[2] = std::cos(a);
    p[5] = std::sin(a);
  }
  const double tn = probe::two_nn_id(gauss, 4).value;
  const double pr = probe::participation_ratio_id(gauss).value;
  const double tc = probe::two_nn_id(circle, 4).value;
  const bool ok = tn >= 4.5 && tn <= 5.5 && pr >= 4.5 && pr <= 5.5 && tc >= 0.8 && tc <= 1.2;
  return {ok, "Gaussian d=5: TwoNN " + fmt("%.3f", tn) + ", PR " + fmt("%.3f", pr) + " (in [4.5,5.5]); circle TwoNN " +
                  fmt("%.3f", tc) + " (in [0.8,1.2])"};
}

std::pair<double, double> tendril_ends(std::size_t rows_used) {
  const std::span<const nn::EncodedSample> rows = std::span(bundled()).first(rows_used);
  const nn::NetworkSpec spec{rows.front().features.size(), 6, 2, nn::Activation::relu, {nn::InitKind::he_normal, 1.0}};
  const auto run = nn::train(spec, rows, {0.1, 200, 1, 42, 20});
  const auto prof = probe::tendril_profile(run, rows, 1, 12, 42);
  return {prof.front().id_participation, prof.back().id_participation};
}

Outcome c11_tendril() {
  const auto [first, last] = tendril_ends(1);
  const bool ok = std::isfinite(first) && std::isfinite(last) && last < first;
  const auto [f8, l8] = tendril_ends(8);
  return {ok, "single-sample run: PR first " + fmt("%.3f", first) + ", last " + fmt("%.3f", last) +
                  " (need last < first); same run on 8 rows: " + fmt("%.3f", f8) + " -> " + fmt("%.3f", l8)};
}

Outcome c12_distfit() {
  std::mt19937_64 eng(12);
  std::lognormal_distribution<double> ln(0.0, 1.0);
  std::gamma_distribution<double> ga(2.0, 3.0);
  std::vector<double> a(10000), b(10000);
  for (auto& x : a) x = ln(eng);
  for (auto& x : b) x = ga(eng);
  const auto fl = fit::fit_lognormal(a);
  const auto fg = fit::fit_gamma(b);
  int ks_pass = 0;
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> xs(1000);
    for (auto& x : xs) x = ln(eng);
    ks_pass += fit::ks_test(xs, fit::fit_lognormal(xs)).p_value > 0.01;
  }
  const bool ok = std::abs(fl.p1) <= 0.05 && std::abs(fl.p2 - 1) <= 0.05 && std::abs(fg.p1 - 2) <= 0.1 && ks_pass >= 95;
  return {ok, "lognormal mu " + fmt("%.4f", fl.p1) + ", sigma " + fmt("%.4f", fl.p2) + " (+-0.05); gamma k " +
                  fmt("%.4f", fg.p1) + " (+-0.1); KS self-test " + std::to_string(ks_pass) + "/100 (>= 95)"};
}

Outcome c13_influence() {
  std::size_t checked = 0, mismatched = 0;
  for (std::size_t in = 1; in <= 50; ++in)
    for (std::size_t w = 1; w <= 50; ++w)
      for (std::size_t d = 0; d <= 50; ++d) {
        const nn::NetworkSpec spec{in, w, d};
        if (nn::param_count(spec) > 50) break;
        // explicit edges; (a, b) counts when b starts at or after the node a ends in
        const auto s = spec.layer_sizes();
        struct Edge { std::size_t layer, from, to; };
        std::vector<Edge> edges;
        for (std::size_t l = 1; l < s.size(); ++l)
          for (std::size_t i = 0; i < s[l - 1]; ++i)
            for (std::size_t j = 0; j < s[l]; ++j) edges.push_back({l, i, j});
        std::uint64_t count = 0;
        for (const auto& a : edges)
          for (const auto& b : edges)
            count += (b.layer - 1 > a.layer) || (b.layer - 1 == a.layer && b.from == a.to);
        ++checked;
        const double ratio = static_cast<double>(count) / static_cast<double>(nn::param_count(spec));
        if (probe::influence_interactions(spec) != count || probe::influence_ratio(spec) != ratio) ++mismatched;
      }
  return {mismatched == 0 && checked > 0,
          std::to_string(checked) + " architectures with <= 50 parameters, " + std::to_string(mismatched) + " mismatches"};
}

Outcome c14_closure() {
  const auto dir = fs::temp_directory_path() / "losslab_acceptance";
  fs::remove_all(dir);
  lab::ExperimentConfig c;
  c.sweep.sizes = {10, 20, 40, 80};
  c.run.workers = 4;
  std::string report;
  bool ok = true;
  for (const auto& rec : {lab::run_capacity_sweep(c), lab::run_epoch_sweep(c), lab::run_fidelity_sweep(c),
                          lab::run_tendril(c)}) {
    const auto paths = lab::export_record(rec, dir, lab::Format::csv);
    const auto again = lab::rerun(lab::import_record(paths[0]));
    const bool same = again.size() == 1 && lab::table_csv(again[0].results) == lab::read_file(paths[0]);
    ok = ok && same;
    report += (report.empty() ? "" : ", ") + std::string(lab::to_string(rec.kind)) + (same ? " identical" : " DIFFERS");
  }
  return {ok, report};
}

Outcome c15_endpoints() {
  std::printf("   non-claim: the capacity interpolation peak and the mid-curve data-fidelity peak are searched for by "
              "'sweep capacity' and 'sweep fidelity' but not gated; endpoint monotonicity gates instead\n");
  lab::ExperimentConfig cap;
  cap.data.synthetic_rows = 200;
  cap.data.label_noise = 0.1;
  cap.data.test_fraction = 0.2;
  cap.network.depth = 1;
  cap.sweep.widths = {1, 32};
  cap.run.workers = 4;
  const auto ce = lab::run_capacity_sweep(cap).results.values("train_error");

  lab::ExperimentConfig fid = cap;
  fid.data.synthetic_rows = 250;  // 200 training rows so size 160 fits
  fid.data.label_noise = 0.0;
  fid.network.depth = 2;
  fid.network.width = 8;
  fid.sweep.sizes = {10, 160};
  fid.sweep.repeats = 10;
  const auto fe = lab::run_fidelity_sweep(fid).results.values("test_error");
  return {ce[1] <= ce[0] && fe[1] <= fe[0], "train_error width {1,32} " + join(ce) + ", test_error size {10,160} " +
                                                join(fe) + " (second <= first)"};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "sphere exactness", 1, c1_sphere},
      {2, "pairwise-distance paradox", 30, c2_distance},
      {3, "gradient correctness", 60, c3_gradient},
      {4, "histogram determinism", 60, c4_determinism},
      {5, "central mode at ln 2", 120, c5_central_mode},
      {6, "width/depth transitions", 600, c6_transitions},
      {7, "sample aggregation", 300, c7_aggregation},
      {8, "trained below sampled minimum", 60, c8_trained_below_min},
      {9, "init scaling", 300, c9_init_scaling},
      {10, "ID estimators", 60, c10_id},
      {11, "tendril surrogate", 120, c11_tendril},
      {12, "distfit recovery", 120, c12_distfit},
      {13, "influence closed form", 60, c13_influence},
      {14, "harness closure", 600, c14_closure},
      {15, "endpoint monotonicity (non-claims)", 600, c15_endpoints},
  };
  int unexpected = 0, recorded = 0, passed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_budget = secs <= c.budget_s;
    const bool pass = o.pass && in_budget;
    std::printf("%2d %s %s: %s; %.2fs (budget %.0fs%s)\n", c.id, pass ? "PASS" : "FAIL", c.name, o.detail.c_str(),
                secs, c.budget_s, in_budget ? "" : ", OVER BUDGET");
    if (pass) {
      ++passed;
      if (kKnown.count(c.id)) std::printf("   note: listed as a known failure but passed\n");
    } else if (const auto it = kKnown.find(c.id); it != kKnown.end()) {
      ++recorded;
      std::printf("   recorded failure: %s\n", it->second.c_str());
    } else {
      ++unexpected;
    }
    std::fflush(stdout);
  }
  std::printf("summary: %d passed, %d recorded failures, %d unexpected failures\n", passed, recorded, unexpected);
  return unexpected == 0 ? 0 : 1;
}
