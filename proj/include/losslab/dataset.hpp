#pragma once

// Tabular binary-classification data: CSV ingestion against a column schema,
// z-score / one-hot encoding, seeded label noise and splits, and a synthetic
// generator with a planted linear rule.

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "losslab/nanonet.hpp"
#include "losslab/rng.hpp"

namespace losslab::data {

/// Raised for unreadable or unwritable paths; the message names the path.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Schema {
  std::string label_column = "survived";
  std::vector<std::string> numeric_columns{"age"};
  std::vector<std::string> categoric_columns{"sex", "pclass"};

  friend bool operator==(const Schema&, const Schema&) = default;
};

struct RawDataset {
  Schema schema;
  std::vector<int> labels;
  std::vector<std::vector<double>> numeric;        ///< [row][numeric column]
  std::vector<std::vector<std::string>> categoric;  ///< [row][categoric column]

  std::size_t size() const { return labels.size(); }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(std::move(cell));
      cell.clear();
    } else if (c != '\r') {
      cell += c;
    }
  }
  cells.push_back(std::move(cell));
  for (auto& s : cells) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    s = b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
  }
  return cells;
}

inline double parse_double(const std::string& s, std::size_t line, const std::string& column) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v))
    throw std::domain_error("line " + std::to_string(line) + ": column '" + column +
                            "' is not a finite number: '" + s + "'");
  return v;
}

}  // namespace detail

inline RawDataset parse_csv(std::istream& in, const Schema& schema) {
  std::string line;
  if (!std::getline(in, line)) throw std::domain_error("dataset is empty (missing header)");
  const auto header = detail::split_csv_line(line);
  auto column_of = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw std::domain_error("dataset has no column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t label_col = column_of(schema.label_column);
  std::vector<std::size_t> num_cols, cat_cols;
  for (const auto& c : schema.numeric_columns) num_cols.push_back(column_of(c));
  for (const auto& c : schema.categoric_columns) cat_cols.push_back(column_of(c));

  RawDataset ds;
  ds.schema = schema;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size())
      throw std::domain_error("line " + std::to_string(line_no) + ": expected " +
                              std::to_string(header.size()) + " cells, found " + std::to_string(cells.size()));
    const auto& lab = cells[label_col];
    if (lab != "0" && lab != "1")
      throw std::domain_error("line " + std::to_string(line_no) + ": label must be 0 or 1, found '" + lab + "'");
    ds.labels.push_back(lab == "1" ? 1 : 0);
    std::vector<double> nums;
    for (std::size_t k = 0; k < num_cols.size(); ++k)
      nums.push_back(detail::parse_double(cells[num_cols[k]], line_no, schema.numeric_columns[k]));
    ds.numeric.push_back(std::move(nums));
    std::vector<std::string> cats;
    for (auto c : cat_cols) cats.push_back(cells[c]);
    ds.categoric.push_back(std::move(cats));
  }
  if (ds.size() == 0) throw std::domain_error("dataset has a header but no rows");
  return ds;
}

inline RawDataset load_csv(const std::string& path, const Schema& schema) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset '" + path + "'");
  return parse_csv(in, schema);
}

/// Column statistics used to encode rows into network inputs.
struct Encoder {
  std::vector<double> means;
  std::vector<double> stds;                              ///< zero spread is stored as 1
  std::vector<std::vector<std::string>> vocabularies;  ///< sorted levels per categoric column

  std::size_t input_dim() const {
    std::size_t d = means.size();
    for (const auto& v : vocabularies) d += v.size();
    return d;
  }
};

/// z-score statistics from `stat_rows`; category levels from every row so that
/// held-out rows never meet an unseen level.
inline Encoder fit_encoder(const RawDataset& ds, std::span<const std::size_t> stat_rows) {
  if (stat_rows.empty()) throw std::domain_error("encoder needs at least one row");
  Encoder enc;
  const std::size_t n_num = ds.schema.numeric_columns.size();
  enc.means.assign(n_num, 0.0);
  enc.stds.assign(n_num, 0.0);
  for (std::size_t c = 0; c < n_num; ++c) {
    double sum = 0.0;
    for (auto r : stat_rows) sum += ds.numeric.at(r)[c];
    const double mean = sum / static_cast<double>(stat_rows.size());
    double ss = 0.0;
    for (auto r : stat_rows) ss += (ds.numeric[r][c] - mean) * (ds.numeric[r][c] - mean);
    const double sd = std::sqrt(ss / static_cast<double>(stat_rows.size()));
    enc.means[c] = mean;
    enc.stds[c] = sd > 0.0 ? sd : 1.0;
  }
  for (std::size_t c = 0; c < ds.schema.categoric_columns.size(); ++c) {
    std::vector<std::string> levels;
    for (const auto& row : ds.categoric) levels.push_back(row[c]);
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    enc.vocabularies.push_back(std::move(levels));
  }
  return enc;
}

inline Encoder fit_encoder(const RawDataset& ds) {
  std::vector<std::size_t> all(ds.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return fit_encoder(ds, all);
}

inline nn::EncodedSample encode_row(const RawDataset& ds, const Encoder& enc, std::size_t row) {
  nn::EncodedSample s;
  s.label = ds.labels.at(row);
  s.features.reserve(enc.input_dim());
  for (std::size_t c = 0; c < enc.means.size(); ++c)
    s.features.push_back((ds.numeric[row][c] - enc.means[c]) / enc.stds[c]);
  for (std::size_t c = 0; c < enc.vocabularies.size(); ++c) {
    const auto& vocab = enc.vocabularies[c];
    const auto it = std::lower_bound(vocab.begin(), vocab.end(), ds.categoric[row][c]);
    if (it == vocab.end() || *it != ds.categoric[row][c])
      throw std::domain_error("category '" + ds.categoric[row][c] + "' missing from encoder vocabulary");
    for (std::size_t k = 0; k < vocab.size(); ++k)
      s.features.push_back(static_cast<std::size_t>(it - vocab.begin()) == k ? 1.0 : 0.0);
  }
  return s;
}

inline std::vector<nn::EncodedSample> encode(const RawDataset& ds, const Encoder& enc,
                                             std::span<const std::size_t> rows) {
  std::vector<nn::EncodedSample> out;
  out.reserve(rows.size());
  for (auto r : rows) out.push_back(encode_row(ds, enc, r));
  return out;
}

inline std::vector<nn::EncodedSample> encode(const RawDataset& ds, const Encoder& enc) {
  std::vector<std::size_t> all(ds.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return encode(ds, enc, all);
}

/// Flips exactly round(rate * n) labels at seeded distinct positions.
inline void apply_label_noise(RawDataset& ds, double rate, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw std::domain_error("label noise rate must be in [0, 1]");
  const auto flips = static_cast<std::size_t>(std::llround(rate * static_cast<double>(ds.size())));
  std::vector<std::size_t> idx(ds.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Engine eng = make_engine(seed, 0x6C61626Cull);
  std::shuffle(idx.begin(), idx.end(), eng);
  for (std::size_t k = 0; k < flips; ++k) ds.labels[idx[k]] = 1 - ds.labels[idx[k]];
}

struct Split {
  std::vector<std::size_t> train;  ///< ascending row indices
  std::vector<std::size_t> test;   ///< ascending row indices
};

/// Seeded train/test partition. A positive test fraction always leaves at
/// least one test row and one training row.
inline Split split_rows(std::size_t n, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) throw std::domain_error("test fraction must be in [0, 1)");
  std::size_t n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
  if (test_fraction > 0.0) n_test = std::max<std::size_t>(n_test, 1);
  if (n_test >= n) throw std::domain_error("split leaves no training rows");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Engine eng = make_engine(seed, 0x73706C74ull);
  std::shuffle(perm.begin(), perm.end(), eng);
  Split s;
  s.test.assign(perm.end() - static_cast<std::ptrdiff_t>(n_test), perm.end());
  s.train.assign(perm.begin(), perm.end() - static_cast<std::ptrdiff_t>(n_test));
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

struct SyntheticOptions {
  std::size_t rows = 200;
  std::size_t numeric_features = 2;
  double label_noise = 0.0;
  std::uint64_t seed = 0;
};

/// Gaussian numeric columns x0..x{k-1} plus a three-level categoric column
/// "group"; label = [w . x + offset(group) > 0] for a seeded planted w, then
/// label noise. With zero noise the classes are linearly separable.
inline RawDataset synthetic_dataset(const SyntheticOptions& opt) {
  if (opt.rows == 0) throw std::domain_error("synthetic dataset needs at least one row");
  if (opt.numeric_features == 0) throw std::domain_error("synthetic dataset needs a numeric feature");
  RawDataset ds;
  ds.schema.label_column = "label";
  ds.schema.numeric_columns.clear();
  for (std::size_t k = 0; k < opt.numeric_features; ++k) ds.schema.numeric_columns.push_back("x" + std::to_string(k));
  ds.schema.categoric_columns = {"group"};

  Engine rule_eng = make_engine(opt.seed, 0x72756C65ull);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> w(opt.numeric_features);
  for (auto& v : w) v = gauss(rule_eng);
  const std::map<std::string, double> offsets{{"a", -0.5}, {"b", 0.0}, {"c", 0.5}};
  const std::string levels[] = {"a", "b", "c"};

  Engine eng = make_engine(opt.seed, 0x726F7773ull);
  std::uniform_int_distribution<int> pick(0, 2);
  for (std::size_t r = 0; r < opt.rows; ++r) {
    std::vector<double> x(opt.numeric_features);
    double score = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      x[k] = gauss(eng);
      score += w[k] * x[k];
    }
    const std::string& g = levels[pick(eng)];
    score += offsets.at(g);
    ds.labels.push_back(score > 0.0 ? 1 : 0);
    ds.numeric.push_back(std::move(x));
    ds.categoric.push_back({g});
  }
  apply_label_noise(ds, opt.label_noise, opt.seed);
  return ds;
}

inline void write_csv(std::ostream& out, const RawDataset& ds) {
  out << ds.schema.label_column;
  for (const auto& c : ds.schema.numeric_columns) out << ',' << c;
  for (const auto& c : ds.schema.categoric_columns) out << ',' << c;
  out << '\n';
  char buf[64];
  for (std::size_t r = 0; r < ds.size(); ++r) {
    out << ds.labels[r];
    for (double v : ds.numeric[r]) {
      const auto res = std::to_chars(buf, buf + sizeof buf, v);
      out << ',' << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf));
    }
    for (const auto& c : ds.categoric[r]) out << ',' << c;
    out << '\n';
  }
}

#ifdef LOSSLAB_DATA_DIR
inline constexpr const char* kBundledDataDir = LOSSLAB_DATA_DIR;
#else
inline constexpr const char* kBundledDataDir = "data";
#endif

/// Path of the bundled three-feature sample (one numeric, two categoric).
/// LOSSLAB_DATA_DIR in the environment overrides the compiled-in location.
inline std::string bundled_sample_path() {
  if (const char* env = std::getenv("LOSSLAB_DATA_DIR"); env && *env) return std::string(env) + "/titanic_sample.csv";
  return std::string(kBundledDataDir) + "/titanic_sample.csv";
}

inline RawDataset load_bundled_sample() { return load_csv(bundled_sample_path(), Schema{}); }

}  // namespace losslab::data
