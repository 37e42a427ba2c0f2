#pragma once

// Experiment records and their on-disk form.
//
// A record exports as up to three files sharing the stem
// <kind>[_<label>]_seed<seed>:
//   .csv       the results table, doubles in shortest round-trip form
//   .meta.txt  [record] and [summary] sections followed by the full config echo
//   .svg       a chart of the table
// The .meta.txt file is itself a valid config file.

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "losslab/dataset.hpp"
#include "losslab/lab/config.hpp"

#ifndef LOSSLAB_VERSION
#define LOSSLAB_VERSION "0.0.0"
#endif
#ifndef LOSSLAB_GIT_DESCRIBE
#define LOSSLAB_GIT_DESCRIBE "unknown"
#endif

namespace losslab::lab {

inline std::string version_string() { return std::string("losslab ") + LOSSLAB_VERSION + " (" + LOSSLAB_GIT_DESCRIBE + ")"; }

enum class RecordKind { histogram, capacity_sweep, epoch_sweep, fidelity_sweep, sphere_curve, tendril };

inline std::string_view to_string(RecordKind k) {
  switch (k) {
    case RecordKind::histogram: return "histogram";
    case RecordKind::capacity_sweep: return "capacity_sweep";
    case RecordKind::epoch_sweep: return "epoch_sweep";
    case RecordKind::fidelity_sweep: return "fidelity_sweep";
    case RecordKind::sphere_curve: return "sphere_curve";
    case RecordKind::tendril: return "tendril";
  }
  return "?";
}

inline RecordKind parse_record_kind(std::string_view s) {
  for (auto k : {RecordKind::histogram, RecordKind::capacity_sweep, RecordKind::epoch_sweep, RecordKind::fidelity_sweep,
                 RecordKind::sphere_curve, RecordKind::tendril})
    if (to_string(k) == s) return k;
  throw std::domain_error("unknown record kind '" + std::string(s) + "'");
}

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::size_t column(std::string_view name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return i;
    throw std::domain_error("no column '" + std::string(name) + "'");
  }

  std::vector<double> values(std::string_view name) const {
    const auto c = column(name);
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r[c]);
    return out;
  }
};

/// NaN compares equal to NaN; everything else bitwise by value.
inline bool same_values(const Table& a, const Table& b) {
  if (a.columns != b.columns || a.rows.size() != b.rows.size()) return false;
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    if (a.rows[i].size() != b.rows[i].size()) return false;
    for (std::size_t j = 0; j < a.rows[i].size(); ++j) {
      const double x = a.rows[i][j], y = b.rows[i][j];
      if (!(x == y || (std::isnan(x) && std::isnan(y)))) return false;
    }
  }
  return true;
}

struct ExperimentRecord {
  RecordKind kind = RecordKind::histogram;
  std::string label;  ///< distinguishes records of one kind and seed; [a-z0-9_.-]
  ExperimentConfig config;
  Table results;
  std::map<std::string, std::string> summary;  ///< scalar outcomes, e.g. mode masses
  std::vector<std::string> plot_columns;       ///< y series for the chart; empty plots all but the first
  std::uint64_t seed = 0;
  std::string timestamp;
  std::string version = version_string();

  friend bool operator==(const ExperimentRecord& a, const ExperimentRecord& b) {
    return a.kind == b.kind && a.label == b.label && a.config == b.config && same_values(a.results, b.results) &&
           a.summary == b.summary && a.plot_columns == b.plot_columns && a.seed == b.seed &&
           a.timestamp == b.timestamp && a.version == b.version;
  }
};

/// UTC now, or SOURCE_DATE_EPOCH when set, as YYYY-MM-DDTHH:MM:SSZ.
inline std::string utc_timestamp() {
  std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  if (const char* fixed = std::getenv("SOURCE_DATE_EPOCH")) {
    long long v = 0;
    const std::string_view s(fixed);
    if (std::from_chars(s.data(), s.data() + s.size(), v).ec == std::errc{}) t = static_cast<std::time_t>(v);
  }
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline ExperimentRecord make_record(RecordKind kind, std::string label, const ExperimentConfig& cfg) {
  ExperimentRecord r;
  r.kind = kind;
  r.label = std::move(label);
  r.config = cfg;
  r.seed = cfg.run.seed;
  r.timestamp = utc_timestamp();
  return r;
}

inline std::string record_stem(const ExperimentRecord& r) {
  std::string stem(to_string(r.kind));
  if (!r.label.empty()) stem += "_" + r.label;
  return stem + "_seed" + std::to_string(r.seed);
}

inline std::string table_csv(const Table& t) {
  std::string out;
  for (std::size_t i = 0; i < t.columns.size(); ++i) out += (i ? "," : "") + t.columns[i];
  out += '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + detail::format_double(row[i]);
    out += '\n';
  }
  return out;
}

inline Table parse_table_csv(std::istream& in, const std::string& where) {
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw data::IoError(where + ": empty results file");
  t.columns = detail::split_list(line);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_list(line);
    if (cells.size() != t.columns.size())
      throw std::domain_error(where + ":" + std::to_string(line_no) + ": expected " +
                              std::to_string(t.columns.size()) + " fields");
    std::vector<double> row;
    for (const auto& c : cells) {
      try {
        row.push_back(detail::parse_real(c));
      } catch (const std::invalid_argument& e) {
        throw std::domain_error(where + ":" + std::to_string(line_no) + ": " + e.what());
      }
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline std::string one_line(std::string s) {
  for (auto& c : s)
    if (c == '\n' || c == '\r') c = ' ';
  return s;
}

inline std::string meta_text(const ExperimentRecord& r) {
  std::string out = "[record]\n";
  out += "kind = " + std::string(to_string(r.kind)) + "\n";
  out += "label = " + r.label + "\n";
  out += "seed = " + std::to_string(r.seed) + "\n";
  out += "timestamp = " + r.timestamp + "\n";
  out += "version = " + r.version + "\n";
  out += "plot = " + detail::join(r.plot_columns) + "\n";
  out += "\n[summary]\n";
  for (const auto& [k, v] : r.summary) out += k + " = " + one_line(v) + "\n";
  out += "\n" + to_text(r.config);
  return out;
}

inline ExperimentRecord parse_meta(const std::string& text, Table results) {
  ExperimentRecord r;
  r.results = std::move(results);
  r.config = parse_config(text);
  std::istringstream in(text);
  std::string line, section;
  while (std::getline(in, line)) {
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t[0] == '[') {
      section = t.substr(1, t.find(']') - 1);
      continue;
    }
    const auto eq = t.find('=');
    const std::string key = detail::trim(std::string_view(t).substr(0, eq));
    const std::string value = detail::trim(std::string_view(t).substr(eq + 1));
    if (section == "summary") {
      r.summary[key] = value;
    } else if (section == "record") {
      if (key == "kind") r.kind = parse_record_kind(value);
      else if (key == "label") r.label = value;
      else if (key == "seed") r.seed = detail::parse_unsigned<std::uint64_t>(value);
      else if (key == "timestamp") r.timestamp = value;
      else if (key == "version") r.version = value;
      else if (key == "plot") r.plot_columns = detail::split_list(value);
      else throw std::domain_error("unknown record key '" + key + "'");
    }
  }
  return r;
}

enum class Format { csv, svg, both };

inline Format parse_format(std::string_view s) {
  if (s == "csv") return Format::csv;
  if (s == "svg") return Format::svg;
  if (s == "both") return Format::both;
  throw std::domain_error("unknown format '" + std::string(s) + "' (csv, svg, both)");
}

inline std::string render_svg(const ExperimentRecord& r);  // svg.hpp

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data::IoError("cannot write '" + path.string() + "'");
  out << text;
  out.close();
  if (!out) throw data::IoError("cannot write '" + path.string() + "'");
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data::IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes the record into `dir` (created if missing); returns the paths written.
/// The metadata file is always written.
inline std::vector<std::filesystem::path> export_record(const ExperimentRecord& r, const std::filesystem::path& dir,
                                                        Format format = Format::both) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir))
    throw data::IoError("cannot create output directory '" + dir.string() + "'");
  const std::string stem = record_stem(r);
  std::vector<std::filesystem::path> written;
  if (format != Format::svg) {
    written.push_back(dir / (stem + ".csv"));
    write_file(written.back(), table_csv(r.results));
  }
  written.push_back(dir / (stem + ".meta.txt"));
  write_file(written.back(), meta_text(r));
  if (format != Format::csv) {
    written.push_back(dir / (stem + ".svg"));
    write_file(written.back(), render_svg(r));
  }
  return written;
}

/// Reads a record back from its .csv path (the .meta.txt is found alongside).
inline ExperimentRecord import_record(const std::filesystem::path& csv_path) {
  std::ifstream in(csv_path, std::ios::binary);
  if (!in) throw data::IoError("cannot open '" + csv_path.string() + "'");
  Table t = parse_table_csv(in, csv_path.string());
  std::filesystem::path meta = csv_path;
  meta.replace_extension(".meta.txt");
  return parse_meta(read_file(meta), std::move(t));
}

}  // namespace losslab::lab

#include "losslab/lab/svg.hpp"
