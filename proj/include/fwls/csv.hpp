#ifndef FWLS_CSV_HPP
#define FWLS_CSV_HPP

// Text interchange formats.
//
// Stacked dataset:  id,y,g:<model>...,f:<feature>...
// Single column:    id,g:<model>   or   id,f:<feature>   (for extensions)
// Coefficients:     model,feature,v_ij   (one row per product column, in
//                   canonical order)
//
// Fields are separated by commas and not quoted. Numbers are decimal floats;
// NaN and infinities are rejected.

#include <fmt/core.h>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "fwls/core.hpp"

namespace fwls::csv {

inline std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

inline double parse_number(std::string_view cell, std::size_t line, std::size_t column) {
  cell = trim(cell);
  if (cell.empty()) throw ParseError("line " + std::to_string(line) + ", column " +
                                     std::to_string(column) + ": missing value",
                                     line, column);
  if (cell.front() == '+') cell.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || ptr != cell.data() + cell.size())
    throw ParseError("line " + std::to_string(line) + ", column " +
                         std::to_string(column) + ": '" + std::string(cell) +
                         "' is not a number",
                     line, column);
  if (!std::isfinite(v))
    throw ParseError("line " + std::to_string(line) + ", column " +
                         std::to_string(column) + ": non-finite value",
                     line, column);
  return v;
}

/// Full-precision decimal rendering, round-trips through parse_number.
inline std::string format_number(double v) { return fmt::format("{:.17g}", v); }

struct ReadOptions {
  bool add_f0 = true;   // prepend the constant meta-feature "const"
  bool add_g0 = false;  // prepend the constant model "const"
};

inline StackedDataset read_stacked(std::istream& in, const ReadOptions& opt = {}) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("stacked csv: empty input", 1);
  const auto header = split(line);
  if (header.size() < 2 || trim(header[0]) != "id" || trim(header[1]) != "y")
    throw ParseError("stacked csv: header must start with 'id,y'", 1);
  std::vector<std::size_t> g_cols, f_cols;
  std::vector<std::string> model_names, feature_names;
  if (opt.add_g0) model_names.emplace_back("const");
  if (opt.add_f0) feature_names.emplace_back("const");
  for (std::size_t c = 2; c < header.size(); ++c) {
    const auto h = trim(header[c]);
    if (h.starts_with("g:") && h.size() > 2) {
      g_cols.push_back(c);
      model_names.emplace_back(h.substr(2));
    } else if (h.starts_with("f:") && h.size() > 2) {
      f_cols.push_back(c);
      feature_names.emplace_back(h.substr(2));
    } else {
      throw ParseError("stacked csv: column " + std::to_string(c + 1) + " ('" +
                           std::string(h) + "') needs a g: or f: prefix",
                       1, c + 1);
    }
  }
  const std::size_t L = model_names.size();
  const std::size_t M = feature_names.size();
  if (g_cols.empty()) throw ParseError("stacked csv: no g: model columns", 1);
  if (M == 0) throw ParseError("stacked csv: no f: meta-feature columns and no f0", 1);

  std::vector<double> y, p, fm;
  std::vector<std::string> ids;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size())
      throw ParseError("line " + std::to_string(line_no) + ": expected " +
                           std::to_string(header.size()) + " fields, found " +
                           std::to_string(cells.size()),
                       line_no);
    ids.emplace_back(trim(cells[0]));
    y.push_back(parse_number(cells[1], line_no, 2));
    if (opt.add_g0) p.push_back(1.0);
    for (std::size_t c : g_cols) p.push_back(parse_number(cells[c], line_no, c + 1));
    if (opt.add_f0) fm.push_back(1.0);
    for (std::size_t c : f_cols) fm.push_back(parse_number(cells[c], line_no, c + 1));
  }
  if (y.empty()) throw ParseError("stacked csv: no data rows", line_no);
  return {std::move(y), std::move(p), std::move(fm), L, M,
          std::move(model_names), std::move(feature_names), std::move(ids)};
}

inline std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return in;
}

inline StackedDataset read_stacked(const std::filesystem::path& path,
                                   const ReadOptions& opt = {}) {
  auto in = open_input(path);
  return read_stacked(in, opt);
}

inline void write_stacked(std::ostream& out, const StackedDataset& ds) {
  out << "id,y";
  for (const auto& n : ds.model_names()) out << ",g:" << n;
  for (const auto& n : ds.feature_names()) out << ",f:" << n;
  out << '\n';
  for (std::size_t r = 0; r < ds.n_rows(); ++r) {
    out << (ds.has_ids() ? ds.row_ids()[r] : std::to_string(r)) << ','
        << format_number(ds.y(r));
    for (double v : ds.g(r)) out << ',' << format_number(v);
    for (double v : ds.f(r)) out << ',' << format_number(v);
    out << '\n';
  }
}

/// One extra model or meta-feature column, keyed by row id.
struct ColumnFile {
  enum class Kind { Model, Feature } kind = Kind::Model;
  std::string name;
  std::vector<std::string> ids;
  std::vector<double> values;
};

inline ColumnFile read_column(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("column csv: empty input", 1);
  const auto header = split(line);
  if (header.size() != 2 || trim(header[0]) != "id")
    throw ParseError("column csv: header must be 'id,g:<name>' or 'id,f:<name>'", 1);
  ColumnFile col;
  const auto h = trim(header[1]);
  if (h.starts_with("g:") && h.size() > 2)
    col.kind = ColumnFile::Kind::Model;
  else if (h.starts_with("f:") && h.size() > 2)
    col.kind = ColumnFile::Kind::Feature;
  else
    throw ParseError("column csv: second column needs a g: or f: prefix", 1, 2);
  col.name = std::string(h.substr(2));
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split(line);
    if (cells.size() != 2)
      throw ParseError("line " + std::to_string(line_no) + ": expected 2 fields", line_no);
    col.ids.emplace_back(trim(cells[0]));
    col.values.push_back(parse_number(cells[1], line_no, 2));
  }
  return col;
}

inline ColumnFile read_column(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_column(in);
}

inline void write_coefficients(std::ostream& out, const BlendCoefficients& c,
                               const std::vector<std::string>& model_names,
                               const std::vector<std::string>& feature_names) {
  require(model_names.size() == c.n_models() && feature_names.size() == c.n_features(),
          "write_coefficients: name count mismatch");
  out << "model,feature,v_ij\n";
  for (std::size_t j = 0; j < c.n_features(); ++j)
    for (std::size_t i = 0; i < c.n_models(); ++i)
      out << model_names[i] << ',' << feature_names[j] << ','
          << format_number(c.weight(i, j)) << '\n';
}

/// Coefficients read back by name, for applying to a dataset.
struct NamedCoefficients {
  std::map<std::pair<std::string, std::string>, double> weights;

  /// Lays the weights out for `ds`'s columns. Every dataset (model, feature)
  /// pair must be present.
  BlendCoefficients bind(const StackedDataset& ds) const {
    std::vector<double> v(ds.n_models() * ds.n_features());
    const DesignMapping m = ds.mapping();
    for (std::size_t j = 0; j < ds.n_features(); ++j)
      for (std::size_t i = 0; i < ds.n_models(); ++i) {
        auto it = weights.find({ds.model_names()[i], ds.feature_names()[j]});
        if (it == weights.end())
          throw Error("coefficients: no weight for model '" + ds.model_names()[i] +
                      "' and feature '" + ds.feature_names()[j] + "'");
        v[m.column_index(i, j)] = it->second;
      }
    if (weights.size() != v.size())
      throw Error("coefficients: file has " + std::to_string(weights.size()) +
                  " weights but the dataset has " + std::to_string(v.size()) +
                  " product columns");
    return {m, std::move(v), 0.0};
  }
};

inline NamedCoefficients read_coefficients(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || trim(line) != "model,feature,v_ij")
    throw ParseError("coefficients csv: header must be 'model,feature,v_ij'", 1);
  NamedCoefficients out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split(line);
    if (cells.size() != 3)
      throw ParseError("line " + std::to_string(line_no) + ": expected 3 fields", line_no);
    auto key = std::pair{std::string(trim(cells[0])), std::string(trim(cells[1]))};
    if (!out.weights.emplace(key, parse_number(cells[2], line_no, 3)).second)
      throw ParseError("line " + std::to_string(line_no) + ": duplicate weight", line_no);
  }
  return out;
}

inline NamedCoefficients read_coefficients(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_coefficients(in);
}

/// Standardization parameters: feature,shift,scale.
inline void write_standardizer(std::ostream& out, const Standardizer& s,
                               const std::vector<std::string>& feature_names) {
  out << "feature,shift,scale\n";
  for (std::size_t j = 0; j < s.shift.size(); ++j)
    out << feature_names[j] << ',' << format_number(s.shift[j]) << ','
        << format_number(s.scale[j]) << '\n';
}

inline Standardizer read_standardizer(std::istream& in,
                                      const std::vector<std::string>& feature_names) {
  std::string line;
  if (!std::getline(in, line) || trim(line) != "feature,shift,scale")
    throw ParseError("standardization csv: header must be 'feature,shift,scale'", 1);
  std::map<std::string, std::pair<double, double>> by_name;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split(line);
    if (cells.size() != 3)
      throw ParseError("line " + std::to_string(line_no) + ": expected 3 fields", line_no);
    by_name[std::string(trim(cells[0]))] = {parse_number(cells[1], line_no, 2),
                                            parse_number(cells[2], line_no, 3)};
  }
  Standardizer s;
  for (const auto& name : feature_names) {
    auto it = by_name.find(name);
    if (it == by_name.end())
      throw Error("standardization: no parameters for feature '" + name + "'");
    s.shift.push_back(it->second.first);
    s.scale.push_back(it->second.second);
  }
  return s;
}

}  // namespace fwls::csv

#endif  // FWLS_CSV_HPP
