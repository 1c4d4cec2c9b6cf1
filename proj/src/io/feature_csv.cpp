// SPDX-License-Identifier: Apache-2.0
#include "uad/io/feature_csv.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <set>

#include "uad/net/ingest.hpp"

namespace uad {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

bool is_label_column(const std::string& name) { return lower(trim(name)) == "label"; }

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = line.find(',', pos);
    if (comma == std::string::npos) {
      out.push_back(line.substr(pos));
      return out;
    }
    out.push_back(line.substr(pos, comma - pos));
    pos = comma + 1;
  }
}

// Shortest representation that parses back to the same double.
std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// Empty and the CIC conventions for undefined values count as masked.
bool parse_cell(const std::string& raw, double& value) {
  const std::string cell = trim(raw);
  if (cell.empty()) return false;
  const std::string low = lower(cell);
  if (low == "nan" || low == "inf" || low == "infinity" || low == "-inf" || low == "-infinity")
    return false;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  const auto res = std::from_chars(begin, end, value);
  if (res.ec != std::errc{} || res.ptr != end)
    throw FormatError("cell '" + cell + "' is not a number");
  if (!std::isfinite(value)) return false;
  return true;
}

void append_row(std::string& out, const std::vector<double>& values,
                const std::vector<bool>* mask, const std::string* label, bool labeled) {
  for (std::size_t j = 0; j < values.size(); ++j) {
    if (j) out += ',';
    if (!mask || !(*mask)[j]) out += format_double(values[j]);
  }
  if (labeled) {
    out += ',';
    out += *label;
  }
  out += '\n';
}

}  // namespace

std::string feature_csv_text(const std::vector<StatFeatureVector>& features,
                             const std::vector<std::string>& labels) {
  const bool labeled = !labels.empty();
  if (labeled && labels.size() != features.size())
    throw UsageError("feature csv: " + std::to_string(features.size()) + " rows but " +
                     std::to_string(labels.size()) + " labels");
  std::string out;
  const auto& names = stat_feature_names();
  for (std::size_t j = 0; j < names.size(); ++j) {
    if (j) out += ',';
    out += names[j];
  }
  if (labeled) out += ",Label";
  out += '\n';
  std::vector<double> row(kStatFeatureCount);
  std::vector<bool> mask(kStatFeatureCount);
  for (std::size_t i = 0; i < features.size(); ++i) {
    std::copy(features[i].values.begin(), features[i].values.end(), row.begin());
    std::copy(features[i].missing.begin(), features[i].missing.end(), mask.begin());
    append_row(out, row, &mask, labeled ? &labels[i] : nullptr, labeled);
  }
  return out;
}

void write_feature_csv(const std::string& path, const std::vector<StatFeatureVector>& features,
                       const std::vector<std::string>& labels) {
  write_file_text(path, feature_csv_text(features, labels));
}

std::string selected_csv_text(const std::vector<std::vector<double>>& rows,
                              const std::vector<int>& selection,
                              const std::vector<std::string>& labels) {
  const bool labeled = !labels.empty();
  if (labeled && labels.size() != rows.size())
    throw UsageError("feature csv: " + std::to_string(rows.size()) + " rows but " +
                     std::to_string(labels.size()) + " labels");
  const auto& names = stat_feature_names();
  std::string out;
  for (std::size_t j = 0; j < selection.size(); ++j) {
    const int idx = selection[j];
    if (idx < 0 || idx >= kStatFeatureCount)
      throw UsageError("feature csv: selection index " + std::to_string(idx) + " out of range");
    if (j) out += ',';
    out += names[idx];
  }
  if (labeled) out += ",Label";
  out += '\n';
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != selection.size())
      throw UsageError("feature csv: row " + std::to_string(i) + " has " +
                       std::to_string(rows[i].size()) + " values, selection has " +
                       std::to_string(selection.size()));
    append_row(out, rows[i], nullptr, labeled ? &labels[i] : nullptr, labeled);
  }
  return out;
}

void write_selected_csv(const std::string& path, const std::vector<std::vector<double>>& rows,
                        const std::vector<int>& selection,
                        const std::vector<std::string>& labels) {
  write_file_text(path, selected_csv_text(rows, selection, labels));
}

FeatureTable parse_feature_csv(const std::string& text, const std::string& origin) {
  FeatureTable table;
  std::size_t pos = 0;
  int line_no = 0;
  bool saw_header = false;
  bool labeled = false;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    std::vector<std::string> cells = split_csv(line);
    if (!saw_header) {
      labeled = is_label_column(cells.back());
      if (labeled) cells.pop_back();
      if (cells.empty())
        throw FormatError(origin + ":1: header row has no feature columns");
      for (auto& c : cells) table.columns.push_back(trim(c));
      saw_header = true;
      continue;
    }
    const std::size_t want = table.columns.size() + (labeled ? 1 : 0);
    if (cells.size() != want)
      throw FormatError(origin + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(want) + " cells, got " + std::to_string(cells.size()));
    if (labeled) {
      table.labels.push_back(trim(cells.back()));
      cells.pop_back();
    }
    std::vector<double> row(cells.size(), 0.0);
    std::vector<bool> mask(cells.size(), false);
    for (std::size_t j = 0; j < cells.size(); ++j) {
      try {
        mask[j] = !parse_cell(cells[j], row[j]);
        if (mask[j]) row[j] = 0.0;
      } catch (const FormatError& e) {
        throw FormatError(origin + ":" + std::to_string(line_no) + ": column '" +
                          table.columns[j] + "': " + e.what());
      }
    }
    table.rows.push_back(std::move(row));
    table.missing.push_back(std::move(mask));
  }
  if (!saw_header) throw FormatError(origin + ":1: missing header row");
  return table;
}

FeatureTable read_feature_csv(const std::string& path) {
  return parse_feature_csv(read_file_text(path), path);
}

std::vector<StatFeatureVector> table_to_stat_features(const FeatureTable& table) {
  const auto& names = stat_feature_names();
  if (table.columns.size() != names.size())
    throw DataError("feature table has " + std::to_string(table.columns.size()) +
                    " columns, the canonical layout has " + std::to_string(names.size()));
  for (std::size_t j = 0; j < names.size(); ++j)
    if (table.columns[j] != names[j])
      throw DataError("feature table column " + std::to_string(j) + " is '" + table.columns[j] +
                      "', expected '" + names[j] + "'");
  std::vector<StatFeatureVector> out(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i)
    for (std::size_t j = 0; j < names.size(); ++j) {
      out[i].values[j] = table.rows[i][j];
      out[i].missing[j] = table.missing[i][j];
    }
  return out;
}

std::string embedding_csv_text(const std::vector<LatentVector>& latents) {
  std::string out = "flow_id";
  for (int k = 1; k <= kLatentDim; ++k) out += ",z" + std::to_string(k);
  out += '\n';
  for (std::size_t i = 0; i < latents.size(); ++i) {
    out += std::to_string(i);
    for (double v : latents[i].z) {
      out += ',';
      out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

ImportedDataset import_labeled_table(const FeatureTable& table, const std::string& normal_label) {
  if (table.labels.empty())
    throw DataError("import: the feature table has no label column");
  const std::string normal_key = lower(trim(normal_label));
  std::set<std::string> anomaly_names;
  for (const auto& l : table.labels)
    if (lower(l) != normal_key) anomaly_names.insert(l);

  ImportedDataset out;
  std::map<std::string, int> ids;
  int next = 1;
  for (const auto& name : anomaly_names) {  // std::set iterates sorted
    ids[name] = next;
    out.class_names[next] = name;
    ++next;
  }
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    if (lower(table.labels[i]) == normal_key)
      out.dataset.normal.push_back(table.rows[i]);
    else
      out.dataset.anomalies[ids.at(table.labels[i])].push_back(table.rows[i]);
  }
  if (out.dataset.normal.empty())
    throw DataError("import: no rows labeled '" + normal_label + "'");
  if (out.dataset.anomalies.empty())
    throw DataError("import: no anomaly classes besides '" + normal_label + "'");
  return out;
}

}  // namespace uad
