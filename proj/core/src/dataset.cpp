#include "harsanyi/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <set>

#include "harsanyi/errors.hpp"
#include "harsanyi/rng.hpp"

namespace harsanyi {
namespace {

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(trim(field));
      field.clear();
    } else {
      field += c;
    }
  }
  out.push_back(trim(field));
  return out;
}

bool is_missing(const std::string& s) { return s.empty() || s == "?" || s == "NA"; }

std::optional<double> parse_number(const std::string& s) {
  double v = 0.0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  if (!s.empty() && *begin == '+') ++begin;
  const auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc{} || res.ptr != end || !std::isfinite(v)) return std::nullopt;
  return v;
}

// Numeric labels sort by value, anything else lexicographically.
std::vector<std::string> sorted_labels(const std::set<std::string>& raw) {
  std::vector<std::string> out(raw.begin(), raw.end());
  const bool numeric = std::all_of(out.begin(), out.end(),
                                   [](const std::string& s) { return parse_number(s).has_value(); });
  if (numeric) {
    std::stable_sort(out.begin(), out.end(), [](const std::string& a, const std::string& b) {
      return *parse_number(a) < *parse_number(b);
    });
  }
  return out;
}

}  // namespace

int Preprocessing::model_columns() const {
  int total = 0;
  for (const auto& c : columns) total += c.categorical ? static_cast<int>(c.levels.size()) : 1;
  return total;
}

std::vector<int> Preprocessing::player_of_column() const {
  std::vector<int> out;
  for (std::size_t p = 0; p < columns.size(); ++p) {
    const int width = columns[p].categorical ? static_cast<int>(columns[p].levels.size()) : 1;
    out.insert(out.end(), width, static_cast<int>(p));
  }
  return out;
}

std::vector<std::string> Preprocessing::column_names() const {
  std::vector<std::string> out;
  for (const auto& c : columns) {
    if (!c.categorical) {
      out.push_back(c.name);
      continue;
    }
    for (const auto& level : c.levels) out.push_back(c.name + "=" + level);
  }
  return out;
}

std::vector<double> Dataset::raw_value(int r, int player) const {
  const auto& spec = preprocessing.columns.at(player);
  const auto owners = preprocessing.player_of_column();
  const auto first = std::find(owners.begin(), owners.end(), player) - owners.begin();
  const auto values = row(r);
  if (spec.categorical) {
    return {values.begin() + first, values.begin() + first + spec.levels.size()};
  }
  return {values[first] * spec.sd + spec.mean};
}

Dataset parse_csv_dataset(std::istream& in, const CsvOptions& options,
                          const Preprocessing* fixed) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("csv: empty input");
  if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
  const auto header = split_csv_line(line);
  const std::string label_name = fixed ? fixed->label_column : options.label_column;
  const auto label_it = std::find(header.begin(), header.end(), label_name);
  if (label_it == header.end()) {
    throw FormatError("csv: label column '" + label_name + "' not found in header");
  }
  const int label_col = static_cast<int>(label_it - header.begin());

  std::vector<std::vector<std::string>> rows;
  int rejected = 0;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw FormatError("csv: line " + std::to_string(line_no) + " has " +
                        std::to_string(fields.size()) + " fields, header has " +
                        std::to_string(header.size()));
    }
    if (std::any_of(fields.begin(), fields.end(), is_missing)) {
      ++rejected;
      continue;
    }
    rows.push_back(std::move(fields));
  }

  Dataset data;
  data.rejected_rows = rejected;
  if (rejected > 0) {
    data.warnings.push_back("rejected " + std::to_string(rejected) + " rows with missing values");
  }

  // Raw column index of each player, in header order.
  std::vector<int> raw_index;
  Preprocessing prep;
  if (fixed) {
    prep = *fixed;
    for (const auto& spec : prep.columns) {
      const auto it = std::find(header.begin(), header.end(), spec.name);
      if (it == header.end()) throw FormatError("csv: column '" + spec.name + "' missing");
      raw_index.push_back(static_cast<int>(it - header.begin()));
    }
  } else {
    prep.label_column = label_name;
    std::set<std::string> labels;
    for (const auto& r : rows) labels.insert(r[label_col]);
    prep.label_names = sorted_labels(labels);
    for (int c = 0; c < static_cast<int>(header.size()); ++c) {
      if (c == label_col) continue;
      ColumnSpec spec;
      spec.name = header[c];
      spec.categorical = std::find(options.categorical_columns.begin(),
                                   options.categorical_columns.end(),
                                   header[c]) != options.categorical_columns.end();
      if (spec.categorical) {
        std::set<std::string> levels;
        for (const auto& r : rows) levels.insert(r[c]);
        spec.levels.assign(levels.begin(), levels.end());
      } else {
        double sum = 0.0;
        for (std::size_t k = 0; k < rows.size(); ++k) {
          const auto v = parse_number(rows[k][c]);
          if (!v) {
            throw FormatError("csv: column '" + spec.name + "' has non-numeric value '" +
                              rows[k][c] + "'; register it as categorical");
          }
          sum += *v;
        }
        if (options.normalize && !rows.empty()) {
          spec.mean = sum / static_cast<double>(rows.size());
          double sq = 0.0;
          for (const auto& r : rows) {
            const double d = *parse_number(r[c]) - spec.mean;
            sq += d * d;
          }
          spec.sd = std::sqrt(sq / static_cast<double>(rows.size()));
          if (spec.sd == 0.0) {
            data.warnings.push_back("column '" + spec.name +
                                    "' is constant; mapped to all zeros");
          }
        }
      }
      prep.columns.push_back(std::move(spec));
      raw_index.push_back(c);
    }
  }

  std::map<std::string, int> label_slot;
  for (std::size_t k = 0; k < prep.label_names.size(); ++k) {
    label_slot[prep.label_names[k]] = static_cast<int>(k);
  }
  data.cols = prep.model_columns();
  for (const auto& r : rows) {
    const auto label = label_slot.find(r[label_col]);
    if (label == label_slot.end()) {
      ++data.rejected_rows;
      continue;
    }
    std::vector<double> values;
    values.reserve(data.cols);
    bool ok = true;
    for (std::size_t p = 0; p < prep.columns.size() && ok; ++p) {
      const auto& spec = prep.columns[p];
      const auto& raw = r[raw_index[p]];
      if (spec.categorical) {
        for (const auto& level : spec.levels) values.push_back(level == raw ? 1.0 : 0.0);
        continue;
      }
      const auto v = parse_number(raw);
      if (!v) {
        throw FormatError("csv: column '" + spec.name + "' has non-numeric value '" + raw + "'");
      }
      values.push_back(spec.sd == 0.0 ? 0.0 : (*v - spec.mean) / spec.sd);
    }
    data.features.insert(data.features.end(), values.begin(), values.end());
    data.labels.push_back(label->second);
    ++data.rows;
  }
  if (data.rejected_rows > rejected) {
    data.warnings.push_back("rejected " + std::to_string(data.rejected_rows - rejected) +
                            " rows with unknown labels");
  }
  data.preprocessing = std::move(prep);
  return data;
}

Dataset load_csv_dataset(const std::string& path, const CsvOptions& options,
                         const Preprocessing* fixed) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open dataset '" + path + "'");
  return parse_csv_dataset(in, options, fixed);
}

Dataset select_rows(const Dataset& data, std::span<const int> indices) {
  Dataset out;
  out.cols = data.cols;
  out.preprocessing = data.preprocessing;
  out.features.reserve(indices.size() * static_cast<std::size_t>(data.cols));
  for (int r : indices) {
    if (r < 0 || r >= data.rows) throw ContractError("row index out of range");
    const auto values = data.row(r);
    out.features.insert(out.features.end(), values.begin(), values.end());
    out.labels.push_back(data.labels[r]);
    ++out.rows;
  }
  return out;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& data, double holdout,
                                          std::uint64_t seed) {
  if (holdout < 0.0 || holdout >= 1.0) throw ContractError("holdout must be in [0, 1)");
  std::vector<int> order(data.rows);
  std::iota(order.begin(), order.end(), 0);
  auto rng = make_rng(seed, Stream::kIngestion);
  std::shuffle(order.begin(), order.end(), rng);
  const int held = static_cast<int>(std::floor(holdout * data.rows));
  std::vector<int> keep(order.begin() + held, order.end());
  std::vector<int> rest(order.begin(), order.begin() + held);
  std::sort(keep.begin(), keep.end());
  std::sort(rest.begin(), rest.end());
  return {select_rows(data, keep), select_rows(data, rest)};
}

}  // namespace harsanyi
