#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace harsanyi {

// How one raw CSV column was turned into model columns.
struct ColumnSpec {
  std::string name;
  bool categorical = false;
  double mean = 0.0;  // numeric only
  double sd = 1.0;    // numeric only; 0 marks a constant column
  std::vector<std::string> levels;  // categorical only, one model column each
};

// Everything needed to map raw rows to model inputs identically at training
// and explanation time.
struct Preprocessing {
  std::string label_column;
  std::vector<std::string> label_names;
  std::vector<ColumnSpec> columns;

  int players() const { return static_cast<int>(columns.size()); }
  int model_columns() const;
  std::vector<int> player_of_column() const;
  std::vector<std::string> column_names() const;
};

// Feature matrix after ingestion. Numeric columns are z-scored so the
// all-zero row is the dataset mean and b = 0 is the mean baseline;
// categorical columns are one-hot groups that form a single player.
struct Dataset {
  int rows = 0;
  int cols = 0;
  std::vector<double> features;  // rows x cols, row-major
  std::vector<int> labels;
  Preprocessing preprocessing;
  std::vector<std::string> warnings;
  int rejected_rows = 0;

  int players() const { return preprocessing.players(); }
  int class_count() const { return static_cast<int>(preprocessing.label_names.size()); }
  std::span<const double> row(int r) const {
    return {features.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)};
  }
  std::vector<double> raw_value(int r, int player) const;
};

struct CsvOptions {
  std::string label_column = "label";
  // Columns to one-hot encode. Any other non-numeric column is an error.
  std::vector<std::string> categorical_columns;
  // Skip z-scoring (images and already-normalized data).
  bool normalize = true;
};

// Reads a UTF-8 CSV with a header row. Rows with missing fields are dropped
// and counted. With `fixed`, the given record is applied instead of fitting
// means, deviations and category levels.
Dataset load_csv_dataset(const std::string& path, const CsvOptions& options,
                         const Preprocessing* fixed = nullptr);
Dataset parse_csv_dataset(std::istream& in, const CsvOptions& options,
                          const Preprocessing* fixed = nullptr);

Dataset select_rows(const Dataset& data, std::span<const int> indices);

// Seeded shuffle then split; the first part keeps 1 - holdout of the rows.
std::pair<Dataset, Dataset> split_dataset(const Dataset& data, double holdout,
                                          std::uint64_t seed);

}  // namespace harsanyi
