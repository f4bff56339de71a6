#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace fairpipe {

enum class ColumnKind { Numeric, Categorical };

std::string_view to_string(ColumnKind kind);

/// A typed column with an explicit missing mask. Numeric columns keep their
/// values in `numbers`, categorical ones in `tokens`; the other vector is empty.
/// Masked cells hold a placeholder (0.0 / "") that must never be read.
class Column {
 public:
  static Column numeric(std::string name, std::vector<double> values, std::vector<bool> missing);
  static Column categorical(std::string name, std::vector<std::string> values,
                            std::vector<bool> missing);

  const std::string& name() const { return name_; }
  ColumnKind kind() const { return kind_; }
  bool is_numeric() const { return kind_ == ColumnKind::Numeric; }
  std::size_t size() const { return missing_.size(); }

  bool missing(std::size_t row) const { return missing_[row]; }
  const std::vector<bool>& missing_mask() const { return missing_; }
  std::size_t missing_count() const;

  /// Only valid for unmasked cells of a Numeric column.
  double number(std::size_t row) const { return numbers_[row]; }
  /// Only valid for unmasked cells of a Categorical column.
  const std::string& token(std::size_t row) const { return tokens_[row]; }

  /// Text form of an unmasked cell, as written back to CSV.
  std::string cell_text(std::size_t row) const;

  std::optional<double> numeric_cell(std::size_t row) const;
  std::optional<std::string> token_cell(std::size_t row) const;

  Column take(const std::vector<std::size_t>& rows) const;

  friend bool operator==(const Column&, const Column&);

 private:
  std::string name_;
  ColumnKind kind_ = ColumnKind::Categorical;
  std::vector<double> numbers_;
  std::vector<std::string> tokens_;
  std::vector<bool> missing_;
};

/// Immutable column-typed table.
class Table {
 public:
  Table(std::string name, std::vector<Column> columns);

  const std::string& name() const { return name_; }
  std::size_t n_rows() const { return n_rows_; }
  std::size_t n_cols() const { return columns_.size(); }
  const std::vector<Column>& columns() const { return columns_; }
  const Column& column(std::size_t i) const { return columns_[i]; }
  /// Throws UnknownColumn.
  const Column& column(std::string_view name) const;
  std::optional<std::size_t> index_of(std::string_view name) const;
  bool has_column(std::string_view name) const { return index_of(name).has_value(); }

  Table take(const std::vector<std::size_t>& rows) const;

  friend bool operator==(const Table&, const Table&);

 private:
  std::string name_;
  std::vector<Column> columns_;
  std::size_t n_rows_ = 0;
};

/// Tokens treated as missing (case-insensitive, after trimming).
bool is_missing_token(std::string_view raw);

/// Minimum share of unmasked cells that must parse as finite numbers for a
/// column to be typed Numeric.
inline constexpr double kNumericShare = 0.95;

/// Parses RFC-4180 CSV with a mandatory header row; LF or CRLF line endings.
Table ingest_csv(std::string_view source, std::string name);
Table read_csv_file(const std::string& path);

/// Writes the table back as CSV (LF endings, masked cells empty). Re-ingesting
/// the output yields an identical table.
std::string to_csv(const Table& t);

struct SplitSpec {
  double train_frac = 0.6;
  double val_frac = 0.2;
  double test_frac = 0.2;
  std::uint64_t seed = 42;

  void validate() const;
};

struct SplitResult {
  Table train;
  Table val;
  Table test;
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> val_rows;
  std::vector<std::size_t> test_rows;
};

/// Seeded shuffle then partition. Sizes are floor(frac * n) for val/test,
/// remainder to train. Throws TooFewRows when n < 10.
SplitResult split(const Table& t, const SplitSpec& spec);

/// Deterministic permutation of [0, n) driven by a 64-bit Mersenne twister.
std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed);

/// Distinct unmasked values with counts, sorted by count desc then token asc.
std::vector<std::pair<std::string, std::size_t>> column_distinct(const Table& t,
                                                                 std::string_view col);
std::vector<std::pair<std::string, std::size_t>> column_distinct(const Column& c);

/// Shortest round-trip text for a double.
std::string format_number(double x);

}  // namespace fairpipe
