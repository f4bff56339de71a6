#include "fairpipe/tabular.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <system_error>

#include "fairpipe/error.hpp"
#include "fairpipe/json_util.hpp"

namespace fairpipe {

std::string_view to_string(ColumnKind kind) {
  return kind == ColumnKind::Numeric ? "Numeric" : "Categorical";
}

namespace {

std::string_view trim(std::string_view s) {
  const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::optional<double> parse_finite(std::string_view s) {
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

// One parsed record plus the 1-based line it started on.
struct Record {
  std::vector<std::string> cells;
  std::size_t line = 0;
};

std::vector<Record> parse_records(std::string_view src) {
  std::vector<Record> out;
  Record cur;
  std::string cell;
  bool in_quotes = false;
  bool cell_started = false;
  std::size_t line = 1;
  cur.line = 1;

  auto end_cell = [&] {
    cur.cells.push_back(std::move(cell));
    cell.clear();
    cell_started = false;
  };
  auto end_record = [&] {
    end_cell();
    // A blank line parses as a single empty cell; skip it.
    if (!(cur.cells.size() == 1 && cur.cells[0].empty())) out.push_back(std::move(cur));
    cur = Record{};
    cur.line = line;
  };

  for (std::size_t i = 0; i < src.size(); ++i) {
    char c = src[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < src.size() && src[i + 1] == '"') {
          cell.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        cell.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        in_quotes = true;
        cell_started = true;
        break;
      case ',':
        end_cell();
        break;
      case '\r':
        if (i + 1 < src.size() && src[i + 1] == '\n') ++i;
        ++line;
        end_record();
        break;
      case '\n':
        ++line;
        end_record();
        break;
      default:
        cell.push_back(c);
        cell_started = true;
    }
  }
  if (cell_started || !cell.empty() || !cur.cells.empty()) end_record();
  return out;
}

bool needs_quotes(std::string_view s) {
  return s.find_first_of(",\"\r\n") != std::string_view::npos ||
         (!s.empty() && (s.front() == ' ' || s.back() == ' '));
}

}  // namespace

std::string format_number(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  (void)ec;
  return std::string(buf, ptr);
}

bool is_missing_token(std::string_view raw) {
  auto s = trim(raw);
  if (s.empty()) return true;
  std::string lower(s);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return lower == "?" || lower == "na" || lower == "n/a" || lower == "null";
}

// ---------------------------------------------------------------- Column

Column Column::numeric(std::string name, std::vector<double> values, std::vector<bool> missing) {
  if (values.size() != missing.size())
    throw Error(ErrorCode::InvalidArgument, "mask length differs from values in " + name);
  Column c;
  c.name_ = std::move(name);
  c.kind_ = ColumnKind::Numeric;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (missing[i]) {
      values[i] = 0.0;
    } else if (!std::isfinite(values[i])) {
      throw Error(ErrorCode::InvalidArgument, "non-finite value in numeric column " + c.name_);
    }
  }
  c.numbers_ = std::move(values);
  c.missing_ = std::move(missing);
  return c;
}

Column Column::categorical(std::string name, std::vector<std::string> values,
                           std::vector<bool> missing) {
  if (values.size() != missing.size())
    throw Error(ErrorCode::InvalidArgument, "mask length differs from values in " + name);
  Column c;
  c.name_ = std::move(name);
  c.kind_ = ColumnKind::Categorical;
  for (std::size_t i = 0; i < values.size(); ++i)
    if (missing[i]) values[i].clear();
  c.tokens_ = std::move(values);
  c.missing_ = std::move(missing);
  return c;
}

std::size_t Column::missing_count() const {
  return static_cast<std::size_t>(std::count(missing_.begin(), missing_.end(), true));
}

std::string Column::cell_text(std::size_t row) const {
  if (missing_[row]) return {};
  return is_numeric() ? format_number(numbers_[row]) : tokens_[row];
}

std::optional<double> Column::numeric_cell(std::size_t row) const {
  if (!is_numeric() || missing_[row]) return std::nullopt;
  return numbers_[row];
}

std::optional<std::string> Column::token_cell(std::size_t row) const {
  if (is_numeric() || missing_[row]) return std::nullopt;
  return tokens_[row];
}

Column Column::take(const std::vector<std::size_t>& rows) const {
  std::vector<bool> mask;
  mask.reserve(rows.size());
  for (auto r : rows) mask.push_back(missing_[r]);
  if (is_numeric()) {
    std::vector<double> v;
    v.reserve(rows.size());
    for (auto r : rows) v.push_back(numbers_[r]);
    return numeric(name_, std::move(v), std::move(mask));
  }
  std::vector<std::string> v;
  v.reserve(rows.size());
  for (auto r : rows) v.push_back(tokens_[r]);
  return categorical(name_, std::move(v), std::move(mask));
}

bool operator==(const Column& a, const Column& b) {
  return a.name_ == b.name_ && a.kind_ == b.kind_ && a.numbers_ == b.numbers_ &&
         a.tokens_ == b.tokens_ && a.missing_ == b.missing_;
}

// ---------------------------------------------------------------- Table

Table::Table(std::string name, std::vector<Column> columns)
    : name_(std::move(name)), columns_(std::move(columns)) {
  n_rows_ = columns_.empty() ? 0 : columns_.front().size();
  std::set<std::string_view> seen;
  for (const auto& c : columns_) {
    if (c.name().empty()) throw Error(ErrorCode::InvalidArgument, "empty column name");
    if (!seen.insert(c.name()).second) throw Error(ErrorCode::DuplicateHeader, c.name());
    if (c.size() != n_rows_)
      throw Error(ErrorCode::InvalidArgument, "column " + c.name() + " has wrong length");
  }
}

const Column& Table::column(std::string_view name) const {
  auto idx = index_of(name);
  if (!idx) throw Error(ErrorCode::UnknownColumn, std::string(name));
  return columns_[*idx];
}

std::optional<std::size_t> Table::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < columns_.size(); ++i)
    if (columns_[i].name() == name) return i;
  return std::nullopt;
}

Table Table::take(const std::vector<std::size_t>& rows) const {
  std::vector<Column> cols;
  cols.reserve(columns_.size());
  for (const auto& c : columns_) cols.push_back(c.take(rows));
  return Table(name_, std::move(cols));
}

bool operator==(const Table& a, const Table& b) {
  return a.n_rows_ == b.n_rows_ && a.columns_ == b.columns_;
}

// ---------------------------------------------------------------- CSV

Table ingest_csv(std::string_view source, std::string name) {
  if (source.size() >= 3 && static_cast<unsigned char>(source[0]) == 0xEF &&
      static_cast<unsigned char>(source[1]) == 0xBB && static_cast<unsigned char>(source[2]) == 0xBF)
    source.remove_prefix(3);

  auto records = parse_records(source);
  if (records.empty()) throw Error(ErrorCode::EmptyFile, "no header row");

  std::vector<std::string> header;
  for (auto& h : records.front().cells) header.emplace_back(trim(h));
  {
    std::set<std::string> seen;
    for (const auto& h : header) {
      if (h.empty()) throw Error(ErrorCode::DuplicateHeader, "empty header name");
      if (!seen.insert(h).second) throw Error(ErrorCode::DuplicateHeader, h);
    }
  }

  const std::size_t n_cols = header.size();
  const std::size_t n_rows = records.size() - 1;
  std::vector<std::vector<std::string>> raw(n_cols, std::vector<std::string>(n_rows));
  for (std::size_t r = 0; r < n_rows; ++r) {
    auto& rec = records[r + 1];
    if (rec.cells.size() != n_cols)
      throw Error(ErrorCode::RaggedRow, "row " + std::to_string(r + 1) + " (line " +
                                            std::to_string(rec.line) + ") has " +
                                            std::to_string(rec.cells.size()) + " cells, expected " +
                                            std::to_string(n_cols));
    for (std::size_t c = 0; c < n_cols; ++c) raw[c][r] = std::string(trim(rec.cells[c]));
  }

  std::vector<Column> cols;
  cols.reserve(n_cols);
  for (std::size_t c = 0; c < n_cols; ++c) {
    std::vector<bool> mask(n_rows);
    std::vector<std::optional<double>> parsed(n_rows);
    std::size_t unmasked = 0, numeric = 0;
    for (std::size_t r = 0; r < n_rows; ++r) {
      mask[r] = is_missing_token(raw[c][r]);
      if (mask[r]) continue;
      ++unmasked;
      parsed[r] = parse_finite(raw[c][r]);
      if (parsed[r]) ++numeric;
    }
    const bool is_numeric =
        unmasked > 0 && static_cast<double>(numeric) >= kNumericShare * static_cast<double>(unmasked);
    if (is_numeric) {
      std::vector<double> values(n_rows, 0.0);
      for (std::size_t r = 0; r < n_rows; ++r) {
        if (mask[r]) continue;
        if (parsed[r]) {
          values[r] = *parsed[r];
        } else {
          mask[r] = true;  // stray token in a numeric column
        }
      }
      cols.push_back(Column::numeric(header[c], std::move(values), std::move(mask)));
    } else {
      cols.push_back(Column::categorical(header[c], std::move(raw[c]), std::move(mask)));
    }
  }
  return Table(std::move(name), std::move(cols));
}

Table read_csv_file(const std::string& path) {
  auto text = read_text_file(path);
  auto stem = std::filesystem::path(path).stem().string();
  return ingest_csv(text, stem);
}

std::string to_csv(const Table& t) {
  std::string out;
  auto put = [&](const std::string& s) {
    if (needs_quotes(s)) {
      out.push_back('"');
      for (char c : s) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
      }
      out.push_back('"');
    } else {
      out += s;
    }
  };
  for (std::size_t c = 0; c < t.n_cols(); ++c) {
    if (c) out.push_back(',');
    put(t.column(c).name());
  }
  out.push_back('\n');
  for (std::size_t r = 0; r < t.n_rows(); ++r) {
    for (std::size_t c = 0; c < t.n_cols(); ++c) {
      if (c) out.push_back(',');
      put(t.column(c).cell_text(r));
    }
    out.push_back('\n');
  }
  return out;
}

// ---------------------------------------------------------------- split

void SplitSpec::validate() const {
  for (double f : {train_frac, val_frac, test_frac})
    if (!(f > 0.0) || !std::isfinite(f))
      throw Error(ErrorCode::InvalidArgument, "split fractions must be positive");
  if (std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9)
    throw Error(ErrorCode::InvalidArgument, "split fractions must sum to 1");
}

std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  std::mt19937_64 rng(seed);
  // Fisher-Yates with a plain modulo draw: portable across standard libraries,
  // unlike std::uniform_int_distribution.
  for (std::size_t i = n; i > 1; --i) {
    auto j = static_cast<std::size_t>(rng() % i);
    std::swap(perm[i - 1], perm[j]);
  }
  return perm;
}

SplitResult split(const Table& t, const SplitSpec& spec) {
  spec.validate();
  const std::size_t n = t.n_rows();
  if (n < 10) throw Error(ErrorCode::TooFewRows, std::to_string(n) + " rows, need at least 10");
  const auto n_val = static_cast<std::size_t>(std::floor(spec.val_frac * static_cast<double>(n)));
  const auto n_test = static_cast<std::size_t>(std::floor(spec.test_frac * static_cast<double>(n)));
  const std::size_t n_train = n - n_val - n_test;

  auto perm = seeded_permutation(n, spec.seed);
  std::vector<std::size_t> tr(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> va(perm.begin() + static_cast<std::ptrdiff_t>(n_train),
                              perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  std::vector<std::size_t> te(perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), perm.end());
  return SplitResult{t.take(tr), t.take(va), t.take(te), std::move(tr), std::move(va), std::move(te)};
}

// ---------------------------------------------------------------- distinct

std::vector<std::pair<std::string, std::size_t>> column_distinct(const Column& c) {
  std::map<std::string, std::size_t> counts;
  for (std::size_t r = 0; r < c.size(); ++r)
    if (!c.missing(r)) ++counts[c.cell_text(r)];
  std::vector<std::pair<std::string, std::size_t>> out(counts.begin(), counts.end());
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  return out;
}

std::vector<std::pair<std::string, std::size_t>> column_distinct(const Table& t,
                                                                 std::string_view col) {
  return column_distinct(t.column(col));
}

}  // namespace fairpipe
