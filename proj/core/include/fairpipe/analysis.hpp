#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fairpipe/json_util.hpp"
#include "fairpipe/tabular.hpp"

namespace fairpipe {

struct NumericSummary {
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
  double std = 0.0;  // population
  std::array<std::size_t, 10> histogram{};
};

struct CategoricalSummary {
  /// Up to ten (token, share of unmasked cells), most frequent first.
  std::vector<std::pair<std::string, double>> top;
};

struct ColumnProfile {
  std::string name;
  ColumnKind kind = ColumnKind::Categorical;
  double missing_rate = 0.0;
  std::size_t distinct_count = 0;
  std::optional<NumericSummary> numeric;
  std::optional<CategoricalSummary> categorical;
};

struct ProxyFlag {
  std::string feature;
  std::string candidate;
  double score = 0.0;
};

/// group column -> other column -> group value -> missing rate
using SubgroupMissing = std::map<std::string, std::map<std::string, std::map<std::string, double>>>;

struct AnalysisReport {
  std::size_t n_rows = 0;
  std::size_t n_cols = 0;
  std::vector<ColumnProfile> profiles;
  SubgroupMissing subgroup_missing;
  std::vector<std::string> column_names;  // order of the correlation matrix
  std::vector<std::vector<double>> correlation;
  std::vector<std::string> sensitive_candidates;
  std::vector<ProxyFlag> proxy_flags;
  double proxy_threshold = 0.3;
};

inline constexpr double kDefaultProxyThreshold = 0.3;
inline constexpr std::size_t kMaxGroups = 10;

/// Lowercase stems that mark a column name as demographically sensitive.
const std::vector<std::string>& sensitive_name_stems();
bool matches_sensitive_lexicon(std::string_view column_name);

std::vector<ColumnProfile> profile(const Table& t);
ColumnProfile profile_column(const Column& c);

/// Per (other column, group value) share of masked cells. The grouping column
/// must be categorical, or numeric with at most ten distinct values.
std::map<std::string, std::map<std::string, double>> subgroup_missing(const Table& t,
                                                                      std::string_view group_col);

/// Pairwise association on pairwise-complete rows: Pearson r for numeric
/// pairs, Cramér's V for categorical pairs, correlation ratio eta for mixed.
std::vector<std::vector<double>> association_matrix(const Table& t);
double association(const Column& a, const Column& b);

std::vector<ProxyFlag> flag_proxies(const Table& t, const std::vector<std::vector<double>>& assoc,
                                    const std::vector<std::string>& candidates,
                                    double threshold = kDefaultProxyThreshold);

/// Full profiling pass. When `candidates` is empty, lexicon-matching columns
/// with 2-10 distinct values are used as sensitive candidates.
AnalysisReport analyze(const Table& t, std::vector<std::string> candidates = {},
                       double proxy_threshold = kDefaultProxyThreshold);

Json to_json(const AnalysisReport& r);
AnalysisReport analysis_from_json(const Json& j);

}  // namespace fairpipe
