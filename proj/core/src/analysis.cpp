#include "fairpipe/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <unordered_map>

#include "fairpipe/error.hpp"

namespace fairpipe {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

// Dense codes for the unmasked cells of a column, keyed by text form.
struct Coded {
  std::vector<int> code;  // -1 for masked
  int levels = 0;
};

Coded encode(const Column& c) {
  Coded out;
  out.code.assign(c.size(), -1);
  std::map<std::string, int> index;
  for (std::size_t r = 0; r < c.size(); ++r) {
    if (c.missing(r)) continue;
    auto [it, inserted] = index.emplace(c.cell_text(r), static_cast<int>(index.size()));
    out.code[r] = it->second;
  }
  out.levels = static_cast<int>(index.size());
  return out;
}

double pearson(const Column& a, const Column& b) {
  double n = 0, sa = 0, sb = 0;
  for (std::size_t r = 0; r < a.size(); ++r) {
    if (a.missing(r) || b.missing(r)) continue;
    n += 1;
    sa += a.number(r);
    sb += b.number(r);
  }
  if (n < 3) return 0.0;
  const double ma = sa / n, mb = sb / n;
  double cov = 0, va = 0, vb = 0;
  for (std::size_t r = 0; r < a.size(); ++r) {
    if (a.missing(r) || b.missing(r)) continue;
    const double da = a.number(r) - ma, db = b.number(r) - mb;
    cov += da * db;
    va += da * da;
    vb += db * db;
  }
  if (va <= 0 || vb <= 0) return 0.0;
  return std::clamp(cov / std::sqrt(va * vb), -1.0, 1.0);
}

double cramers_v(const Column& a, const Column& b) {
  const auto ca = encode(a), cb = encode(b);
  std::vector<double> table(static_cast<std::size_t>(ca.levels) * static_cast<std::size_t>(cb.levels), 0.0);
  std::vector<double> row(static_cast<std::size_t>(ca.levels), 0.0), col(static_cast<std::size_t>(cb.levels), 0.0);
  double n = 0;
  for (std::size_t r = 0; r < a.size(); ++r) {
    if (ca.code[r] < 0 || cb.code[r] < 0) continue;
    auto i = static_cast<std::size_t>(ca.code[r]), j = static_cast<std::size_t>(cb.code[r]);
    table[i * col.size() + j] += 1;
    row[i] += 1;
    col[j] += 1;
    n += 1;
  }
  if (n < 3) return 0.0;
  // Levels that only occur alongside a masked partner do not count.
  const auto present = [](const std::vector<double>& v) {
    return static_cast<double>(std::count_if(v.begin(), v.end(), [](double x) { return x > 0; }));
  };
  const double k = std::min(present(row), present(col));
  if (k < 2) return 0.0;
  double chi2 = 0;
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (row[i] == 0) continue;
    for (std::size_t j = 0; j < col.size(); ++j) {
      if (col[j] == 0) continue;
      const double expected = row[i] * col[j] / n;
      const double d = table[i * col.size() + j] - expected;
      chi2 += d * d / expected;
    }
  }
  return std::clamp(std::sqrt(chi2 / (n * (k - 1))), 0.0, 1.0);
}

// Correlation ratio with `groups` as the grouping variable.
double correlation_ratio(const Column& values, const Column& groups) {
  const auto cg = encode(groups);
  std::vector<double> sum(static_cast<std::size_t>(cg.levels), 0.0), cnt(static_cast<std::size_t>(cg.levels), 0.0);
  double n = 0, total = 0;
  for (std::size_t r = 0; r < values.size(); ++r) {
    if (values.missing(r) || cg.code[r] < 0) continue;
    auto g = static_cast<std::size_t>(cg.code[r]);
    sum[g] += values.number(r);
    cnt[g] += 1;
    total += values.number(r);
    n += 1;
  }
  if (n < 3) return 0.0;
  const double mean = total / n;
  double ss_total = 0;
  for (std::size_t r = 0; r < values.size(); ++r) {
    if (values.missing(r) || cg.code[r] < 0) continue;
    const double d = values.number(r) - mean;
    ss_total += d * d;
  }
  if (ss_total <= 0) return 0.0;
  double ss_between = 0;
  for (std::size_t g = 0; g < sum.size(); ++g) {
    if (cnt[g] == 0) continue;
    const double d = sum[g] / cnt[g] - mean;
    ss_between += cnt[g] * d * d;
  }
  return std::clamp(std::sqrt(ss_between / ss_total), 0.0, 1.0);
}

}  // namespace

const std::vector<std::string>& sensitive_name_stems() {
  static const std::vector<std::string> stems = {"sex",   "gender", "race",   "ethnic", "age",
                                                 "disab", "relig",  "nation", "marital"};
  return stems;
}

bool matches_sensitive_lexicon(std::string_view column_name) {
  const auto name = lower(column_name);
  for (const auto& stem : sensitive_name_stems())
    if (name.find(stem) != std::string::npos) return true;
  return false;
}

ColumnProfile profile_column(const Column& c) {
  ColumnProfile p;
  p.name = c.name();
  p.kind = c.kind();
  const std::size_t n = c.size();
  const std::size_t missing = c.missing_count();
  const std::size_t present = n - missing;
  p.missing_rate = n ? static_cast<double>(missing) / static_cast<double>(n) : 0.0;
  const auto distinct = column_distinct(c);
  p.distinct_count = distinct.size();

  if (c.is_numeric()) {
    NumericSummary s;
    if (present > 0) {
      s.min = std::numeric_limits<double>::infinity();
      s.max = -std::numeric_limits<double>::infinity();
      double sum = 0;
      for (std::size_t r = 0; r < n; ++r) {
        if (c.missing(r)) continue;
        const double v = c.number(r);
        s.min = std::min(s.min, v);
        s.max = std::max(s.max, v);
        sum += v;
      }
      s.mean = sum / static_cast<double>(present);
      double ss = 0;
      for (std::size_t r = 0; r < n; ++r) {
        if (c.missing(r)) continue;
        const double d = c.number(r) - s.mean;
        ss += d * d;
      }
      s.std = std::sqrt(ss / static_cast<double>(present));
      const double width = (s.max - s.min) / 10.0;
      for (std::size_t r = 0; r < n; ++r) {
        if (c.missing(r)) continue;
        std::size_t bin = 0;
        if (width > 0) {
          bin = static_cast<std::size_t>((c.number(r) - s.min) / width);
          bin = std::min<std::size_t>(bin, 9);
        }
        ++s.histogram[bin];
      }
    }
    p.numeric = s;
  } else {
    CategoricalSummary s;
    for (std::size_t i = 0; i < distinct.size() && i < 10; ++i)
      s.top.emplace_back(distinct[i].first,
                         static_cast<double>(distinct[i].second) / static_cast<double>(present));
    p.categorical = std::move(s);
  }
  return p;
}

std::vector<ColumnProfile> profile(const Table& t) {
  if (t.n_cols() == 0 || t.n_rows() == 0) throw Error(ErrorCode::EmptyTable, t.name());
  std::vector<std::future<ColumnProfile>> jobs;
  jobs.reserve(t.n_cols());
  for (const auto& c : t.columns())
    jobs.push_back(std::async(std::launch::async, [&c] { return profile_column(c); }));
  std::vector<ColumnProfile> out;
  out.reserve(jobs.size());
  for (auto& j : jobs) out.push_back(j.get());
  return out;
}

std::map<std::string, std::map<std::string, double>> subgroup_missing(const Table& t,
                                                                      std::string_view group_col) {
  const auto& g = t.column(group_col);
  const auto groups = column_distinct(g);
  if (groups.size() > kMaxGroups)
    throw Error(ErrorCode::TooManyGroups,
                std::string(group_col) + " has " + std::to_string(groups.size()) + " distinct values");

  std::map<std::string, std::size_t> group_size;
  for (const auto& [token, count] : groups) group_size[token] = count;

  std::map<std::string, std::map<std::string, double>> out;
  for (const auto& c : t.columns()) {
    if (c.name() == g.name()) continue;
    std::map<std::string, std::size_t> masked;
    for (std::size_t r = 0; r < t.n_rows(); ++r)
      if (!g.missing(r) && c.missing(r)) ++masked[g.cell_text(r)];
    auto& per_group = out[c.name()];
    for (const auto& [token, size] : group_size)
      per_group[token] = static_cast<double>(masked[token]) / static_cast<double>(size);
  }
  return out;
}

double association(const Column& a, const Column& b) {
  if (a.is_numeric() && b.is_numeric()) return pearson(a, b);
  if (!a.is_numeric() && !b.is_numeric()) return cramers_v(a, b);
  return a.is_numeric() ? correlation_ratio(a, b) : correlation_ratio(b, a);
}

std::vector<std::vector<double>> association_matrix(const Table& t) {
  const std::size_t d = t.n_cols();
  std::vector<std::vector<double>> m(d, std::vector<double>(d, 0.0));
  for (std::size_t i = 0; i < d; ++i) {
    m[i][i] = 1.0;
    for (std::size_t j = i + 1; j < d; ++j) m[i][j] = m[j][i] = association(t.column(i), t.column(j));
  }
  return m;
}

std::vector<ProxyFlag> flag_proxies(const Table& t, const std::vector<std::vector<double>>& assoc,
                                    const std::vector<std::string>& candidates, double threshold) {
  std::vector<std::size_t> cand_idx;
  for (const auto& c : candidates) {
    auto idx = t.index_of(c);
    if (!idx) throw Error(ErrorCode::UnknownColumn, c);
    cand_idx.push_back(*idx);
  }
  std::vector<ProxyFlag> flags;
  for (std::size_t s : cand_idx) {
    for (std::size_t f = 0; f < t.n_cols(); ++f) {
      if (std::find(cand_idx.begin(), cand_idx.end(), f) != cand_idx.end()) continue;
      const double score = std::abs(assoc[f][s]);
      if (score > threshold) flags.push_back({t.column(f).name(), t.column(s).name(), score});
    }
  }
  std::stable_sort(flags.begin(), flags.end(),
                   [](const ProxyFlag& a, const ProxyFlag& b) { return a.score > b.score; });
  return flags;
}

AnalysisReport analyze(const Table& t, std::vector<std::string> candidates, double proxy_threshold) {
  AnalysisReport r;
  r.n_rows = t.n_rows();
  r.n_cols = t.n_cols();
  r.profiles = profile(t);
  r.proxy_threshold = proxy_threshold;
  for (const auto& c : t.columns()) r.column_names.push_back(c.name());

  if (candidates.empty()) {
    for (const auto& p : r.profiles)
      if (matches_sensitive_lexicon(p.name) && p.distinct_count >= 2 && p.distinct_count <= kMaxGroups)
        candidates.push_back(p.name);
  }
  r.sensitive_candidates = candidates;
  for (const auto& c : candidates) {
    if (column_distinct(t, c).size() > kMaxGroups) continue;
    r.subgroup_missing[c] = subgroup_missing(t, c);
  }
  r.correlation = association_matrix(t);
  r.proxy_flags = flag_proxies(t, r.correlation, candidates, proxy_threshold);
  return r;
}

Json to_json(const AnalysisReport& r) {
  Json profiles = Json::array();
  for (const auto& p : r.profiles) {
    Json jp = {{"name", p.name},
               {"kind", to_string(p.kind)},
               {"missing_rate", round6(p.missing_rate)},
               {"distinct_count", p.distinct_count}};
    if (p.numeric) {
      const auto& s = *p.numeric;
      jp["numeric_summary"] = {{"min", round6(s.min)},     {"max", round6(s.max)},
                               {"mean", round6(s.mean)},   {"std", round6(s.std)},
                               {"histogram", s.histogram}};
    } else {
      Json top = Json::array();
      for (const auto& [tok, freq] : p.categorical->top) top.push_back({{"token", tok}, {"frequency", round6(freq)}});
      jp["categorical_summary"] = {{"top", top}};
    }
    profiles.push_back(std::move(jp));
  }
  Json sub = Json::object();
  for (const auto& [g, cols] : r.subgroup_missing) {
    Json jc = Json::object();
    for (const auto& [c, groups] : cols) {
      Json jg = Json::object();
      for (const auto& [k, v] : groups) jg[k] = round6(v);
      jc[c] = jg;
    }
    sub[g] = jc;
  }
  Json corr = Json::array();
  for (const auto& row : r.correlation) {
    Json jr = Json::array();
    for (double v : row) jr.push_back(round6(v));
    corr.push_back(jr);
  }
  Json flags = Json::array();
  for (const auto& f : r.proxy_flags)
    flags.push_back({{"feature", f.feature}, {"candidate", f.candidate}, {"score", round6(f.score)}});
  return {{"n_rows", r.n_rows},
          {"n_cols", r.n_cols},
          {"profiles", profiles},
          {"subgroup_missing", sub},
          {"columns", r.column_names},
          {"correlation", corr},
          {"sensitive_candidates", r.sensitive_candidates},
          {"proxy_threshold", round6(r.proxy_threshold)},
          {"proxy_flags", flags}};
}

AnalysisReport analysis_from_json(const Json& j) {
  AnalysisReport r;
  r.n_rows = j.at("n_rows").get<std::size_t>();
  r.n_cols = j.at("n_cols").get<std::size_t>();
  for (const auto& jp : j.at("profiles")) {
    ColumnProfile p;
    p.name = jp.at("name").get<std::string>();
    p.kind = jp.at("kind").get<std::string>() == "Numeric" ? ColumnKind::Numeric : ColumnKind::Categorical;
    p.missing_rate = jp.at("missing_rate").get<double>();
    p.distinct_count = jp.at("distinct_count").get<std::size_t>();
    if (jp.contains("numeric_summary")) {
      const auto& s = jp["numeric_summary"];
      NumericSummary ns{s.at("min").get<double>(), s.at("max").get<double>(), s.at("mean").get<double>(),
                        s.at("std").get<double>(), s.at("histogram").get<std::array<std::size_t, 10>>()};
      p.numeric = ns;
    } else {
      CategoricalSummary cs;
      for (const auto& t : jp.at("categorical_summary").at("top"))
        cs.top.emplace_back(t.at("token").get<std::string>(), t.at("frequency").get<double>());
      p.categorical = std::move(cs);
    }
    r.profiles.push_back(std::move(p));
  }
  for (const auto& [g, cols] : j.at("subgroup_missing").items())
    for (const auto& [c, groups] : cols.items())
      for (const auto& [k, v] : groups.items()) r.subgroup_missing[g][c][k] = v.get<double>();
  r.column_names = j.at("columns").get<std::vector<std::string>>();
  r.correlation = j.at("correlation").get<std::vector<std::vector<double>>>();
  r.sensitive_candidates = j.at("sensitive_candidates").get<std::vector<std::string>>();
  r.proxy_threshold = j.at("proxy_threshold").get<double>();
  for (const auto& f : j.at("proxy_flags"))
    r.proxy_flags.push_back(
        {f.at("feature").get<std::string>(), f.at("candidate").get<std::string>(), f.at("score").get<double>()});
  return r;
}

}  // namespace fairpipe
