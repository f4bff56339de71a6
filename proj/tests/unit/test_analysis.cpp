#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fairpipe/analysis.hpp"
#include "fairpipe/error.hpp"
#include "fairpipe/synthetic.hpp"

using namespace fairpipe;

namespace {

Column num(std::string name, std::vector<double> v, std::vector<bool> m = {}) {
  if (m.empty()) m.assign(v.size(), false);
  return Column::numeric(std::move(name), std::move(v), std::move(m));
}

Column cat(std::string name, std::vector<std::string> v, std::vector<bool> m = {}) {
  if (m.empty()) m.assign(v.size(), false);
  return Column::categorical(std::move(name), std::move(v), std::move(m));
}

}  // namespace

TEST(Profile, NumericSummary) {
  const auto p = profile_column(num("x", {1, 2, 3}));
  ASSERT_TRUE(p.numeric);
  EXPECT_FALSE(p.categorical);
  EXPECT_DOUBLE_EQ(p.numeric->mean, 2.0);
  EXPECT_NEAR(p.numeric->std, std::sqrt(2.0 / 3.0), 1e-12);
  EXPECT_NEAR(p.numeric->std, 0.8165, 1e-4);
  EXPECT_DOUBLE_EQ(p.numeric->min, 1.0);
  EXPECT_DOUBLE_EQ(p.numeric->max, 3.0);
  std::size_t total = 0;
  for (auto c : p.numeric->histogram) total += c;
  EXPECT_EQ(total, 3u);
  EXPECT_EQ(p.numeric->histogram.front(), 1u);
  EXPECT_EQ(p.numeric->histogram.back(), 1u);
}

TEST(Profile, CategoricalSummary) {
  const auto p = profile_column(cat("c", {"a", "a", "b"}));
  ASSERT_TRUE(p.categorical);
  EXPECT_FALSE(p.numeric);
  EXPECT_EQ(p.distinct_count, 2u);
  ASSERT_EQ(p.categorical->top.size(), 2u);
  EXPECT_EQ(p.categorical->top[0].first, "a");
  EXPECT_NEAR(p.categorical->top[0].second, 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(p.categorical->top[1].second, 1.0 / 3.0, 1e-12);
}

TEST(Profile, MissingRate) {
  const auto p = profile_column(num("x", {1, 0}, {false, true}));
  EXPECT_DOUBLE_EQ(p.missing_rate, 0.5);
}

TEST(Profile, IndependentOfOtherColumns) {
  const auto t = make_biased_fixture({500, 1, 1.6});
  auto cols = t.columns();
  cols[0] = num("age", std::vector<double>(t.n_rows(), 1.0));
  const Table changed("t", cols);
  const auto a = to_json(analyze(t)).at("profiles");
  const auto b = to_json(analyze(changed)).at("profiles");
  EXPECT_NE(a[0], b[0]);
  for (std::size_t i = 1; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
}

TEST(SubgroupMissing, HandCount) {
  const Table t("t", {cat("occupation", {"", "x", "y", "z"}, {true, false, false, false}),
                     cat("sex", {"M", "M", "F", "F"})});
  const auto m = subgroup_missing(t, "sex");
  EXPECT_DOUBLE_EQ(m.at("occupation").at("M"), 0.5);
  EXPECT_DOUBLE_EQ(m.at("occupation").at("F"), 0.0);
}

TEST(SubgroupMissing, NoMissingMeansZero) {
  const Table t("t", {num("x", {1, 2, 3, 4}), cat("g", {"a", "b", "a", "b"})});
  for (const auto& [col, groups] : subgroup_missing(t, "g"))
    for (const auto& [g, rate] : groups) EXPECT_EQ(rate, 0.0) << col << "/" << g;
}

TEST(SubgroupMissing, TooManyGroups) {
  std::vector<std::string> g;
  for (int i = 0; i < 11; ++i) g.push_back("g" + std::to_string(i));
  const Table t("t", {cat("g", g), num("x", std::vector<double>(11, 1.0))});
  try {
    subgroup_missing(t, "g");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TooManyGroups);
  }
}

TEST(Association, PerfectPearson) {
  EXPECT_NEAR(association(num("x", {1, 2, 3}), num("y", {2, 4, 6})), 1.0, 1e-12);
  EXPECT_NEAR(association(num("x", {1, 2, 3}), num("y", {6, 4, 2})), -1.0, 1e-12);
}

TEST(Association, IdenticalCategoricals) {
  const auto c = cat("c", {"a", "b", "c", "a", "b", "c"});
  EXPECT_NEAR(association(c, c), 1.0, 1e-12);
}

TEST(Association, CorrelationRatio) {
  // eta^2 = between / total = 1 / 1.25
  EXPECT_NEAR(association(num("x", {1, 2, 3, 4}), cat("g", {"a", "a", "b", "b"})), std::sqrt(0.8), 1e-12);
  EXPECT_NEAR(association(cat("g", {"a", "a", "b", "b"}), num("x", {1, 2, 3, 4})), 0.8944, 1e-4);
}

TEST(Association, TooFewCompleteRows) {
  EXPECT_EQ(association(num("x", {1, 2, 3}, {false, false, true}), num("y", {1, 2, 3})), 0.0);
}

TEST(Association, MatrixInvariants) {
  const auto t = make_biased_fixture({800, 11, 1.6});
  const auto m = association_matrix(t);
  ASSERT_EQ(m.size(), t.n_cols());
  for (std::size_t i = 0; i < m.size(); ++i) {
    EXPECT_NEAR(m[i][i], 1.0, 1e-9);
    for (std::size_t j = 0; j < m.size(); ++j) {
      EXPECT_NEAR(m[i][j], m[j][i], 1e-9);
      const bool both_numeric = t.column(i).is_numeric() && t.column(j).is_numeric();
      EXPECT_GE(m[i][j], both_numeric ? -1.0 - 1e-12 : -1e-12);
      EXPECT_LE(m[i][j], 1.0 + 1e-12);
    }
  }
}

TEST(Association, PermutationInvariant) {
  const auto t = make_biased_fixture({600, 13, 1.6});
  const auto a = association_matrix(t);
  const auto b = association_matrix(t.take(seeded_permutation(t.n_rows(), 5)));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a.size(); ++j) EXPECT_NEAR(a[i][j], b[i][j], 1e-9);
}

TEST(Proxies, CopyOfSensitiveIsFlagged) {
  const auto s = cat("sex", {"M", "F", "M", "F", "M", "F"});
  auto copy = cat("copy", {"M", "F", "M", "F", "M", "F"});
  const Table t("t", {s, copy, num("z", {1, 1, 2, 2, 3, 3})});
  const auto flags = flag_proxies(t, association_matrix(t), {"sex"});
  ASSERT_FALSE(flags.empty());
  EXPECT_EQ(flags[0].feature, "copy");
  EXPECT_NEAR(flags[0].score, 1.0, 1e-12);
  for (const auto& f : flags) EXPECT_NE(f.feature, "z");
}

TEST(Proxies, IndependentFeatureNotFlagged) {
  std::mt19937_64 rng(3);
  std::vector<double> x;
  std::vector<std::string> g;
  for (int i = 0; i < 4000; ++i) {
    x.push_back(static_cast<double>(rng() % 1000));
    g.push_back(rng() % 2 ? "a" : "b");
  }
  const Table t("t", {cat("sex", g), num("x", x)});
  EXPECT_TRUE(flag_proxies(t, association_matrix(t), {"sex"}).empty());
}

TEST(Proxies, EtaAboveThreshold) {
  const Table t("t", {num("x", {1, 2, 3, 4}), cat("sex", {"a", "a", "b", "b"})});
  const auto flags = flag_proxies(t, association_matrix(t), {"sex"});
  ASSERT_EQ(flags.size(), 1u);
  EXPECT_EQ(flags[0].feature, "x");
  EXPECT_NEAR(flags[0].score, 0.8944, 1e-4);
}

TEST(Analyze, ReportInvariants) {
  const auto t = make_biased_fixture({1000, 2, 1.6});
  const auto r = analyze(t);
  EXPECT_EQ(r.n_rows, 1000u);
  EXPECT_EQ(r.profiles.size(), t.n_cols());
  for (const auto& p : r.profiles) {
    EXPECT_NE(p.numeric.has_value(), p.categorical.has_value());
    EXPECT_EQ(p.numeric.has_value(), p.kind == ColumnKind::Numeric);
    EXPECT_GE(p.missing_rate, 0.0);
    EXPECT_LE(p.missing_rate, 1.0);
  }
  for (const auto& f : r.proxy_flags) EXPECT_GT(f.score, r.proxy_threshold);
  EXPECT_NE(std::find(r.sensitive_candidates.begin(), r.sensitive_candidates.end(), "sex"),
            r.sensitive_candidates.end());
  bool occupation_flagged = false;
  for (const auto& f : r.proxy_flags) occupation_flagged |= f.feature == "occupation" && f.candidate == "sex";
  EXPECT_TRUE(occupation_flagged);
  EXPECT_EQ(r.subgroup_missing.count("sex"), 1u);
}

TEST(Analyze, JsonRoundTrip) {
  const auto r = analyze(make_biased_fixture({300, 4, 1.6}));
  const auto j = to_json(r);
  EXPECT_EQ(to_json(analysis_from_json(j)).dump(), j.dump());
}

TEST(Lexicon, Stems) {
  for (const char* n : {"sex", "Gender", "race_code", "Ethnicity", "age", "disability", "religion", "nationality",
                        "marital_status"})
    EXPECT_TRUE(matches_sensitive_lexicon(n)) << n;
  for (const char* n : {"income", "hours", "zip"}) EXPECT_FALSE(matches_sensitive_lexicon(n)) << n;
}
