#include <gtest/gtest.h>

#include "fairpipe/error.hpp"
#include "fairpipe/preprocess.hpp"
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

TEST(Recipe, GroupMeanImputation) {
  const Table t("t", {num("age", {20, 0, 40, 30}, {false, true, false, false}), cat("sex", {"M", "M", "M", "F"}),
                      cat("y", {"a", "b", "a", "b"})});
  const auto r = fit_recipe(t, "sex", "y");
  const auto& nt = std::get<NumericTransform>(r.transforms.at(0));
  EXPECT_DOUBLE_EQ(nt.group_means.at("M"), 30.0);
  EXPECT_DOUBLE_EQ(nt.group_means.at("F"), 30.0);
  // imputed column [20, 30, 40, 30]: mean 30
  EXPECT_DOUBLE_EQ(nt.mean, 30.0);
  const auto dm = apply_recipe(t, r);
  EXPECT_DOUBLE_EQ(dm.features(1, 0), 0.0);
}

TEST(Recipe, GlobalFallbackWhenGroupHasNoValues) {
  const Table t("t", {num("x", {2, 4, 0}, {false, false, true}), cat("g", {"a", "a", "b"}), cat("y", {"p", "q", "p"})});
  const auto r = fit_recipe(t, "g", "y");
  const auto& nt = std::get<NumericTransform>(r.transforms.at(0));
  EXPECT_EQ(nt.group_means.count("b"), 0u);
  EXPECT_DOUBLE_EQ(nt.global_mean, 3.0);
  EXPECT_DOUBLE_EQ(nt.mean, 3.0);
}

TEST(Recipe, CategoricalGroupMode) {
  const Table t("t", {cat("c", {"u", "u", "", "v", "v", ""}, {false, false, true, false, false, true}),
                      cat("g", {"a", "a", "a", "b", "b", "b"}), cat("y", {"0", "1", "0", "1", "0", "1"})});
  const auto r = fit_recipe(t, "g", "y");
  const auto& ct = std::get<CategoricalTransform>(r.transforms.at(0));
  EXPECT_EQ(ct.group_modes.at("a"), "u");
  EXPECT_EQ(ct.group_modes.at("b"), "v");
  const auto dm = apply_recipe(t, r);
  // vocabulary u, v (tie on count, token order)
  EXPECT_EQ(dm.feature_names, (std::vector<std::string>{"c=u", "c=v"}));
  EXPECT_DOUBLE_EQ(dm.features(2, 0), 1.0);
  EXPECT_DOUBLE_EQ(dm.features(5, 1), 1.0);
}

TEST(Recipe, ZeroStdNormalizesToZero) {
  const Table t("t", {num("k", {5, 5, 5}), cat("g", {"a", "b", "a"}), cat("y", {"p", "q", "p"})});
  const auto dm = apply_recipe(t, fit_recipe(t, "g", "y"));
  for (Eigen::Index i = 0; i < 3; ++i) EXPECT_EQ(dm.features(i, 0), 0.0);
}

TEST(Recipe, FullOneHotAndUnseenTokens) {
  const Table train("t", {cat("c", {"a", "b", "c", "a"}), cat("g", {"x", "y", "x", "y"}),
                          cat("y", {"0", "1", "0", "1"})});
  const auto r = fit_recipe(train, "g", "y");
  EXPECT_EQ(r.feature_names(), (std::vector<std::string>{"c=a", "c=b", "c=c"}));
  const Table test("t", {cat("c", {"d"}), cat("g", {"x"}), cat("y", {"1"})});
  const auto dm = apply_recipe(test, r);
  EXPECT_EQ(dm.features.row(0).sum(), 0.0);
}

TEST(Recipe, ZScoreExample) {
  const Table t("t", {num("x", {1, 2, 3}), cat("g", {"a", "b", "a"}), cat("y", {"p", "q", "p"})});
  const auto dm = apply_recipe(t, fit_recipe(t, "g", "y"));
  EXPECT_NEAR(dm.features(0, 0), -1.2247, 1e-4);
  EXPECT_NEAR(dm.features(1, 0), 0.0, 1e-12);
  EXPECT_NEAR(dm.features(2, 0), 1.2247, 1e-4);
}

TEST(Recipe, LabelsAndGroups) {
  const Table t("t", {num("x", {1, 2, 3, 4}), cat("sex", {"M", "M", "M", "F"}), cat("y", {">50K", "<=50K", "<=50K", "<=50K"})});
  const auto r = fit_recipe(t, "sex", "y");
  EXPECT_EQ(r.positive_label, ">50K");
  EXPECT_EQ(r.privileged_group, "M");
  const auto dm = apply_recipe(t, r);
  EXPECT_EQ(dm.labels, Eigen::Vector4d(1, 0, 0, 0));
  EXPECT_EQ(dm.groups, Eigen::Vector4d(1, 1, 1, 0));
  // sensitive excluded by default
  EXPECT_EQ(dm.feature_names, (std::vector<std::string>{"x"}));
  const auto with = fit_recipe(t, "sex", "y", {std::nullopt, std::nullopt, true});
  EXPECT_EQ(with.feature_names().size(), 3u);
}

TEST(Recipe, ZeroOneTargetUsesOne) {
  const Table t("t", {num("x", {1, 2, 3}), cat("g", {"a", "b", "a"}), num("y", {1, 1, 0})});
  EXPECT_EQ(fit_recipe(t, "g", "y").positive_label, "1");
}

TEST(Recipe, Errors) {
  const Table t("t", {num("x", {1, 2, 3}), cat("g", {"a", "a", "a"}), cat("y", {"p", "q", "r"})});
  try {
    fit_recipe(t, "g", "y");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonBinaryTarget);
  }
  const Table t2("t", {num("x", {1, 2, 3}), cat("g", {"a", "a", "a"}), cat("y", {"p", "q", "q"})});
  try {
    fit_recipe(t2, "g", "y");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SingleGroup);
  }
}

TEST(Recipe, SchemaMismatch) {
  const Table t("t", {num("x", {1, 2, 3}), cat("g", {"a", "b", "a"}), cat("y", {"p", "q", "p"})});
  const auto r = fit_recipe(t, "g", "y");
  const Table missing("t", {cat("g", {"a"}), cat("y", {"p"})});
  const Table changed("t", {cat("x", {"z"}), cat("g", {"a"}), cat("y", {"p"})});
  for (const auto* bad : {&missing, &changed}) {
    try {
      apply_recipe(*bad, r);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::SchemaMismatch);
    }
  }
}

class FixtureRecipe : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto t = make_biased_fixture({2000, 21, 1.6});
    parts = split(t, {0.6, 0.2, 0.2, 21});
    recipe = fit_recipe(parts->train, "sex", "outcome");
  }
  std::optional<SplitResult> parts;
  Recipe recipe;
};

TEST_F(FixtureRecipe, TrainColumnsStandardized) {
  const auto dm = apply_recipe(parts->train, recipe);
  Eigen::Index col = 0;
  for (const auto& tr : recipe.transforms) {
    if (const auto* nt = std::get_if<NumericTransform>(&tr)) {
      const auto c = dm.features.col(col);
      const double mean = c.mean();
      const double var = (c.array() - mean).square().mean();
      EXPECT_NEAR(mean, 0.0, 1e-9) << nt->column;
      EXPECT_NEAR(std::sqrt(var), 1.0, 1e-9) << nt->column;
      ++col;
    } else {
      col += static_cast<Eigen::Index>(std::get<CategoricalTransform>(tr).vocabulary.size());
    }
  }
  EXPECT_EQ(col, dm.cols());
  EXPECT_TRUE(dm.features.allFinite());
}

TEST_F(FixtureRecipe, ApplyIsPure) {
  const auto a = apply_recipe(parts->test, recipe);
  const auto b = apply_recipe(parts->test, recipe);
  EXPECT_EQ(a.features, b.features);
  EXPECT_EQ(a.labels, b.labels);
}

TEST_F(FixtureRecipe, NoLeakageFromHeldOutRows) {
  auto cols = parts->test.columns();
  for (auto& c : cols)
    if (c.name() == "age") c = num("age", std::vector<double>(c.size(), 1e6));
  const Table altered("test", cols);
  (void)apply_recipe(altered, recipe);
  const auto refit = fit_recipe(parts->train, "sex", "outcome");
  EXPECT_EQ(to_json(refit).dump(), to_json(recipe).dump());
  EXPECT_EQ(refit.fingerprint(), recipe.fingerprint());
}

TEST_F(FixtureRecipe, JsonRoundTripReproducesMatrices) {
  const auto back = recipe_from_json(to_json(recipe));
  EXPECT_EQ(apply_recipe(parts->val, back).features, apply_recipe(parts->val, recipe).features);
  EXPECT_EQ(back.fingerprint(), recipe.fingerprint());
}
