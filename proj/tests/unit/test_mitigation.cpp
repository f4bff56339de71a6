#include <gtest/gtest.h>

#include <random>

#include "fairpipe/error.hpp"
#include "fairpipe/mitigation.hpp"
#include "fairpipe/pipeline.hpp"
#include "fairpipe/synthetic.hpp"

using namespace fairpipe;

namespace {

// (a=1,y=1)=4, (a=1,y=0)=2, (a=0,y=1)=1, (a=0,y=0)=3
std::pair<Eigen::VectorXd, Eigen::VectorXd> skewed_counts() {
  Eigen::VectorXd y(10), a(10);
  y << 1, 1, 1, 1, 0, 0, 1, 0, 0, 0;
  a << 1, 1, 1, 1, 1, 1, 0, 0, 0, 0;
  return {y, a};
}

const PreparedData& fixture() {
  static const PreparedData data = [] {
    TaskConfig task;
    task.sensitive = "sex";
    task.target = "outcome";
    return prepare(make_biased_fixture(), task);
  }();
  return data;
}

std::vector<double> probs(const LinearModel& m, const Eigen::MatrixXd& x) {
  const Eigen::VectorXd p = predict_proba(m, x);
  return {p.begin(), p.end()};
}

const LinearModel& plain() {
  static const LinearModel m = train(fixture().train, {});
  return m;
}

std::vector<int> ints(const Eigen::VectorXd& v) { return to_binary(v); }

double grad_error(const DesignMatrix& dm, Metric metric, double lambda, const Eigen::VectorXd& point) {
  Objective obj(dm.features, 1e-3);
  obj.add_term(std::make_shared<WeightedBce>(dm.labels, std::nullopt));
  obj.add_term(std::make_shared<GroupGapPenalty>(dm.labels, dm.groups, metric, lambda));
  return grad_check([&](const Eigen::VectorXd& v) { return obj.value(v); },
                    [&](const Eigen::VectorXd& v) {
                      Eigen::VectorXd g;
                      obj.value_and_grad(v, &g);
                      return g;
                    },
                    point);
}

}  // namespace

TEST(Reweigh, IndependentStrataGiveOnes) {
  Eigen::VectorXd y(8), a(8);
  y << 1, 0, 1, 0, 1, 0, 1, 0;
  a << 1, 1, 0, 0, 1, 1, 0, 0;
  EXPECT_EQ(reweigh_weights(y, a), Eigen::VectorXd::Ones(8));
}

TEST(Reweigh, SkewedCounts) {
  const auto [y, a] = skewed_counts();
  const auto w = reweigh_weights(y, a);
  EXPECT_DOUBLE_EQ(w[0], 0.75);
  EXPECT_DOUBLE_EQ(w[4], 1.5);
  EXPECT_DOUBLE_EQ(w[6], 2.0);
  EXPECT_NEAR(w[7], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(w.sum(), 10.0, 1e-12);
}

TEST(Reweigh, WeightedBaseRatesEqualExactly) {
  // Rational check: w(a,y) * n_{a,y} = n_a n_y / n, so the weighted rate in
  // group a is n_1 / n for both groups.
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    const long c11 = 1 + rng() % 20, c10 = 1 + rng() % 20, c01 = 1 + rng() % 20, c00 = 1 + rng() % 20;
    const long n = c11 + c10 + c01 + c00;
    Eigen::VectorXd y(n), a(n);
    long i = 0;
    for (long k = 0; k < c11; ++k, ++i) y[i] = 1, a[i] = 1;
    for (long k = 0; k < c10; ++k, ++i) y[i] = 0, a[i] = 1;
    for (long k = 0; k < c01; ++k, ++i) y[i] = 1, a[i] = 0;
    for (long k = 0; k < c00; ++k, ++i) y[i] = 0, a[i] = 0;
    const auto w = reweigh_weights(y, a);
    const long n1 = c11 + c10, n0 = c01 + c00, p = c11 + c01, q = c10 + c00;
    // Exact form: the weighted positives of group a are n_a * p / n.
    EXPECT_DOUBLE_EQ(w[0] * c11, static_cast<double>(n1 * p) / n);
    EXPECT_DOUBLE_EQ(w[c11 + c10] * c01, static_cast<double>(n0 * p) / n);
    EXPECT_DOUBLE_EQ(w[c11] * c10, static_cast<double>(n1 * q) / n);
    const double total = w.sum();
    EXPECT_NEAR(total, static_cast<double>(n), 1e-9);
    double r1 = 0, t1 = 0, r0 = 0, t0 = 0;
    for (long k = 0; k < n; ++k) {
      (a[k] ? t1 : t0) += w[k];
      (a[k] ? r1 : r0) += w[k] * y[k];
    }
    EXPECT_NEAR(r1 / t1, static_cast<double>(p) / n, 1e-12);
    EXPECT_NEAR(r0 / t0, static_cast<double>(p) / n, 1e-12);
  }
}

TEST(Reweigh, StrengthExponent) {
  const auto [y, a] = skewed_counts();
  EXPECT_EQ(reweigh_weights(y, a, 0.0), Eigen::VectorXd::Ones(10));
  const auto full = reweigh_weights(y, a);
  const auto one = reweigh_weights(y, a, 1.0);
  EXPECT_LT((full - one).lpNorm<Eigen::Infinity>(), 1e-12);
  const auto sq = reweigh_weights(y, a, 2.0);
  EXPECT_NEAR(sq.maxCoeff(), 1.0, 1e-12);
  for (Eigen::Index i = 0; i < sq.size(); ++i)
    EXPECT_NEAR(sq[i] / sq[6], (full[i] / full[6]) * (full[i] / full[6]), 1e-12);
}

TEST(Reweigh, Errors) {
  Eigen::VectorXd y(4), a(4);
  y << 1, 0, 1, 0;
  a << 1, 1, 1, 1;
  EXPECT_ANY_THROW(reweigh_weights(y, a));
  y << 1, 1, 1, 1;
  a << 1, 0, 1, 0;
  EXPECT_ANY_THROW(reweigh_weights(y, a));
}

TEST(Penalized, LambdaZeroIsPlainTraining) {
  const auto m = train_penalized(fixture().train, {}, Metric::DP, 0.0);
  EXPECT_EQ(m.params(), plain().params());
}

TEST(Penalized, LargeLambdaClosesTheGap) {
  const auto m = train_penalized(fixture().train, {}, Metric::DP, 1e4);
  const auto e = evaluate(probs(m, fixture().val.features), 0.5, ints(fixture().val.labels), ints(fixture().val.groups));
  EXPECT_LT(e.dp_diff, 0.02);
}

TEST(Penalized, GradientCheckAtRandomPoints) {
  const auto dm = [] {
    DesignMatrix d;
    std::mt19937_64 rng(4);
    std::normal_distribution<double> z;
    d.features.resize(40, 3);
    d.labels.resize(40);
    d.groups.resize(40);
    for (int i = 0; i < 40; ++i) {
      for (int j = 0; j < 3; ++j) d.features(i, j) = z(rng);
      d.labels[i] = i % 3 == 0;
      d.groups[i] = i % 2;
    }
    return d;
  }();
  std::mt19937_64 rng(12);
  std::normal_distribution<double> z;
  double worst_dp = 0, worst_eo = 0;
  for (int k = 0; k < 100; ++k) {
    Eigen::VectorXd w(4);
    for (auto& v : w) v = z(rng);
    worst_dp = std::max(worst_dp, grad_error(dm, Metric::DP, 5.0, w));
    worst_eo = std::max(worst_eo, grad_error(dm, Metric::EO, 5.0, w));
  }
  EXPECT_LT(worst_dp, 1e-4);
  EXPECT_LT(worst_eo, 1e-4);
}

TEST(Penalized, EmptyEoStratumWarns) {
  DesignMatrix dm;
  dm.features.resize(6, 1);
  dm.features << 1, 2, 3, 4, 5, 6;
  dm.labels.resize(6);
  dm.labels << 1, 0, 1, 1, 1, 0;
  dm.groups.resize(6);
  dm.groups << 1, 1, 1, 0, 0, 0;
  GroupGapPenalty eo(dm.labels, dm.groups, Metric::EO, 1.0);
  EXPECT_FALSE(eo.empty_stratum());
  dm.labels << 1, 0, 1, 1, 1, 1;
  GroupGapPenalty eo2(dm.labels, dm.groups, Metric::EO, 1.0);
  EXPECT_TRUE(eo2.empty_stratum());
  std::vector<std::string> warnings;
  train_penalized(dm, {}, Metric::EO, 1.0, &warnings);
  EXPECT_EQ(warnings.size(), 1u);
}

TEST(Penalized, FixtureMonotoneInLambda) {
  double prev = 1.0;
  for (double lambda : {0.0, 1.0, 10.0, 100.0}) {
    const auto b = build_fair_model(fixture().train, fixture().val, {Method::Penalized, Metric::DP, lambda}, {});
    EXPECT_LE(b.validation.dp_diff, prev) << "lambda " << lambda;
    prev = b.validation.dp_diff;
  }
}

TEST(Adversarial, AlphaZeroMatchesPlain) {
  const auto m = train_adversarial(fixture().train, {}, Metric::DP, 0.0);
  EXPECT_LT((m.params() - plain().params()).lpNorm<Eigen::Infinity>(), 1e-6);
}

TEST(Adversarial, LargeAlphaBlindsTheAdversary) {
  AdversarialDiagnostics diag;
  const auto m = train_adversarial(fixture().train, {}, Metric::DP, 10.0, {}, &diag);
  EXPECT_LE(diag.adversary_accuracy, 0.6);
  for (double l : diag.predictor_loss) EXPECT_TRUE(std::isfinite(l));
  const auto p = predict_proba(m, fixture().train.features);
  EXPECT_GE(p.minCoeff(), 0.0);
  EXPECT_LE(p.maxCoeff(), 1.0);
}

TEST(Adversarial, Deterministic) {
  AdversarialSchedule s;
  s.rounds = 5;
  const auto a = train_adversarial(fixture().train, {}, Metric::EO, 2.0, s);
  const auto b = train_adversarial(fixture().train, {}, Metric::EO, 2.0, s);
  EXPECT_EQ(a.params(), b.params());
}

TEST(RejectOption, Examples) {
  const std::vector scores{0.55, 0.45};
  const std::vector groups{1, 0};
  EXPECT_EQ(apply_reject_option(scores, groups, 0.1), (std::vector{0, 1}));
  EXPECT_EQ(apply_reject_option(scores, groups, 0.0), threshold_scores(scores));
  const std::vector s2{0.99, 0.01, 0.7, 0.2};
  const std::vector g2{1, 1, 0, 0};
  EXPECT_EQ(apply_reject_option(s2, g2, 0.5), (std::vector{0, 0, 1, 1}));
}

TEST(RejectOption, ThetaMonotone) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> s(200);
    std::vector<int> g(200);
    for (int i = 0; i < 200; ++i) {
      s[i] = u(rng);
      g[i] = i % 2;
    }
    double prev0 = -1, prev1 = 1e9;
    for (int k = 0; k <= 10; ++k) {
      const auto p = apply_reject_option(s, g, 0.05 * k);
      double r0 = 0, r1 = 0;
      for (int i = 0; i < 200; ++i) (g[i] ? r1 : r0) += p[i];
      EXPECT_GE(r0, prev0);
      EXPECT_LE(r1, prev1);
      prev0 = r0;
      prev1 = r1;
    }
  }
}

TEST(BuildFairModel, Reductions) {
  const auto& d = fixture();
  const auto base = evaluate(probs(plain(), d.val.features), 0.5, ints(d.val.labels), ints(d.val.groups));
  const auto pen = build_fair_model(d.train, d.val, {Method::Penalized, Metric::DP, 0.0}, {});
  EXPECT_EQ(pen.model.predictor.params(), plain().params());
  const auto rej = build_fair_model(d.train, d.val, {Method::RejectOption, Metric::DP, 0.0}, {}, &plain());
  ASSERT_TRUE(rej.model.post_rule);
  EXPECT_EQ(rej.model.post_rule->favored_group, 0);
  EXPECT_EQ(to_json(rej.validation).dump(), to_json(base).dump());
  EXPECT_FALSE(pen.model.post_rule);
}

TEST(BuildFairModel, ReweighUsesReweighWeights) {
  const auto& d = fixture();
  const auto b = build_fair_model(d.train, d.val, {Method::Reweigh, Metric::DP, 1.0}, {});
  TrainSpec spec;
  spec.sample_weights = reweigh_weights(d.train.labels, d.train.groups);
  EXPECT_EQ(b.model.predictor.params(), train(d.train, spec).params());
}

TEST(MitigationConfig, Domains) {
  EXPECT_ANY_THROW((MitigationConfig{Method::RejectOption, Metric::DP, 0.6}.validate()));
  EXPECT_ANY_THROW((MitigationConfig{Method::Penalized, Metric::DP, -1}.validate()));
  EXPECT_NO_THROW((MitigationConfig{Method::Adversarial, Metric::EO, 3}.validate()));
  EXPECT_EQ(method_from_string("reject"), Method::RejectOption);
  EXPECT_EQ(method_from_string("Reweigh"), Method::Reweigh);
}

TEST(FairModelJson, RoundTrip) {
  const auto b = build_fair_model(fixture().train, fixture().val, {Method::RejectOption, Metric::DP, 0.2}, {}, &plain());
  const auto j = to_json(b.model);
  EXPECT_EQ(to_json(fair_model_from_json(j)).dump(), j.dump());
}
