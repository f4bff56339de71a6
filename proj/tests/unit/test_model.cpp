#include <gtest/gtest.h>

#include <random>

#include "fairpipe/error.hpp"
#include "fairpipe/model.hpp"
#include "fairpipe/pipeline.hpp"
#include "fairpipe/synthetic.hpp"

using namespace fairpipe;

namespace {

DesignMatrix toy_separable() {
  DesignMatrix dm;
  dm.features.resize(20, 1);
  dm.labels.resize(20);
  dm.groups.resize(20);
  for (int i = 0; i < 20; ++i) {
    const bool pos = i % 2;
    dm.features(i, 0) = pos ? 1.0 : -1.0;
    dm.labels[i] = pos;
    dm.groups[i] = (i / 2) % 2;
  }
  dm.feature_names = {"x"};
  return dm;
}

DesignMatrix random_rows(int n, int d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  DesignMatrix dm;
  dm.features.resize(n, d);
  dm.labels.resize(n);
  dm.groups.resize(n);
  for (int i = 0; i < n; ++i) {
    double s = 0;
    for (int j = 0; j < d; ++j) {
      dm.features(i, j) = z(rng);
      s += dm.features(i, j) * (j + 1) * 0.3;
    }
    dm.labels[i] = s + z(rng) > 0 ? 1.0 : 0.0;
    dm.groups[i] = i % 2;
  }
  dm.labels[0] = 0;
  dm.labels[1] = 1;
  return dm;
}

const PreparedData& fixture() {
  static const PreparedData data = [] {
    TaskConfig task;
    task.sensitive = "sex";
    task.target = "outcome";
    return prepare(make_biased_fixture({2000, 3, 1.6}), task);
  }();
  return data;
}

}  // namespace

TEST(Train, SeparableToySet) {
  const auto dm = toy_separable();
  const auto m = train(dm, {});
  const auto p = predict_proba(m, dm.features);
  int correct = 0;
  for (int i = 0; i < 20; ++i) correct += (p[i] >= 0.5) == (dm.labels[i] == 1.0);
  EXPECT_EQ(correct, 20);
}

TEST(Train, ZeroEpochs) {
  TrainSpec spec;
  spec.epochs = 0;
  const auto dm = toy_separable();
  const auto m = train(dm, spec);
  EXPECT_EQ(m.weights.norm(), 0.0);
  EXPECT_EQ(m.bias, 0.0);
  for (double v : predict_proba(m, dm.features)) EXPECT_EQ(v, 0.5);
}

TEST(Train, GradientAtZero) {
  RowMatrix x(1, 1);
  x(0, 0) = 1.0;
  Objective obj(x, 0.0);
  obj.add_term(std::make_shared<WeightedBce>(Eigen::VectorXd::Ones(1), std::nullopt));
  Eigen::VectorXd g;
  obj.value_and_grad(Eigen::VectorXd::Zero(2), &g);
  EXPECT_DOUBLE_EQ(g[0], -0.5);
  EXPECT_DOUBLE_EQ(g[1], -0.5);
}

TEST(Train, Errors) {
  auto dm = toy_separable();
  dm.labels.setZero();
  try {
    train(dm, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateLabels);
  }
  LinearModel m;
  m.weights = Eigen::VectorXd::Zero(3);
  try {
    predict_proba(m, toy_separable().features);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
  }
}

TEST(Predict, SigmoidValues) {
  LinearModel m;
  m.weights = Eigen::VectorXd::Constant(1, 2.0);
  m.bias = -1.0;
  RowMatrix x(1, 1);
  x(0, 0) = 1.0;
  EXPECT_NEAR(predict_proba(m, x)[0], 0.7311, 1e-4);
  m.weights[0] = 1.0;
  m.bias = 0.0;
  x(0, 0) = 0.0;
  EXPECT_DOUBLE_EQ(predict_proba(m, x)[0], 0.5);
  x(0, 0) = 50.0;
  EXPECT_GT(predict_proba(m, x)[0], 1.0 - 1e-12);
  EXPECT_EQ(sigmoid(-800.0), 0.0);
}

TEST(GradCheck, Quadratic) {
  Eigen::Vector2d w(1, 2);
  const double err = grad_check([](const Eigen::VectorXd& v) { return v.squaredNorm(); },
                                [](const Eigen::VectorXd& v) { return Eigen::VectorXd(2 * v); }, w);
  EXPECT_LT(err, 1e-8);
}

TEST(GradCheck, WeightedBce) {
  const auto dm = random_rows(20, 4, 17);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.1, 3.0);
  Eigen::VectorXd weights(20);
  for (auto& w : weights) w = u(rng);
  Objective obj(dm.features, 1e-2);
  obj.add_term(std::make_shared<WeightedBce>(dm.labels, weights));
  std::normal_distribution<double> z;
  Eigen::VectorXd point(5);
  for (auto& p : point) p = z(rng);
  const double err = grad_check([&](const Eigen::VectorXd& v) { return obj.value(v); },
                                [&](const Eigen::VectorXd& v) {
                                  Eigen::VectorXd g;
                                  obj.value_and_grad(v, &g);
                                  return g;
                                },
                                point);
  EXPECT_LT(err, 1e-5);
}

TEST(Train, LossNonIncreasingOnFixture) {
  std::vector<double> losses;
  train(fixture().train, {}, {}, [&](int, double loss) { losses.push_back(loss); });
  ASSERT_EQ(losses.size(), 2000u);
  for (std::size_t i = 1; i < losses.size(); ++i) ASSERT_LE(losses[i], losses[i - 1]) << "epoch " << i;
}

TEST(Train, DoublingWeightsChangesNothing) {
  const auto& dm = fixture().train;
  TrainSpec a, b;
  Eigen::VectorXd w(dm.rows());
  for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = 0.5 + (i % 3);
  a.sample_weights = w;
  b.sample_weights = 2.0 * w;
  const auto ma = train(dm, a);
  const auto mb = train(dm, b);
  EXPECT_LT((ma.params() - mb.params()).lpNorm<Eigen::Infinity>(), 1e-12);
}

TEST(Train, ConvexFromTwoStarts) {
  const auto& dm = fixture().train;
  TrainSpec zero;
  zero.epochs = 20000;
  zero.l2_lambda = 1e-2;
  TrainSpec perturbed = zero;
  std::mt19937_64 rng(8);
  std::normal_distribution<double> z(0.0, 0.5);
  Eigen::VectorXd start(dm.cols() + 1);
  for (auto& v : start) v = z(rng);
  perturbed.initial_params = start;
  const auto a = train(dm, zero);
  const auto b = train(dm, perturbed);
  EXPECT_LT((a.params() - b.params()).lpNorm<Eigen::Infinity>(), 1e-4);
}

TEST(Train, Deterministic) {
  const auto a = train(fixture().train, {});
  const auto b = train(fixture().train, {});
  EXPECT_EQ(a.params(), b.params());
}

TEST(TrainSpecValidation, Rejects) {
  TrainSpec s;
  s.learning_rate = 0;
  EXPECT_ANY_THROW(s.validate(10));
  s = {};
  s.sample_weights = Eigen::VectorXd::Zero(10);
  EXPECT_ANY_THROW(s.validate(10));
  s.sample_weights = Eigen::VectorXd::Ones(9);
  EXPECT_ANY_THROW(s.validate(10));
}

TEST(ModelJson, RoundTrip) {
  auto m = train(toy_separable(), {});
  m.trained_on = "abc";
  const auto back = model_from_json(to_json(m));
  EXPECT_EQ(back.params(), m.params());
  EXPECT_EQ(back.trained_on, "abc");
}
