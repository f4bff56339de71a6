#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fairpipe/json_util.hpp"
#include "fairpipe/preprocess.hpp"

namespace fairpipe {

struct TrainSpec {
  double learning_rate = 0.1;
  int epochs = 2000;
  double l2_lambda = 1e-4;
  std::optional<Eigen::VectorXd> sample_weights;
  std::uint64_t seed = 42;
  /// Starting point [w; b]; zero when absent.
  std::optional<Eigen::VectorXd> initial_params;

  void validate(Eigen::Index n_rows) const;
};

struct LinearModel {
  Eigen::VectorXd weights;
  double bias = 0.0;
  std::string trained_on;  // recipe fingerprint
  double learning_rate = 0.1;
  int epochs = 2000;
  double l2_lambda = 1e-4;
  std::uint64_t seed = 42;

  /// [w; b]
  Eigen::VectorXd params() const;
};

Json to_json(const LinearModel& m);
LinearModel model_from_json(const Json& j);

inline double sigmoid(double z) {
  return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

/// A loss that depends on the parameters only through the linear scores
/// s = Xw + b. `eval` returns the value and *adds* dL/ds into `dscores`.
class ScoreLoss {
 public:
  virtual ~ScoreLoss() = default;
  virtual double eval(const Eigen::VectorXd& scores, const Eigen::VectorXd& probs,
                      Eigen::VectorXd& dscores) const = 0;
};

/// Weighted mean binary cross-entropy; weights are normalized to mean 1.
class WeightedBce final : public ScoreLoss {
 public:
  WeightedBce(const Eigen::VectorXd& labels, std::optional<Eigen::VectorXd> weights);
  double eval(const Eigen::VectorXd& scores, const Eigen::VectorXd& probs,
              Eigen::VectorXd& dscores) const override;
  const Eigen::VectorXd& weights() const { return weights_; }

 private:
  Eigen::VectorXd labels_;
  Eigen::VectorXd weights_;
};

/// sum_terms(s) + (l2/2)|w|^2 over params [w; b] for a fixed design matrix.
class Objective {
 public:
  Objective(const RowMatrix& features, double l2_lambda);
  void add_term(std::shared_ptr<const ScoreLoss> term);
  void clear_terms() { terms_.clear(); }

  double value_and_grad(const Eigen::VectorXd& params, Eigen::VectorXd* grad) const;
  double value(const Eigen::VectorXd& params) const { return value_and_grad(params, nullptr); }
  Eigen::Index dim() const { return features_.cols() + 1; }

 private:
  const RowMatrix& features_;
  double l2_;
  std::vector<std::shared_ptr<const ScoreLoss>> terms_;
};

/// Full-batch gradient descent. Each step starts at min(lr, 2 * last accepted
/// step) and halves until the objective does not increase.
class GradientDescent {
 public:
  GradientDescent(const Objective& objective, Eigen::VectorXd start, double learning_rate);

  /// Call after the objective's terms change.
  void refresh();
  /// Returns false when no step size decreased the objective.
  bool step();

  const Eigen::VectorXd& params() const { return params_; }
  double loss() const { return loss_; }
  int steps_taken() const { return steps_; }

 private:
  const Objective& objective_;
  Eigen::VectorXd params_;
  Eigen::VectorXd grad_;
  double loss_ = 0.0;
  double lr_;
  double step_size_;
  int steps_ = 0;
};

/// Called after every epoch with (epoch, loss).
using EpochCallback = std::function<void(int, double)>;

/// Minimizes weighted BCE + L2 (+ extra score terms) from TrainSpec's start
/// point. Throws DegenerateLabels, NonFiniteLoss.
LinearModel train(const DesignMatrix& dm, const TrainSpec& spec,
                  const std::vector<std::shared_ptr<const ScoreLoss>>& extra_terms = {},
                  const EpochCallback& on_epoch = {});

Eigen::VectorXd predict_proba(const LinearModel& m, const RowMatrix& features);

/// Central finite differences (h = 1e-5) against the analytic gradient.
/// Relative error per coordinate is |a - n| / max(|a|, |n|, 1e-4).
double grad_check(const std::function<double(const Eigen::VectorXd&)>& loss,
                  const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& grad,
                  const Eigen::VectorXd& point, double h = 1e-5);

}  // namespace fairpipe
