#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fairpipe/fairness.hpp"
#include "fairpipe/json_util.hpp"
#include "fairpipe/model.hpp"
#include "fairpipe/preprocess.hpp"

namespace fairpipe {

enum class Method { Reweigh, Penalized, Adversarial, RejectOption };

std::string_view to_string(Method m);
/// Accepts "reweigh", "penalized", "adversarial", "reject" (or "reject_option").
Method method_from_string(std::string_view s);

struct MitigationConfig {
  Method method = Method::Penalized;
  Metric metric = Metric::DP;
  /// lambda (Penalized), alpha (Adversarial), theta in [0, 0.5] (RejectOption),
  /// exponent on the reweighing weights (Reweigh; 1 = classic reweighing).
  double strength = 0.0;

  void validate() const;
};

struct RejectRule {
  double theta = 0.0;
  int favored_group = 0;
};

struct FairModel {
  LinearModel predictor;
  Method method = Method::Penalized;
  Metric metric = Metric::DP;
  double strength = 0.0;
  std::optional<RejectRule> post_rule;  // present iff method == RejectOption
};

Json to_json(const FairModel& m);
FairModel fair_model_from_json(const Json& j);

/// Hard predictions of a fair model (threshold 0.5, or the reject-option band).
std::vector<int> predict(const FairModel& m, const RowMatrix& features, std::span<const int> groups);

// ---------------------------------------------------------------- reweighing

/// Kamiran-Calders weights w(a,y) = n_a * n_y / (n * n_{a,y}).
/// Throws SingleGroup, DegenerateLabels.
Eigen::VectorXd reweigh_weights(const Eigen::VectorXd& labels, const Eigen::VectorXd& groups);

/// w(a,y)^strength, computed in the log domain; strength 0 gives all ones.
Eigen::VectorXd reweigh_weights(const Eigen::VectorXd& labels, const Eigen::VectorXd& groups,
                                double strength);

// ---------------------------------------------------------------- penalized

/// lambda * squared gap of mean predicted probability between groups
/// (DP: overall; EO: summed over label strata).
class GroupGapPenalty final : public ScoreLoss {
 public:
  GroupGapPenalty(const Eigen::VectorXd& labels, const Eigen::VectorXd& groups, Metric metric, double lambda);
  double eval(const Eigen::VectorXd& scores, const Eigen::VectorXd& probs,
              Eigen::VectorXd& dscores) const override;
  /// True when an EO stratum was empty and its term dropped.
  bool empty_stratum() const { return empty_stratum_; }

 private:
  struct Stratum {
    std::vector<Eigen::Index> privileged;
    std::vector<Eigen::Index> unprivileged;
  };
  std::vector<Stratum> strata_;
  double lambda_;
  bool empty_stratum_ = false;
};

LinearModel train_penalized(const DesignMatrix& dm, const TrainSpec& spec, Metric metric, double lambda,
                            std::vector<std::string>* warnings = nullptr);

// ---------------------------------------------------------------- adversarial

struct AdversarialSchedule {
  int rounds = 50;
  int adversary_steps = 20;
  int predictor_steps = 20;
  double adversary_learning_rate = 1.0;
};

struct AdversarialDiagnostics {
  double adversary_accuracy = 0.0;  // on the training rows, final round
  Eigen::VectorXd adversary_params;  // [u; c]
  std::vector<double> predictor_loss;  // per round, including the adversary term
};

/// Predictor minimizes BCE + L2 - alpha * BCE_adv, alternating with an
/// adversary (logistic regression on [p] for DP, [p, y] for EO) that
/// minimizes BCE_adv. Throws NonFiniteLoss with the round index.
LinearModel train_adversarial(const DesignMatrix& dm, const TrainSpec& spec, Metric metric, double alpha,
                              const AdversarialSchedule& schedule = {},
                              AdversarialDiagnostics* diagnostics = nullptr);

// ---------------------------------------------------------------- reject option

/// Inside [0.5 - theta, 0.5 + theta] (empty for theta = 0) predict 1 for the
/// favored group and 0 otherwise; outside, predict score >= 0.5.
std::vector<int> apply_reject_option(std::span<const double> scores, std::span<const int> groups, double theta,
                                     int favored_group = 0);

// ---------------------------------------------------------------- dispatch

struct FairBuild {
  FairModel model;
  EvalResult validation;
  std::vector<std::string> warnings;
};

/// Trains per `cfg` on `train` and evaluates on `val`. `plain` may carry an
/// already-trained unmitigated model, reused by RejectOption.
FairBuild build_fair_model(const DesignMatrix& train, const DesignMatrix& val, const MitigationConfig& cfg,
                           const TrainSpec& spec, const LinearModel* plain = nullptr,
                           const AdversarialSchedule& schedule = {});

}  // namespace fairpipe
