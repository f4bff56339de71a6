#include "fairpipe/mitigation.hpp"

#include <algorithm>
#include <cmath>

#include "fairpipe/error.hpp"

namespace fairpipe {

std::string_view to_string(Method m) {
  switch (m) {
    case Method::Reweigh: return "reweigh";
    case Method::Penalized: return "penalized";
    case Method::Adversarial: return "adversarial";
    case Method::RejectOption: return "reject";
  }
  return "unknown";
}

Method method_from_string(std::string_view s) {
  std::string l(s);
  std::transform(l.begin(), l.end(), l.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (l == "reweigh" || l == "reweighing") return Method::Reweigh;
  if (l == "penalized" || l == "constrained") return Method::Penalized;
  if (l == "adversarial") return Method::Adversarial;
  if (l == "reject" || l == "reject_option") return Method::RejectOption;
  throw Error(ErrorCode::InvalidArgument,
              "unknown mitigation '" + std::string(s) + "' (expected reweigh|penalized|adversarial|reject)");
}

void MitigationConfig::validate() const {
  if (!std::isfinite(strength) || strength < 0)
    throw Error(ErrorCode::InvalidArgument, "mitigation strength must be finite and non-negative");
  if (method == Method::RejectOption && strength > 0.5)
    throw Error(ErrorCode::InvalidArgument, "reject-option theta must lie in [0, 0.5]");
}

Json to_json(const FairModel& m) {
  Json j = {{"method", to_string(m.method)},
            {"metric", to_string(m.metric)},
            {"strength", m.strength},
            {"predictor", to_json(m.predictor)}};
  if (m.post_rule)
    j["post_rule"] = {{"theta", m.post_rule->theta}, {"favored_group", m.post_rule->favored_group}};
  else
    j["post_rule"] = nullptr;
  return j;
}

FairModel fair_model_from_json(const Json& j) {
  FairModel m;
  m.method = method_from_string(j.at("method").get<std::string>());
  m.metric = metric_from_string(j.at("metric").get<std::string>());
  m.strength = j.at("strength").get<double>();
  m.predictor = model_from_json(j.at("predictor"));
  if (j.contains("post_rule") && !j["post_rule"].is_null())
    m.post_rule = RejectRule{j["post_rule"].at("theta").get<double>(), j["post_rule"].at("favored_group").get<int>()};
  return m;
}

std::vector<int> predict(const FairModel& m, const RowMatrix& features, std::span<const int> groups) {
  const Eigen::VectorXd p = predict_proba(m.predictor, features);
  std::span<const double> scores(p.data(), static_cast<std::size_t>(p.size()));
  if (m.post_rule) return apply_reject_option(scores, groups, m.post_rule->theta, m.post_rule->favored_group);
  return threshold_scores(scores, 0.5);
}

// ---------------------------------------------------------------- reweighing

Eigen::VectorXd reweigh_weights(const Eigen::VectorXd& labels, const Eigen::VectorXd& groups) {
  if (labels.size() != groups.size()) throw Error(ErrorCode::DimensionMismatch, "labels and groups differ in length");
  const Eigen::Index n = labels.size();
  double n_a[2] = {0, 0}, n_y[2] = {0, 0}, n_ay[2][2] = {{0, 0}, {0, 0}};
  for (Eigen::Index i = 0; i < n; ++i) {
    const int a = groups[i] != 0, y = labels[i] != 0;
    n_a[a] += 1;
    n_y[y] += 1;
    n_ay[a][y] += 1;
  }
  if (n_a[0] == 0 || n_a[1] == 0) throw Error(ErrorCode::SingleGroup, "reweighing needs both groups");
  if (n_y[0] == 0 || n_y[1] == 0) throw Error(ErrorCode::DegenerateLabels, "reweighing needs both labels");
  Eigen::VectorXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int a = groups[i] != 0, y = labels[i] != 0;
    w[i] = (n_a[a] * n_y[y]) / (static_cast<double>(n) * n_ay[a][y]);
  }
  return w;
}

Eigen::VectorXd reweigh_weights(const Eigen::VectorXd& labels, const Eigen::VectorXd& groups, double strength) {
  Eigen::VectorXd base = reweigh_weights(labels, groups);
  if (strength == 1.0) return base;
  if (strength == 0.0) return Eigen::VectorXd::Ones(base.size());
  Eigen::VectorXd logw = strength * base.array().log();
  const double top = logw.maxCoeff();
  return (logw.array() - top).exp();
}

// ---------------------------------------------------------------- penalized

GroupGapPenalty::GroupGapPenalty(const Eigen::VectorXd& labels, const Eigen::VectorXd& groups, Metric metric,
                                 double lambda)
    : lambda_(lambda) {
  const auto collect = [&](int label_filter) {
    Stratum s;
    for (Eigen::Index i = 0; i < groups.size(); ++i) {
      if (label_filter >= 0 && (labels[i] != 0) != (label_filter == 1)) continue;
      (groups[i] != 0 ? s.privileged : s.unprivileged).push_back(i);
    }
    return s;
  };
  if (metric == Metric::DP) {
    auto s = collect(-1);
    if (s.privileged.empty() || s.unprivileged.empty())
      throw Error(ErrorCode::SingleGroup, "penalty needs both groups");
    strata_.push_back(std::move(s));
  } else {
    for (int y = 0; y < 2; ++y) {
      auto s = collect(y);
      if (s.privileged.empty() || s.unprivileged.empty()) {
        empty_stratum_ = true;
        continue;
      }
      strata_.push_back(std::move(s));
    }
  }
}

double GroupGapPenalty::eval(const Eigen::VectorXd&, const Eigen::VectorXd& probs, Eigen::VectorXd& dscores) const {
  double value = 0.0;
  for (const auto& s : strata_) {
    double m1 = 0, m0 = 0;
    for (auto i : s.privileged) m1 += probs[i];
    for (auto i : s.unprivileged) m0 += probs[i];
    const double n1 = static_cast<double>(s.privileged.size()), n0 = static_cast<double>(s.unprivileged.size());
    m1 /= n1;
    m0 /= n0;
    const double gap = m1 - m0;
    value += lambda_ * gap * gap;
    const double coef = 2.0 * lambda_ * gap;
    for (auto i : s.privileged) dscores[i] += coef * probs[i] * (1 - probs[i]) / n1;
    for (auto i : s.unprivileged) dscores[i] -= coef * probs[i] * (1 - probs[i]) / n0;
  }
  return value;
}

LinearModel train_penalized(const DesignMatrix& dm, const TrainSpec& spec, Metric metric, double lambda,
                            std::vector<std::string>* warnings) {
  if (!(lambda >= 0) || !std::isfinite(lambda))
    throw Error(ErrorCode::InvalidArgument, "penalty strength must be finite and non-negative");
  if (lambda == 0.0) return train(dm, spec);
  auto penalty = std::make_shared<GroupGapPenalty>(dm.labels, dm.groups, metric, lambda);
  if (penalty->empty_stratum() && warnings)
    warnings->push_back("EmptyStratum: an (a, y) cell is empty; its equalized-odds term was dropped");
  return train(dm, spec, {penalty});
}

// ---------------------------------------------------------------- adversarial

namespace {

// -alpha * BCE of a fixed adversary reading [p] or [p, y].
class AdversaryTerm final : public ScoreLoss {
 public:
  AdversaryTerm(const Eigen::VectorXd& labels, const Eigen::VectorXd& groups, bool use_label, double alpha)
      : labels_(labels), groups_(groups), use_label_(use_label), alpha_(alpha) {}

  void set_adversary(const Eigen::VectorXd& params) { adv_ = params; }

  double eval(const Eigen::VectorXd&, const Eigen::VectorXd& probs, Eigen::VectorXd& dscores) const override {
    const Eigen::Index n = probs.size();
    const double u0 = adv_[0];
    const double u1 = use_label_ ? adv_[1] : 0.0;
    const double c = adv_[adv_.size() - 1];
    double bce = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double t = u0 * probs[i] + u1 * labels_[i] + c;
      bce += std::log1p(std::exp(-std::abs(t))) + std::max(t, 0.0) - groups_[i] * t;
      const double dt = (sigmoid(t) - groups_[i]) / static_cast<double>(n);
      dscores[i] -= alpha_ * dt * u0 * probs[i] * (1 - probs[i]);
    }
    return -alpha_ * bce / static_cast<double>(n);
  }

 private:
  const Eigen::VectorXd& labels_;
  const Eigen::VectorXd& groups_;
  bool use_label_;
  double alpha_;
  Eigen::VectorXd adv_;
};

void fill_adversary_inputs(RowMatrix& z, const Eigen::VectorXd& probs, const Eigen::VectorXd& labels) {
  z.col(0) = probs;
  if (z.cols() > 1) z.col(1) = labels;
}

}  // namespace

LinearModel train_adversarial(const DesignMatrix& dm, const TrainSpec& spec, Metric metric, double alpha,
                              const AdversarialSchedule& schedule, AdversarialDiagnostics* diagnostics) {
  if (!(alpha >= 0) || !std::isfinite(alpha))
    throw Error(ErrorCode::InvalidArgument, "adversary weight must be finite and non-negative");
  if (schedule.rounds < 0 || schedule.adversary_steps < 0 || schedule.predictor_steps < 0)
    throw Error(ErrorCode::InvalidArgument, "adversarial schedule counts must be non-negative");
  const Eigen::Index n = dm.rows(), d = dm.cols();
  spec.validate(n);
  const double positives = dm.labels.sum();
  if (n < 2 || positives == 0 || positives == static_cast<double>(n))
    throw Error(ErrorCode::DegenerateLabels, "training labels contain a single class");
  const double privileged = dm.groups.sum();
  if (privileged == 0 || privileged == static_cast<double>(n))
    throw Error(ErrorCode::SingleGroup, "adversary needs both groups");

  const bool use_label = metric == Metric::EO;
  Objective predictor_obj(dm.features, spec.l2_lambda);
  auto bce = std::make_shared<WeightedBce>(dm.labels, spec.sample_weights);
  auto adversary_term = std::make_shared<AdversaryTerm>(dm.labels, dm.groups, use_label, alpha);
  predictor_obj.add_term(bce);

  Eigen::VectorXd start = spec.initial_params.value_or(Eigen::VectorXd::Zero(d + 1));
  GradientDescent predictor(predictor_obj, start, spec.learning_rate);

  // Warm-up so that the total number of predictor steps equals spec.epochs.
  const long adversarial_steps = static_cast<long>(schedule.rounds) * schedule.predictor_steps;
  const long warmup = std::max(0L, static_cast<long>(spec.epochs) - adversarial_steps);
  for (long i = 0; i < warmup; ++i) predictor.step();

  RowMatrix z(n, use_label ? 2 : 1);
  Objective adversary_obj(z, spec.l2_lambda);
  adversary_obj.add_term(std::make_shared<WeightedBce>(dm.groups, std::nullopt));
  Eigen::VectorXd adv_params = Eigen::VectorXd::Zero(z.cols() + 1);

  auto current_probs = [&] {
    const Eigen::VectorXd s = (dm.features * predictor.params().head(d)).array() + predictor.params()[d];
    return Eigen::VectorXd(s.unaryExpr([](double v) { return sigmoid(v); }));
  };

  std::vector<double> round_loss;
  for (int round = 0; round < schedule.rounds; ++round) {
    fill_adversary_inputs(z, current_probs(), dm.labels);
    GradientDescent adversary(adversary_obj, adv_params, schedule.adversary_learning_rate);
    for (int k = 0; k < schedule.adversary_steps; ++k) adversary.step();
    adv_params = adversary.params();

    if (alpha > 0) {
      adversary_term->set_adversary(adv_params);
      predictor_obj.clear_terms();
      predictor_obj.add_term(bce);
      predictor_obj.add_term(adversary_term);
    }
    try {
      predictor.refresh();
      for (int k = 0; k < schedule.predictor_steps; ++k) predictor.step();
    } catch (const Error& e) {
      throw Error(ErrorCode::NonFiniteLoss, "adversarial round " + std::to_string(round) + ": " + e.what());
    }
    if (!std::isfinite(predictor.loss()))
      throw Error(ErrorCode::NonFiniteLoss, "adversarial round " + std::to_string(round));
    round_loss.push_back(predictor.loss());
  }

  LinearModel m;
  m.weights = predictor.params().head(d);
  m.bias = predictor.params()[d];
  m.learning_rate = spec.learning_rate;
  m.epochs = spec.epochs;
  m.l2_lambda = spec.l2_lambda;
  m.seed = spec.seed;

  if (diagnostics) {
    fill_adversary_inputs(z, current_probs(), dm.labels);
    const Eigen::VectorXd t = (z * adv_params.head(z.cols())).array() + adv_params[z.cols()];
    double correct = 0;
    for (Eigen::Index i = 0; i < n; ++i) correct += ((t[i] >= 0) == (dm.groups[i] != 0)) ? 1 : 0;
    diagnostics->adversary_accuracy = correct / static_cast<double>(n);
    diagnostics->adversary_params = adv_params;
    diagnostics->predictor_loss = std::move(round_loss);
  }
  return m;
}

// ---------------------------------------------------------------- reject option

std::vector<int> apply_reject_option(std::span<const double> scores, std::span<const int> groups, double theta,
                                     int favored_group) {
  if (scores.size() != groups.size()) throw Error(ErrorCode::DimensionMismatch, "scores and groups differ in length");
  if (!(theta >= 0.0 && theta <= 0.5)) throw Error(ErrorCode::InvalidArgument, "theta must lie in [0, 0.5]");
  std::vector<int> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double s = scores[i];
    const bool in_band = theta > 0 && s >= 0.5 - theta && s <= 0.5 + theta;
    if (in_band)
      out[i] = (groups[i] != 0) == (favored_group != 0) ? 1 : 0;
    else
      out[i] = s >= 0.5 ? 1 : 0;
  }
  return out;
}

// ---------------------------------------------------------------- dispatch

FairBuild build_fair_model(const DesignMatrix& train_dm, const DesignMatrix& val, const MitigationConfig& cfg,
                           const TrainSpec& spec, const LinearModel* plain, const AdversarialSchedule& schedule) {
  cfg.validate();
  FairBuild out;
  out.model.method = cfg.method;
  out.model.metric = cfg.metric;
  out.model.strength = cfg.strength;
  switch (cfg.method) {
    case Method::Reweigh: {
      TrainSpec weighted = spec;
      weighted.sample_weights = reweigh_weights(train_dm.labels, train_dm.groups, cfg.strength);
      out.model.predictor = train(train_dm, weighted);
      break;
    }
    case Method::Penalized:
      out.model.predictor = train_penalized(train_dm, spec, cfg.metric, cfg.strength, &out.warnings);
      break;
    case Method::Adversarial:
      out.model.predictor = train_adversarial(train_dm, spec, cfg.metric, cfg.strength, schedule);
      break;
    case Method::RejectOption:
      out.model.predictor = plain ? *plain : train(train_dm, spec);
      out.model.post_rule = RejectRule{cfg.strength, 0};
      break;
  }
  const auto groups = to_binary(val.groups);
  const auto labels = to_binary(val.labels);
  const auto preds = predict(out.model, val.features, groups);
  out.validation = evaluate_predictions(preds, labels, groups);
  if (out.validation.degenerate_stratum)
    out.warnings.push_back("validation split has a group lacking one label value; EO branch scored 0");
  return out;
}

}  // namespace fairpipe
