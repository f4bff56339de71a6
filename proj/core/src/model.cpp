#include "fairpipe/model.hpp"

#include <cmath>

#include "fairpipe/error.hpp"

namespace fairpipe {

void TrainSpec::validate(Eigen::Index n_rows) const {
  if (!(learning_rate > 0) || !std::isfinite(learning_rate))
    throw Error(ErrorCode::InvalidArgument, "learning_rate must be positive");
  if (epochs < 0) throw Error(ErrorCode::InvalidArgument, "epochs must be non-negative");
  if (!(l2_lambda >= 0) || !std::isfinite(l2_lambda))
    throw Error(ErrorCode::InvalidArgument, "l2_lambda must be non-negative");
  if (sample_weights) {
    if (sample_weights->size() != n_rows)
      throw Error(ErrorCode::DimensionMismatch, "sample_weights length differs from row count");
    if (!sample_weights->allFinite() || (sample_weights->array() < 0).any())
      throw Error(ErrorCode::InvalidArgument, "sample_weights must be finite and non-negative");
    if (sample_weights->sum() <= 0) throw Error(ErrorCode::InvalidArgument, "sample_weights are all zero");
  }
}

Eigen::VectorXd LinearModel::params() const {
  Eigen::VectorXd p(weights.size() + 1);
  p << weights, bias;
  return p;
}

Json to_json(const LinearModel& m) {
  return {{"weights", std::vector<double>(m.weights.data(), m.weights.data() + m.weights.size())},
          {"bias", m.bias},
          {"trained_on", m.trained_on},
          {"hyper",
           {{"learning_rate", m.learning_rate},
            {"epochs", m.epochs},
            {"l2_lambda", m.l2_lambda},
            {"seed", m.seed}}}};
}

LinearModel model_from_json(const Json& j) {
  LinearModel m;
  const auto w = j.at("weights").get<std::vector<double>>();
  m.weights = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
  m.bias = j.at("bias").get<double>();
  m.trained_on = j.at("trained_on").get<std::string>();
  const auto& h = j.at("hyper");
  m.learning_rate = h.at("learning_rate").get<double>();
  m.epochs = h.at("epochs").get<int>();
  m.l2_lambda = h.at("l2_lambda").get<double>();
  m.seed = h.at("seed").get<std::uint64_t>();
  return m;
}

// ---------------------------------------------------------------- losses

WeightedBce::WeightedBce(const Eigen::VectorXd& labels, std::optional<Eigen::VectorXd> weights)
    : labels_(labels) {
  if (weights) {
    const double mean = weights->mean();
    weights_ = *weights / mean;
  } else {
    weights_ = Eigen::VectorXd::Ones(labels.size());
  }
}

double WeightedBce::eval(const Eigen::VectorXd& scores, const Eigen::VectorXd& probs,
                         Eigen::VectorXd& dscores) const {
  const auto n = static_cast<double>(scores.size());
  double loss = 0.0;
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    const double s = scores[i];
    // log(1 + e^{-|s|}) + max(s, 0) - y*s is the stable form of BCE on logits.
    const double l = std::log1p(std::exp(-std::abs(s))) + std::max(s, 0.0) - labels_[i] * s;
    loss += weights_[i] * l;
    dscores[i] += weights_[i] * (probs[i] - labels_[i]) / n;
  }
  return loss / n;
}

Objective::Objective(const RowMatrix& features, double l2_lambda) : features_(features), l2_(l2_lambda) {}

void Objective::add_term(std::shared_ptr<const ScoreLoss> term) { terms_.push_back(std::move(term)); }

double Objective::value_and_grad(const Eigen::VectorXd& params, Eigen::VectorXd* grad) const {
  const Eigen::Index d = features_.cols();
  const auto w = params.head(d);
  const double b = params[d];
  const Eigen::VectorXd scores = (features_ * w).array() + b;
  const Eigen::VectorXd probs = scores.unaryExpr([](double z) { return sigmoid(z); });
  Eigen::VectorXd dscores = Eigen::VectorXd::Zero(scores.size());
  double value = 0.0;
  for (const auto& t : terms_) value += t->eval(scores, probs, dscores);
  value += 0.5 * l2_ * w.squaredNorm();
  if (grad) {
    grad->resize(d + 1);
    grad->head(d).noalias() = features_.transpose() * dscores;
    grad->head(d) += l2_ * w;
    (*grad)[d] = dscores.sum();
  }
  return value;
}

// ---------------------------------------------------------------- optimizer

GradientDescent::GradientDescent(const Objective& objective, Eigen::VectorXd start, double learning_rate)
    : objective_(objective), params_(std::move(start)), lr_(learning_rate), step_size_(learning_rate) {
  refresh();
}

void GradientDescent::refresh() {
  loss_ = objective_.value_and_grad(params_, &grad_);
  if (!std::isfinite(loss_) || !grad_.allFinite())
    throw Error(ErrorCode::NonFiniteLoss, "objective not finite at step " + std::to_string(steps_));
}

bool GradientDescent::step() {
  double eta = std::min(lr_, 2.0 * step_size_);
  Eigen::VectorXd grad;
  for (int halvings = 0; halvings < 60; ++halvings, eta *= 0.5) {
    Eigen::VectorXd candidate = params_ - eta * grad_;
    const double value = objective_.value_and_grad(candidate, &grad);
    if (std::isfinite(value) && value <= loss_ && grad.allFinite()) {
      params_ = std::move(candidate);
      grad_ = std::move(grad);
      loss_ = value;
      step_size_ = eta;
      ++steps_;
      return true;
    }
  }
  ++steps_;
  return false;
}

// ---------------------------------------------------------------- training

LinearModel train(const DesignMatrix& dm, const TrainSpec& spec,
                  const std::vector<std::shared_ptr<const ScoreLoss>>& extra_terms,
                  const EpochCallback& on_epoch) {
  const Eigen::Index n = dm.rows(), d = dm.cols();
  spec.validate(n);
  if (n < 2) throw Error(ErrorCode::DegenerateLabels, "need at least two rows");
  const double positives = dm.labels.sum();
  if (positives == 0 || positives == static_cast<double>(n))
    throw Error(ErrorCode::DegenerateLabels, "training labels contain a single class");

  Objective objective(dm.features, spec.l2_lambda);
  objective.add_term(std::make_shared<WeightedBce>(dm.labels, spec.sample_weights));
  for (const auto& t : extra_terms) objective.add_term(t);

  Eigen::VectorXd start = Eigen::VectorXd::Zero(d + 1);
  if (spec.initial_params) {
    if (spec.initial_params->size() != d + 1)
      throw Error(ErrorCode::DimensionMismatch, "initial_params has the wrong length");
    start = *spec.initial_params;
  }
  GradientDescent gd(objective, start, spec.learning_rate);
  for (int epoch = 0; epoch < spec.epochs; ++epoch) {
    gd.step();
    if (on_epoch) on_epoch(epoch, gd.loss());
  }

  LinearModel m;
  m.weights = gd.params().head(d);
  m.bias = gd.params()[d];
  m.learning_rate = spec.learning_rate;
  m.epochs = spec.epochs;
  m.l2_lambda = spec.l2_lambda;
  m.seed = spec.seed;
  if (!m.weights.allFinite() || !std::isfinite(m.bias))
    throw Error(ErrorCode::NonFiniteLoss, "parameters diverged at epoch " + std::to_string(spec.epochs));
  return m;
}

Eigen::VectorXd predict_proba(const LinearModel& m, const RowMatrix& features) {
  if (features.cols() != m.weights.size())
    throw Error(ErrorCode::DimensionMismatch, "model expects " + std::to_string(m.weights.size()) +
                                                  " features, got " + std::to_string(features.cols()));
  const Eigen::VectorXd scores = (features * m.weights).array() + m.bias;
  return scores.unaryExpr([](double z) { return sigmoid(z); });
}

double grad_check(const std::function<double(const Eigen::VectorXd&)>& loss,
                  const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& grad,
                  const Eigen::VectorXd& point, double h) {
  const Eigen::VectorXd analytic = grad(point);
  double worst = 0.0;
  Eigen::VectorXd x = point;
  for (Eigen::Index i = 0; i < point.size(); ++i) {
    x[i] = point[i] + h;
    const double up = loss(x);
    x[i] = point[i] - h;
    const double down = loss(x);
    x[i] = point[i];
    const double numeric = (up - down) / (2 * h);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-4});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  return worst;
}

}  // namespace fairpipe
