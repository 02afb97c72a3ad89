#include "fairreg/model.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "fairreg/error.hpp"

namespace fairreg {

// ---------------------------------------------------------------------------
// ModelParams

std::string to_string(ModelMode mode) { return mode == ModelMode::SingleModel ? "single" : "separate"; }

ModelMode parse_mode(const std::string& name) {
  if (name == "single") return ModelMode::SingleModel;
  if (name == "separate") return ModelMode::SeparateModels;
  throw ValidationError(fmt::format("unknown model mode '{}' (expected single or separate)", name));
}

Index ModelParams::unified_dim(ModelMode mode, Index feature_dim) {
  return mode == ModelMode::SingleModel ? feature_dim + 1 : 2 * (feature_dim + 1);
}

Eigen::VectorXd ModelParams::weight_mask(ModelMode mode, Index feature_dim) {
  const auto d = static_cast<Eigen::Index>(feature_dim);
  Eigen::VectorXd mask = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(unified_dim(mode, feature_dim)));
  mask[d] = 0.0;
  if (mode == ModelMode::SeparateModels) mask[2 * d + 1] = 0.0;
  return mask;
}

ModelParams ModelParams::single(const Eigen::VectorXd& w, double b) {
  Eigen::VectorXd theta(w.size() + 1);
  theta << w, b;
  return ModelParams(ModelMode::SingleModel, static_cast<Index>(w.size()), std::move(theta));
}

ModelParams ModelParams::separate(const Eigen::VectorXd& w1, double b1, const Eigen::VectorXd& w2, double b2) {
  if (w1.size() != w2.size()) throw ValidationError("per-group weight vectors differ in length");
  Eigen::VectorXd theta(2 * (w1.size() + 1));
  theta << w1, b1, w2, b2;
  return ModelParams(ModelMode::SeparateModels, static_cast<Index>(w1.size()), std::move(theta));
}

ModelParams ModelParams::zeros(ModelMode mode, Index feature_dim) {
  return ModelParams(mode, feature_dim,
                     Eigen::VectorXd::Zero(static_cast<Eigen::Index>(unified_dim(mode, feature_dim))));
}

ModelParams ModelParams::from_unified(ModelMode mode, Index feature_dim, Eigen::VectorXd theta) {
  if (static_cast<Index>(theta.size()) != unified_dim(mode, feature_dim))
    throw ValidationError(fmt::format("unified vector of length {} does not fit {} mode with d={}", theta.size(),
                                      to_string(mode), feature_dim));
  if (!theta.allFinite()) throw ValidationError("model parameters must be finite");
  return ModelParams(mode, feature_dim, std::move(theta));
}

Eigen::Index ModelParams::block_offset(int group) const {
  if (group != 1 && group != 2) throw ValidationError(fmt::format("invalid group id {}", group));
  if (mode_ == ModelMode::SingleModel || group == 1) return 0;
  return static_cast<Eigen::Index>(d_ + 1);
}

Eigen::VectorXd ModelParams::weights(int group) const {
  return theta_.segment(block_offset(group), static_cast<Eigen::Index>(d_));
}

double ModelParams::intercept(int group) const { return theta_[block_offset(group) + static_cast<Eigen::Index>(d_)]; }

double ModelParams::weight_norm() const { return theta_.cwiseProduct(weight_mask(mode_, d_)).norm(); }

// ---------------------------------------------------------------------------
// Predictions and losses

std::string to_string(LossKind kind) { return kind == LossKind::MeanSquaredError ? "mse" : "logloss"; }

LossKind loss_kind_for(Task task) {
  return task == Task::Linear ? LossKind::MeanSquaredError : LossKind::LogLoss;
}

double predict(const ModelParams& params, const Eigen::VectorXd& x, int group) {
  if (static_cast<Index>(x.size()) != params.feature_dim())
    throw ValidationError(
        fmt::format("feature vector has {} entries, model expects {}", x.size(), params.feature_dim()));
  return params.weights(group).dot(x) + params.intercept(group);
}

double sigmoid(double score) {
  if (score >= 0) return 1.0 / (1.0 + std::exp(-score));
  const double e = std::exp(score);
  return e / (1.0 + e);
}

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double predict_probability(const ModelParams& params, const Eigen::VectorXd& x, int group) {
  return sigmoid(predict(params, x, group));
}

Eigen::VectorXd design_row(const Eigen::VectorXd& x, int group, ModelMode mode) {
  const Eigen::Index d = x.size();
  if (mode == ModelMode::SingleModel) {
    Eigen::VectorXd z(d + 1);
    z << x, 1.0;
    return z;
  }
  if (group != 1 && group != 2) throw ValidationError(fmt::format("invalid group id {}", group));
  Eigen::VectorXd z = Eigen::VectorXd::Zero(2 * (d + 1));
  const Eigen::Index off = group == 1 ? 0 : d + 1;
  z.segment(off, d) = x;
  z[off + d] = 1.0;
  return z;
}

Eigen::MatrixXd design_matrix(const Dataset& data, std::span<const Index> indices, ModelMode mode) {
  const auto cols = static_cast<Eigen::Index>(ModelParams::unified_dim(mode, data.dim()));
  Eigen::MatrixXd z(static_cast<Eigen::Index>(indices.size()), cols);
  for (std::size_t r = 0; r < indices.size(); ++r)
    z.row(static_cast<Eigen::Index>(r)) = design_row(data.row(indices[r]), data.group(indices[r]), mode);
  return z;
}

namespace {

void check_loss_args(const ModelParams& params, const Dataset& data, std::span<const Index> indices,
                     LossKind kind) {
  if (indices.empty()) throw ValidationError("accuracy loss over an empty index set");
  if (kind != loss_kind_for(data.task()))
    throw ValidationError(fmt::format("loss {} does not match a {} task", to_string(kind), to_string(data.task())));
  if (params.feature_dim() != data.dim())
    throw ValidationError(fmt::format("model has {} features, dataset has {}", params.feature_dim(), data.dim()));
}

}  // namespace

double accuracy_loss(const ModelParams& params, const Dataset& data, std::span<const Index> indices,
                     LossKind kind) {
  check_loss_args(params, data, indices, kind);
  double sum = 0.0;
  for (Index i : indices) {
    const double score = predict(params, data.row(i), data.group(i));
    const double y = data.label(i);
    sum += kind == LossKind::MeanSquaredError ? (score - y) * (score - y) : softplus(-y * score);
  }
  return sum / static_cast<double>(indices.size());
}

Eigen::VectorXd accuracy_loss_gradient(const ModelParams& params, const Dataset& data,
                                       std::span<const Index> indices, LossKind kind) {
  check_loss_args(params, data, indices, kind);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(params.unified().size());
  for (Index i : indices) {
    const Eigen::VectorXd z = design_row(data.row(i), data.group(i), params.mode());
    const double score = z.dot(params.unified());
    const double y = data.label(i);
    // d/ds of (s - y)^2 and of log(1 + exp(-y s))
    const double slope = kind == LossKind::MeanSquaredError ? 2.0 * (score - y) : -y * sigmoid(-y * score);
    grad += slope * z;
  }
  return grad / static_cast<double>(indices.size());
}

double prediction_mse(const ModelParams& params, const Dataset& data, std::span<const Index> indices) {
  if (indices.empty()) throw ValidationError("prediction MSE over an empty index set");
  double sum = 0.0;
  for (Index i : indices) {
    double err = 0.0;
    if (data.task() == Task::Linear) {
      err = predict(params, data.row(i), data.group(i)) - data.label(i);
    } else {
      err = predict_probability(params, data.row(i), data.group(i)) - (data.label(i) > 0 ? 1.0 : 0.0);
    }
    sum += err * err;
  }
  return sum / static_cast<double>(indices.size());
}

ModelParams best_constant_predictor(const Dataset& data, std::span<const Index> indices, LossKind kind,
                                    ModelMode mode) {
  if (indices.empty()) throw ValidationError("best constant predictor over an empty index set");
  if (kind != loss_kind_for(data.task()))
    throw ValidationError(fmt::format("loss {} does not match a {} task", to_string(kind), to_string(data.task())));
  double b = 0.0;
  if (kind == LossKind::MeanSquaredError) {
    for (Index i : indices) b += data.label(i);
    b /= static_cast<double>(indices.size());
  } else {
    std::size_t positives = 0;
    for (Index i : indices)
      if (data.label(i) > 0) ++positives;
    const double p = static_cast<double>(positives) / static_cast<double>(indices.size());
    if (p <= 0.0) b = -kLogOddsClamp;
    else if (p >= 1.0) b = kLogOddsClamp;
    else b = std::clamp(std::log(p / (1.0 - p)), -kLogOddsClamp, kLogOddsClamp);
  }
  const Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(data.dim()));
  if (mode == ModelMode::SingleModel) return ModelParams::single(w, b);
  return ModelParams::separate(w, b, w, b);
}

}  // namespace fairreg
