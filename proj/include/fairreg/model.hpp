#pragma once

#include <span>
#include <string>

#include <Eigen/Dense>

#include "fairreg/dataset.hpp"
#include "fairreg/params.hpp"

namespace fairreg {

enum class LossKind { MeanSquaredError, LogLoss };

std::string to_string(LossKind kind);
/// MeanSquaredError for linear tasks, LogLoss for logistic tasks.
LossKind loss_kind_for(Task task);

/// w_g . x + b_g (SingleModel ignores g).
double predict(const ModelParams& params, const Eigen::VectorXd& x, int group);

/// Logistic function, stable over the whole real line.
double sigmoid(double score);
/// log(1 + exp(z)) without overflow.
double softplus(double z);

/// Pr[y = +1] = sigmoid(predict(params, x, group)).
double predict_probability(const ModelParams& params, const Eigen::VectorXd& x, int group);

/// Row of the unified design matrix: predict(params, x, g) == design_row(x, g, mode) . theta.
Eigen::VectorXd design_row(const Eigen::VectorXd& x, int group, ModelMode mode);
/// Stacked design rows for `indices`.
Eigen::MatrixXd design_matrix(const Dataset& data, std::span<const Index> indices, ModelMode mode);

/// MSE: mean of (prediction - y)^2. LogLoss: mean of log(1 + exp(-y score)).
double accuracy_loss(const ModelParams& params, const Dataset& data, std::span<const Index> indices,
                     LossKind kind);

Eigen::VectorXd accuracy_loss_gradient(const ModelParams& params, const Dataset& data,
                                       std::span<const Index> indices, LossKind kind);

/// Reporting metric for frontiers: MSE for linear tasks; for logistic tasks
/// the MSE of predicted probabilities against labels mapped to {0, 1}.
double prediction_mse(const ModelParams& params, const Dataset& data, std::span<const Index> indices);

/// The accuracy-optimal model with zero feature weights. Both intercepts are
/// set to the same value in SeparateModels mode so the predictor stays
/// constant across groups. Logistic log-odds are clamped to |b| <= 20.
ModelParams best_constant_predictor(const Dataset& data, std::span<const Index> indices, LossKind kind,
                                    ModelMode mode = ModelMode::SingleModel);

inline constexpr double kLogOddsClamp = 20.0;

}  // namespace fairreg
