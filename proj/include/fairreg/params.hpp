#pragma once

#include <string>

#include <Eigen/Dense>

#include "fairreg/dataset.hpp"

namespace fairreg {

/// One model shared by both groups, or one model per group.
enum class ModelMode { SingleModel, SeparateModels };

std::string to_string(ModelMode mode);
ModelMode parse_mode(const std::string& name);

/// Linear model parameters stored as the unified parameter vector theta.
///
/// SingleModel:    theta = (w, b)              size d + 1
/// SeparateModels: theta = (w_1, b_1, w_2, b_2) size 2 (d + 1)
///
/// Every penalty form, loss gradient and solver works in this space.
class ModelParams {
 public:
  static ModelParams single(const Eigen::VectorXd& w, double b);
  static ModelParams separate(const Eigen::VectorXd& w1, double b1, const Eigen::VectorXd& w2, double b2);
  static ModelParams zeros(ModelMode mode, Index feature_dim);
  static ModelParams from_unified(ModelMode mode, Index feature_dim, Eigen::VectorXd theta);

  static Index unified_dim(ModelMode mode, Index feature_dim);
  /// 1 on feature-weight coordinates, 0 on intercepts (which ridge never touches).
  static Eigen::VectorXd weight_mask(ModelMode mode, Index feature_dim);

  ModelMode mode() const { return mode_; }
  Index feature_dim() const { return d_; }
  const Eigen::VectorXd& unified() const { return theta_; }

  /// Weights and intercept used for members of group g. In SingleModel mode
  /// both groups share them.
  Eigen::VectorXd weights(int group = 1) const;
  double intercept(int group = 1) const;

  /// Euclidean norm of all non-intercept coordinates.
  double weight_norm() const;

 private:
  ModelParams(ModelMode mode, Index d, Eigen::VectorXd theta) : mode_(mode), d_(d), theta_(std::move(theta)) {}

  Eigen::Index block_offset(int group) const;

  ModelMode mode_;
  Index d_;
  Eigen::VectorXd theta_;
};

}  // namespace fairreg
