#pragma once

#include <span>

#include <Eigen/Dense>

#include "fairreg/dataset.hpp"
#include "fairreg/fairness.hpp"
#include "fairreg/model.hpp"
#include "fairreg/params.hpp"

namespace fairreg {

/// Accuracy loss over a fixed set of rows, with the unified design matrix
/// materialized once so value/gradient/Hessian are dense products.
class LossTerm {
 public:
  LossTerm(const Dataset& data, std::span<const Index> indices, ModelMode mode);
  LossTerm(const Dataset& data, std::span<const Index> indices, ModelMode mode, LossKind kind);

  LossKind kind() const { return kind_; }
  ModelMode mode() const { return mode_; }
  Index feature_dim() const { return d_; }
  Index dim() const { return static_cast<Index>(design_.cols()); }
  Index rows() const { return static_cast<Index>(design_.rows()); }

  const Eigen::MatrixXd& design() const { return design_; }
  const Eigen::VectorXd& labels() const { return labels_; }

  double value(const Eigen::VectorXd& theta) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& theta) const;
  Eigen::MatrixXd hessian(const Eigen::VectorXd& theta) const;

  /// MSE only: the loss is theta' H theta / 2 - rhs' theta + const with
  /// H = (2/n) Z'Z and rhs = (2/n) Z'y.
  const Eigen::MatrixXd& mse_hessian() const { return gram_; }
  const Eigen::VectorXd& mse_rhs() const { return rhs_; }

 private:
  LossKind kind_;
  ModelMode mode_;
  Index d_;
  Eigen::MatrixXd design_;
  Eigen::VectorXd labels_;
  Eigen::MatrixXd gram_;
  Eigen::VectorXd rhs_;
};

/// loss(theta) + lambda * penalty(theta) + gamma * ||theta_w||^2, where theta_w
/// drops the intercept coordinates. Holds references: the loss term and the
/// penalty form must outlive the objective.
class Objective {
 public:
  Objective(const LossTerm& loss, const PenaltyForm& penalty, double lambda, double gamma);

  const LossTerm& loss() const { return *loss_; }
  const PenaltyForm& penalty() const { return *penalty_; }
  double lambda() const { return lambda_; }
  double gamma() const { return gamma_; }
  ModelMode mode() const { return loss_->mode(); }
  Index feature_dim() const { return loss_->feature_dim(); }
  Index dim() const { return loss_->dim(); }

  double ridge(const Eigen::VectorXd& theta) const;
  double value(const Eigen::VectorXd& theta) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& theta) const;
  Eigen::MatrixXd hessian(const Eigen::VectorXd& theta) const;

 private:
  const LossTerm* loss_;
  const PenaltyForm* penalty_;
  double lambda_;
  double gamma_;
  Eigen::VectorXd mask_;
};

struct SolverConfig {
  double tolerance = 1e-8;        // on the Euclidean gradient norm
  int max_iterations = 1000;
  double sufficient_decrease = 1e-4;
  double backtrack = 0.5;
};

struct SolveResult {
  ModelParams params;
  double objective = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

double objective_value(const Objective& obj, const ModelParams& params);

/// Exact minimizer of an MSE objective from its normal equations. Throws
/// NumericalError when the system is singular (typically gamma = 0 with
/// degenerate features).
SolveResult solve_linear_closed_form(const Objective& obj);

/// Damped Newton iterations with Armijo backtracking. The objective sequence
/// is non-increasing; iteration stops at the gradient tolerance, after
/// max_iterations, or when no step can decrease the objective any further
/// (the floating-point floor). Throws NumericalError on a non-finite
/// objective.
SolveResult solve_smooth(const Objective& obj, const ModelParams& init, const SolverConfig& cfg = {});

/// Closed form for MSE objectives, solve_smooth otherwise.
SolveResult solve(const Objective& obj, const ModelParams& init, const SolverConfig& cfg = {});

/// Largest coordinate-wise relative error between central differences with
/// step h and the analytic gradient, each error scaled by max(1, |g_i|).
double finite_difference_check(const Objective& obj, const ModelParams& params, double h);

}  // namespace fairreg
