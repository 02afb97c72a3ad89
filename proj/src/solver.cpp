#include "fairreg/solver.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <utility>

#include <fmt/format.h>

#include "fairreg/error.hpp"

namespace fairreg {

LossTerm::LossTerm(const Dataset& data, std::span<const Index> indices, ModelMode mode)
    : LossTerm(data, indices, mode, loss_kind_for(data.task())) {}

LossTerm::LossTerm(const Dataset& data, std::span<const Index> indices, ModelMode mode, LossKind kind)
    : kind_(kind), mode_(mode), d_(data.dim()) {
  if (indices.empty()) throw ValidationError("loss term over an empty index set");
  if (kind != loss_kind_for(data.task()))
    throw ValidationError(fmt::format("loss {} does not match a {} task", to_string(kind), to_string(data.task())));
  design_ = design_matrix(data, indices, mode);
  labels_.resize(static_cast<Eigen::Index>(indices.size()));
  for (std::size_t r = 0; r < indices.size(); ++r) labels_[static_cast<Eigen::Index>(r)] = data.label(indices[r]);
  if (kind_ == LossKind::MeanSquaredError) {
    const double scale = 2.0 / static_cast<double>(indices.size());
    gram_ = scale * (design_.transpose() * design_);
    rhs_ = scale * (design_.transpose() * labels_);
  }
}

double LossTerm::value(const Eigen::VectorXd& theta) const {
  const Eigen::VectorXd scores = design_ * theta;
  const double n = static_cast<double>(rows());
  if (kind_ == LossKind::MeanSquaredError) return (scores - labels_).squaredNorm() / n;
  double sum = 0.0;
  for (Eigen::Index r = 0; r < scores.size(); ++r) sum += softplus(-labels_[r] * scores[r]);
  return sum / n;
}

Eigen::VectorXd LossTerm::gradient(const Eigen::VectorXd& theta) const {
  const Eigen::VectorXd scores = design_ * theta;
  const double n = static_cast<double>(rows());
  if (kind_ == LossKind::MeanSquaredError) return (2.0 / n) * (design_.transpose() * (scores - labels_));
  Eigen::VectorXd slope(scores.size());
  for (Eigen::Index r = 0; r < scores.size(); ++r) slope[r] = -labels_[r] * sigmoid(-labels_[r] * scores[r]);
  return design_.transpose() * slope / n;
}

Eigen::MatrixXd LossTerm::hessian(const Eigen::VectorXd& theta) const {
  if (kind_ == LossKind::MeanSquaredError) return gram_;
  const Eigen::VectorXd scores = design_ * theta;
  Eigen::VectorXd curvature(scores.size());
  for (Eigen::Index r = 0; r < scores.size(); ++r) curvature[r] = sigmoid(scores[r]) * sigmoid(-scores[r]);
  const double n = static_cast<double>(rows());
  return design_.transpose() * curvature.asDiagonal() * design_ / n;
}

// ---------------------------------------------------------------------------

Objective::Objective(const LossTerm& loss, const PenaltyForm& penalty, double lambda, double gamma)
    : loss_(&loss), penalty_(&penalty), lambda_(lambda), gamma_(gamma) {
  if (loss.mode() != penalty.mode() || loss.feature_dim() != penalty.feature_dim())
    throw ValidationError("loss term and penalty form disagree on model mode or feature dimension");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ValidationError(fmt::format("lambda {} must be >= 0", lambda));
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ValidationError(fmt::format("gamma {} must be >= 0", gamma));
  mask_ = ModelParams::weight_mask(loss.mode(), loss.feature_dim());
}

double Objective::ridge(const Eigen::VectorXd& theta) const { return theta.cwiseProduct(mask_).squaredNorm(); }

double Objective::value(const Eigen::VectorXd& theta) const {
  if (static_cast<Index>(theta.size()) != dim())
    throw ValidationError(fmt::format("parameter dimension {} does not match objective dimension {}", theta.size(),
                                      dim()));
  double v = loss_->value(theta);
  if (lambda_ > 0.0) v += lambda_ * eval_penalty(*penalty_, theta);
  if (gamma_ > 0.0) v += gamma_ * ridge(theta);
  return v;
}

Eigen::VectorXd Objective::gradient(const Eigen::VectorXd& theta) const {
  Eigen::VectorXd g = loss_->gradient(theta);
  if (lambda_ > 0.0) g += lambda_ * penalty_gradient(*penalty_, theta);
  if (gamma_ > 0.0) g += 2.0 * gamma_ * theta.cwiseProduct(mask_);
  return g;
}

Eigen::MatrixXd Objective::hessian(const Eigen::VectorXd& theta) const {
  Eigen::MatrixXd h = loss_->hessian(theta);
  if (lambda_ > 0.0) h += lambda_ * penalty_->hessian();
  if (gamma_ > 0.0) h.diagonal() += 2.0 * gamma_ * mask_;
  return h;
}

double objective_value(const Objective& obj, const ModelParams& params) {
  if (params.mode() != obj.mode() || params.feature_dim() != obj.feature_dim())
    throw ValidationError("model parameters do not match the objective's mode or dimension");
  return obj.value(params.unified());
}

// ---------------------------------------------------------------------------

namespace {

SolveResult make_result(const Objective& obj, Eigen::VectorXd theta, int iterations, bool converged) {
  const double value = obj.value(theta);
  const double gnorm = obj.gradient(theta).norm();
  return SolveResult{ModelParams::from_unified(obj.mode(), obj.feature_dim(), std::move(theta)), value, gnorm,
                     iterations, converged};
}

// Newton direction from a Cholesky factorization, shifted towards the
// gradient direction when the Hessian is (numerically) singular.
Eigen::VectorXd descent_direction(const Eigen::MatrixXd& h, const Eigen::VectorXd& g) {
  Eigen::LLT<Eigen::MatrixXd> llt(h);
  if (llt.info() == Eigen::Success) {
    Eigen::VectorXd p = -llt.solve(g);
    if (p.allFinite() && p.dot(g) < 0.0) return p;
  }
  const double scale = std::max(1.0, h.diagonal().cwiseAbs().maxCoeff());
  for (double shift = 1e-10 * scale; shift < 1e10 * scale; shift *= 10.0) {
    Eigen::MatrixXd shifted = h;
    shifted.diagonal().array() += shift;
    Eigen::LLT<Eigen::MatrixXd> s(shifted);
    if (s.info() != Eigen::Success) continue;
    Eigen::VectorXd p = -s.solve(g);
    if (p.allFinite() && p.dot(g) < 0.0) return p;
  }
  return -g;
}

}  // namespace

SolveResult solve_linear_closed_form(const Objective& obj) {
  if (obj.loss().kind() != LossKind::MeanSquaredError)
    throw ValidationError("closed-form solve requires a mean-squared-error objective");
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(obj.dim()));
  const Eigen::MatrixXd h = obj.hessian(zero);
  const Eigen::VectorXd& rhs = obj.loss().mse_rhs();

  Eigen::LLT<Eigen::MatrixXd> llt(h);
  if (llt.info() != Eigen::Success || !(llt.rcond() > 1e-14))
    throw NumericalError(fmt::format(
        "singular normal equations at lambda={}, gamma={}; features are degenerate, use gamma > 0", obj.lambda(),
        obj.gamma()));
  Eigen::VectorXd theta = llt.solve(rhs);
  // one step of iterative refinement
  theta += llt.solve(rhs - h * theta);
  if (!theta.allFinite()) throw NumericalError("closed-form solve produced non-finite parameters");
  return make_result(obj, std::move(theta), 0, true);
}

SolveResult solve_smooth(const Objective& obj, const ModelParams& init, const SolverConfig& cfg) {
  if (!(cfg.tolerance > 0.0)) throw ValidationError("solver tolerance must be positive");
  if (cfg.max_iterations < 1) throw ValidationError("solver needs at least one iteration");
  if (init.mode() != obj.mode() || init.feature_dim() != obj.feature_dim())
    throw ValidationError("initial parameters do not match the objective's mode or dimension");

  Eigen::VectorXd theta = init.unified();
  double f = obj.value(theta);
  if (!std::isfinite(f))
    throw NumericalError(fmt::format("objective is non-finite ({}) at the initial point", f));

  int iterations = 0;
  bool converged = false;
  while (true) {
    const Eigen::VectorXd g = obj.gradient(theta);
    const double gnorm = g.norm();
    if (!std::isfinite(gnorm)) throw NumericalError(fmt::format("non-finite gradient at iteration {}", iterations));
    if (gnorm <= cfg.tolerance) {
      converged = true;
      break;
    }
    if (iterations >= cfg.max_iterations) break;

    const Eigen::VectorXd p = descent_direction(obj.hessian(theta), g);
    const double slope = g.dot(p);
    double t = 1.0;
    bool accepted = false;
    std::optional<std::pair<double, double>> level_step;  // (t, f) of a step that does not increase f
    while (t > 1e-16) {
      const Eigen::VectorXd candidate = theta + t * p;
      const double fc = obj.value(candidate);
      if (std::isfinite(fc)) {
        if (fc <= f + cfg.sufficient_decrease * t * slope) {
          theta = candidate;
          f = fc;
          accepted = true;
          break;
        }
        if (fc <= f && !level_step) level_step = {t, fc};
      }
      t *= cfg.backtrack;
    }
    if (!accepted && level_step) {
      // At the rounding floor Armijo can fail even for a good step; keep it
      // only if it does not raise the objective and shrinks the gradient.
      const Eigen::VectorXd candidate = theta + level_step->first * p;
      if (obj.gradient(candidate).norm() < gnorm) {
        theta = candidate;
        f = level_step->second;
        accepted = true;
      }
    }
    if (!accepted) break;
    ++iterations;
  }
  return make_result(obj, std::move(theta), iterations, converged);
}

SolveResult solve(const Objective& obj, const ModelParams& init, const SolverConfig& cfg) {
  if (obj.loss().kind() == LossKind::MeanSquaredError) return solve_linear_closed_form(obj);
  return solve_smooth(obj, init, cfg);
}

double finite_difference_check(const Objective& obj, const ModelParams& params, double h) {
  if (!(h > 0.0)) throw ValidationError("finite-difference step must be positive");
  if (params.mode() != obj.mode() || params.feature_dim() != obj.feature_dim())
    throw ValidationError("model parameters do not match the objective's mode or dimension");
  const Eigen::VectorXd theta = params.unified();
  const Eigen::VectorXd g = obj.gradient(theta);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    Eigen::VectorXd up = theta, down = theta;
    up[i] += h;
    down[i] -= h;
    const double fd = (obj.value(up) - obj.value(down)) / (2.0 * h);
    worst = std::max(worst, std::abs(fd - g[i]) / std::max(1.0, std::abs(g[i])));
  }
  return worst;
}

}  // namespace fairreg
