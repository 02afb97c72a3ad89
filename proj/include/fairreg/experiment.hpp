#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fairreg/dataset.hpp"
#include "fairreg/fairness.hpp"
#include "fairreg/model.hpp"
#include "fairreg/solver.hpp"

namespace fairreg {

/// `count` points log-spaced from lo to hi inclusive.
std::vector<double> log_spaced(double lo, double hi, std::size_t count);

/// 0 followed by 24 log-spaced values in [1e-3, 1e3]: 25 points in all.
std::vector<double> default_lambda_grid();

/// Candidate ridge weights, ascending and positive.
struct GammaGrid {
  std::vector<double> values;

  /// 13 log-spaced values in [1e-4, 1e2].
  static GammaGrid standard();
  void validate() const;
};

struct ExperimentOptions {
  std::size_t folds = 10;
  std::uint64_t seed = 0;
  /// Pair weight; Gaussian for linear tasks and Indicator for logistic tasks when unset.
  std::optional<DistanceWeight> weight;
  /// Pairs drawn per row set; 2 * min(n_1, n_2) when unset.
  std::optional<std::size_t> pair_count;
  HybridWeights hybrid;
  bool normalize = true;
  /// Worker threads for independent solves. Results do not depend on it.
  std::size_t jobs = 1;
  SolverConfig solver;
};

/// One cross-validation fold with everything derived from its training rows.
struct FoldData {
  Dataset data;  // all rows, normalized with statistics of `train` only
  IndexList train;
  IndexList test;
  CrossPairSet train_pairs;  // sampled within `train`
  CrossPairSet test_pairs;   // sampled within `test`
};

/// Folds, normalizations and cross pairs fixed once per dataset and seed,
/// then shared by every penalty kind, model mode, lambda and gamma.
class ExperimentContext {
 public:
  ExperimentContext(const Dataset& raw, ExperimentOptions options);

  const ExperimentOptions& options() const { return options_; }
  Task task() const { return full_data_.task(); }
  LossKind loss_kind() const { return loss_kind_for(task()); }
  const DistanceWeight& weight() const { return weight_; }
  const FoldPlan& folds() const { return folds_; }
  const std::vector<FoldData>& fold_data() const { return fold_data_; }

  /// All rows normalized together, with pairs drawn over all rows. Used for
  /// in-sample paths, price-of-fairness curves and final refits.
  const Dataset& full_data() const { return full_data_; }
  const CrossPairSet& full_pairs() const { return full_pairs_; }

 private:
  ExperimentOptions options_;
  DistanceWeight weight_;
  FoldPlan folds_;
  std::vector<FoldData> fold_data_;
  Dataset full_data_;
  CrossPairSet full_pairs_;
};

/// Uniform subsample of floor(fraction * n) rows (at least 1), kept in order.
Dataset subsample_rows(const Dataset& data, double fraction, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Held-out evaluation

struct FoldEvaluation {
  double accuracy = 0.0;  // training loss kind (MSE or log loss)
  double fairness = 0.0;

  double combined(double lambda) const { return accuracy + lambda * fairness; }
};

/// Accuracy loss and fairness penalty of `params` on held-out rows, kept
/// separate so callers can weight or report them independently. A hybrid
/// bucket with no pairs in the fold contributes nothing.
FoldEvaluation evaluate_on_fold(const ModelParams& params, const Dataset& data, std::span<const Index> fold,
                                PenaltyKind kind, const CrossPairSet& pairs, LossKind loss,
                                HybridWeights hybrid = {});

// ---------------------------------------------------------------------------
// Ridge weight selection by cross-validation

struct CVCell {
  double accuracy = 0.0;  // held-out accuracy loss
  double fairness = 0.0;  // held-out fairness penalty
  double loss = 0.0;      // accuracy + lambda * fairness
  int iterations = 0;
  bool converged = false;
  Eigen::VectorXd theta;  // model trained without this fold
};

struct CVReport {
  double lambda = 0.0;
  std::vector<double> gammas;
  std::vector<double> total_loss;         // L(j), summed over folds
  std::size_t selected = 0;               // argmin of total_loss, ties to the smaller gamma
  std::vector<std::vector<CVCell>> cells;  // [gamma][fold]

  double selected_gamma() const { return gammas.at(selected); }
};

/// Index of the smallest entry; entries within 1e-12 (relative) of the
/// minimum count as ties and the first one wins.
std::size_t argmin_with_ties(std::span<const double> values);

CVReport select_gamma_cv(const ExperimentContext& ctx, double lambda, PenaltyKind kind, ModelMode mode,
                         const GammaGrid& grid);

// ---------------------------------------------------------------------------
// Frontiers

struct FrontierPoint {
  double lambda = 0.0;
  double gamma = 0.0;
  double cv_loss = 0.0;
  // Fold averages. Accuracy is MSE for linear tasks and the MSE of
  // predicted probabilities for logistic tasks.
  double train_acc_loss = 0.0;
  double test_acc_loss = 0.0;
  double train_fair = 0.0;
  double test_fair = 0.0;
  // Refit on all rows at (lambda, gamma).
  double weight_norm = 0.0;
  double intercept_1 = 0.0;
  double intercept_2 = 0.0;
  bool converged = true;
};

using FrontierProgress = std::function<void(const FrontierPoint&)>;

/// For each lambda (ascending, starting at 0): gamma by cross-validation,
/// fold-averaged train/test metrics at that gamma, and a full-data refit.
/// Solves warm-start from the previous lambda's solution of the same cell.
std::vector<FrontierPoint> sweep_lambda_frontier(const ExperimentContext& ctx, std::span<const double> lambdas,
                                                 PenaltyKind kind, ModelMode mode, const GammaGrid& grid,
                                                 const FrontierProgress& progress = {});

struct PathPoint {
  double lambda = 0.0;
  double accuracy = 0.0;  // training loss kind
  double fairness = 0.0;
  double ridge = 0.0;     // squared norm of the feature weights
  double prediction_mse = 0.0;
  bool converged = false;
  Eigen::VectorXd theta;
};

/// In-sample regularization path on the full data at a fixed gamma.
std::vector<PathPoint> regularization_path(const ExperimentContext& ctx, std::span<const double> lambdas,
                                           PenaltyKind kind, ModelMode mode, double gamma);

// ---------------------------------------------------------------------------
// Fairness-constrained fits and the price of fairness

struct BisectionConfig {
  double lambda_min = 1e-8;
  double lambda_max = 1e8;
  int max_iterations = 60;
  /// Stop once the feasible end satisfies fairness >= (1 - tol) * bound.
  double relative_tolerance = 1e-3;
};

struct ConstrainedFit {
  double lambda = 0.0;
  double accuracy = 0.0;  // accuracy loss plus gamma * ridge
  double fairness = 0.0;
  bool feasible = false;
  /// Largest lambda found infeasible; a tighter bound can start its search here.
  double lambda_lower = 0.0;
  Eigen::VectorXd theta;
};

/// min accuracy + gamma * ridge subject to fairness <= bound, by bisection in
/// log(lambda) on the penalized problem. The fairness of the penalized
/// minimizer is non-increasing in lambda, so the smallest feasible lambda
/// solves the constrained problem. Search starts above `lambda_floor`.
ConstrainedFit minimize_subject_to_fairness(const LossTerm& loss, const PenaltyForm& penalty, double gamma,
                                            double bound, const BisectionConfig& bisect = {},
                                            const SolverConfig& solver = {}, double lambda_floor = 0.0);

struct PoFPoint {
  double alpha = 1.0;
  double pof = 1.0;
  double achieved_ratio = 1.0;  // fairness / unconstrained fairness
  double lambda = 0.0;
  std::string warning;
};

struct PoFCurve {
  double gamma = 0.0;
  double base_accuracy = 0.0;  // accuracy + gamma * ridge of the unconstrained fit
  double base_fairness = 0.0;
  bool degenerate = false;  // base fairness or accuracy is negligible; every point reports pof 1
  std::vector<PoFPoint> points;
};

/// Price of fairness for each alpha (descending, in (0, 1]) on the rows in
/// `indices`: accuracy of the best model whose fairness is at most alpha
/// times the unconstrained model's, relative to the unconstrained accuracy.
/// Accuracy includes the gamma-weighted ridge term, which keeps the curve
/// monotone for gamma > 0 and matches the plain loss at gamma = 0.
PoFCurve compute_pof(const Dataset& data, const CrossPairSet& pairs, std::span<const Index> indices,
                     std::span<const double> alphas, PenaltyKind kind, ModelMode mode, double gamma,
                     HybridWeights hybrid = {}, const BisectionConfig& bisect = {},
                     const SolverConfig& solver = {});

/// compute_pof on the context's full data and pairs.
PoFCurve compute_pof(const ExperimentContext& ctx, std::span<const double> alphas, PenaltyKind kind,
                     ModelMode mode, double gamma, const BisectionConfig& bisect = {});

/// Throws NumericalError unless pof(1) == 1, every pof >= 1 - 1e-9 and pof
/// never decreases as alpha decreases (tolerance 1e-9).
void validate_pof_curve(const PoFCurve& curve);

}  // namespace fairreg
