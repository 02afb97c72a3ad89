#include "fairreg/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include <fmt/format.h>

#include "fairreg/error.hpp"
#include "fairreg/rng.hpp"

namespace fairreg {

std::vector<double> log_spaced(double lo, double hi, std::size_t count) {
  if (!(lo > 0.0) || !(hi >= lo)) throw ValidationError(fmt::format("bad log-spaced range [{}, {}]", lo, hi));
  if (count == 0) return {};
  if (count == 1) return {lo};
  std::vector<double> out(count);
  const double a = std::log10(lo), b = std::log10(hi);
  for (std::size_t i = 0; i < count; ++i)
    out[i] = std::pow(10.0, a + (b - a) * static_cast<double>(i) / static_cast<double>(count - 1));
  out.front() = lo;
  out.back() = hi;
  return out;
}

std::vector<double> default_lambda_grid() {
  std::vector<double> grid{0.0};
  for (double v : log_spaced(1e-3, 1e3, 24)) grid.push_back(v);
  return grid;
}

GammaGrid GammaGrid::standard() { return GammaGrid{log_spaced(1e-4, 1e2, 13)}; }

void GammaGrid::validate() const {
  if (values.empty()) throw ValidationError("gamma grid is empty");
  for (std::size_t j = 0; j < values.size(); ++j) {
    if (!(values[j] > 0.0) || !std::isfinite(values[j]))
      throw ValidationError(fmt::format("gamma grid value {} must be positive and finite", values[j]));
    if (j > 0 && !(values[j] > values[j - 1])) throw ValidationError("gamma grid must be strictly ascending");
  }
}

namespace {

DistanceWeight default_weight(Task task) {
  return task == Task::Linear ? DistanceWeight::gaussian() : DistanceWeight::indicator();
}

Dataset normalized(const Dataset& raw, std::span<const Index> fit_rows, bool enabled) {
  if (!enabled) return raw;
  return apply_normalization(raw, fit_normalization(raw, fit_rows));
}

void require_both_groups(const Dataset& data, std::span<const Index> rows, const std::string& what) {
  for (int g : {1, 2})
    if (data.group_members(g, rows).empty())
      throw ValidationError(fmt::format("{} has no rows of group {}; every fold needs both groups, which stratified "
                                        "folds guarantee only when each group has at least as many rows as folds",
                                        what, g));
}

// Runs body(0..count-1) on up to `jobs` threads. Each index writes only its
// own output slot, so results are independent of scheduling.
void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& body) {
  jobs = std::max<std::size_t>(1, std::min(jobs, count));
  if (jobs == 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(count);
      }
    }
  };
  std::vector<std::thread> threads;
  for (std::size_t t = 1; t < jobs; ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace

ExperimentContext::ExperimentContext(const Dataset& raw, ExperimentOptions options)
    : options_(std::move(options)),
      weight_(options_.weight.value_or(default_weight(raw.task()))),
      folds_(make_stratified_folds(experiment_strata(raw), options_.folds, derive_seed(options_.seed, {1}))),
      full_data_(normalized(raw, raw.all_indices(), options_.normalize)),
      full_pairs_(sample_cross_pairs(full_data_, full_data_.all_indices(), options_.pair_count, weight_,
                                     derive_seed(options_.seed, {4}))) {
  fold_data_.reserve(folds_.k);
  for (std::size_t f = 0; f < folds_.k; ++f) {
    IndexList train = folds_.train_indices(f);
    IndexList test = folds_.test_indices(f);
    require_both_groups(raw, train, fmt::format("training split of fold {}", f));
    require_both_groups(raw, test, fmt::format("fold {}", f));
    Dataset data = normalized(raw, train, options_.normalize);
    CrossPairSet train_pairs =
        sample_cross_pairs(data, train, options_.pair_count, weight_, derive_seed(options_.seed, {2, f}));
    CrossPairSet test_pairs =
        sample_cross_pairs(data, test, options_.pair_count, weight_, derive_seed(options_.seed, {3, f}));
    fold_data_.push_back(
        FoldData{std::move(data), std::move(train), std::move(test), std::move(train_pairs), std::move(test_pairs)});
  }
}

Dataset subsample_rows(const Dataset& data, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0) || fraction > 1.0)
    throw ValidationError(fmt::format("subsample fraction {} must lie in (0, 1]", fraction));
  IndexList rows = data.all_indices();
  const auto keep = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(fraction * static_cast<double>(rows.size()))));
  Rng rng(seed);
  rng.shuffle(std::span<Index>(rows));
  rows.resize(keep);
  std::sort(rows.begin(), rows.end());
  return data.subset(rows);
}

// ---------------------------------------------------------------------------

FoldEvaluation evaluate_on_fold(const ModelParams& params, const Dataset& data, std::span<const Index> fold,
                                PenaltyKind kind, const CrossPairSet& pairs, LossKind loss, HybridWeights hybrid) {
  if (fold.empty()) throw ValidationError("cannot evaluate on an empty fold");
  const PenaltyForm form = build_penalty_form(pairs, data, kind, params.mode(), hybrid, EmptyBucketPolicy::Skip);
  return FoldEvaluation{accuracy_loss(params, data, fold, loss), eval_penalty(form, params)};
}

std::size_t argmin_with_ties(std::span<const double> values) {
  if (values.empty()) throw ValidationError("argmin of an empty sequence");
  const double best = *std::min_element(values.begin(), values.end());
  const double slack = 1e-12 * std::max(1.0, std::abs(best));
  for (std::size_t j = 0; j < values.size(); ++j)
    if (values[j] <= best + slack) return j;
  return 0;
}

namespace {

struct FoldProblem {
  LossTerm train_loss;
  LossTerm test_loss;
  PenaltyForm train_form;
  PenaltyForm test_form;
};

std::vector<FoldProblem> build_fold_problems(const ExperimentContext& ctx, PenaltyKind kind, ModelMode mode) {
  std::vector<FoldProblem> out;
  const auto& hybrid = ctx.options().hybrid;
  for (const auto& fd : ctx.fold_data()) {
    out.push_back(FoldProblem{
        LossTerm(fd.data, fd.train, mode),
        LossTerm(fd.data, fd.test, mode),
        build_penalty_form(fd.train_pairs, fd.data, kind, mode, hybrid),
        build_penalty_form(fd.test_pairs, fd.data, kind, mode, hybrid, EmptyBucketPolicy::Skip),
    });
  }
  return out;
}

ModelParams start_point(ModelMode mode, Index d, const Eigen::VectorXd* warm) {
  if (warm && warm->size() > 0) return ModelParams::from_unified(mode, d, *warm);
  return ModelParams::zeros(mode, d);
}

CVCell solve_cell(const FoldProblem& p, double lambda, double gamma, const Eigen::VectorXd* warm,
                  const SolverConfig& cfg) {
  const Objective obj(p.train_loss, p.train_form, lambda, gamma);
  const SolveResult res = solve(obj, start_point(obj.mode(), obj.feature_dim(), warm), cfg);
  CVCell cell;
  cell.theta = res.params.unified();
  cell.accuracy = p.test_loss.value(cell.theta);
  cell.fairness = eval_penalty(p.test_form, cell.theta);
  cell.loss = cell.accuracy + lambda * cell.fairness;
  cell.iterations = res.iterations;
  cell.converged = res.converged;
  return cell;
}

// For every gamma_j and fold i, train on all folds but i and add
// the held-out loss to L(j). `warm` optionally supplies starting points per
// (gamma, fold) cell.
CVReport run_cv(const std::vector<FoldProblem>& problems, double lambda, const GammaGrid& grid,
                const ExperimentContext& ctx, const CVReport* warm) {
  grid.validate();
  const std::size_t folds = problems.size();
  const std::size_t k = grid.values.size();
  CVReport report;
  report.lambda = lambda;
  report.gammas = grid.values;
  report.cells.assign(k, std::vector<CVCell>(folds));
  parallel_for(k * folds, ctx.options().jobs, [&](std::size_t cell) {
    const std::size_t j = cell / folds, i = cell % folds;
    const Eigen::VectorXd* start = warm ? &warm->cells[j][i].theta : nullptr;
    report.cells[j][i] = solve_cell(problems[i], lambda, grid.values[j], start, ctx.options().solver);
  });
  report.total_loss.assign(k, 0.0);
  for (std::size_t j = 0; j < k; ++j)
    for (std::size_t i = 0; i < folds; ++i) report.total_loss[j] += report.cells[j][i].loss;
  report.selected = argmin_with_ties(report.total_loss);
  return report;
}

}  // namespace

CVReport select_gamma_cv(const ExperimentContext& ctx, double lambda, PenaltyKind kind, ModelMode mode,
                         const GammaGrid& grid) {
  const auto problems = build_fold_problems(ctx, kind, mode);
  return run_cv(problems, lambda, grid, ctx, nullptr);
}

std::vector<FrontierPoint> sweep_lambda_frontier(const ExperimentContext& ctx, std::span<const double> lambdas,
                                                 PenaltyKind kind, ModelMode mode, const GammaGrid& grid,
                                                 const FrontierProgress& progress) {
  if (lambdas.empty() || lambdas.front() != 0.0)
    throw ValidationError("lambda grid must start at 0");
  for (std::size_t l = 1; l < lambdas.size(); ++l)
    if (!(lambdas[l] > lambdas[l - 1])) throw ValidationError("lambda grid must be strictly ascending");
  grid.validate();

  const auto problems = build_fold_problems(ctx, kind, mode);
  const IndexList all = ctx.full_data().all_indices();
  const LossTerm full_loss(ctx.full_data(), all, mode);
  const PenaltyForm full_form = build_penalty_form(ctx.full_pairs(), ctx.full_data(), kind, mode, ctx.options().hybrid);
  const Index d = ctx.full_data().dim();

  std::vector<FrontierPoint> points;
  std::optional<CVReport> previous;
  Eigen::VectorXd refit_theta;
  for (double lambda : lambdas) {
    CVReport report = run_cv(problems, lambda, grid, ctx, previous ? &*previous : nullptr);
    const std::size_t j = report.selected;

    FrontierPoint pt;
    pt.lambda = lambda;
    pt.gamma = report.selected_gamma();
    pt.cv_loss = report.total_loss[j];
    for (std::size_t i = 0; i < problems.size(); ++i) {
      const auto& fd = ctx.fold_data()[i];
      const auto& cell = report.cells[j][i];
      const ModelParams params = ModelParams::from_unified(mode, d, cell.theta);
      pt.train_acc_loss += prediction_mse(params, fd.data, fd.train);
      pt.test_acc_loss += prediction_mse(params, fd.data, fd.test);
      pt.train_fair += eval_penalty(problems[i].train_form, cell.theta);
      pt.test_fair += eval_penalty(problems[i].test_form, cell.theta);
      pt.converged = pt.converged && cell.converged;
    }
    const double folds = static_cast<double>(problems.size());
    pt.train_acc_loss /= folds;
    pt.test_acc_loss /= folds;
    pt.train_fair /= folds;
    pt.test_fair /= folds;

    const Objective refit(full_loss, full_form, lambda, pt.gamma);
    const SolveResult res = solve(refit, start_point(mode, d, &refit_theta), ctx.options().solver);
    refit_theta = res.params.unified();
    pt.weight_norm = res.params.weight_norm();
    pt.intercept_1 = res.params.intercept(1);
    pt.intercept_2 = res.params.intercept(2);
    pt.converged = pt.converged && res.converged;

    if (progress) progress(pt);
    points.push_back(pt);
    previous = std::move(report);
  }
  return points;
}

std::vector<PathPoint> regularization_path(const ExperimentContext& ctx, std::span<const double> lambdas,
                                           PenaltyKind kind, ModelMode mode, double gamma) {
  const IndexList all = ctx.full_data().all_indices();
  const LossTerm loss(ctx.full_data(), all, mode);
  const PenaltyForm form = build_penalty_form(ctx.full_pairs(), ctx.full_data(), kind, mode, ctx.options().hybrid);
  const Index d = ctx.full_data().dim();
  std::vector<PathPoint> out;
  Eigen::VectorXd theta;
  for (double lambda : lambdas) {
    const Objective obj(loss, form, lambda, gamma);
    const SolveResult res = solve(obj, start_point(mode, d, &theta), ctx.options().solver);
    theta = res.params.unified();
    PathPoint pt;
    pt.lambda = lambda;
    pt.accuracy = loss.value(theta);
    pt.fairness = eval_penalty(form, theta);
    pt.ridge = obj.ridge(theta);
    pt.prediction_mse = prediction_mse(res.params, ctx.full_data(), all);
    pt.converged = res.converged;
    pt.theta = theta;
    out.push_back(std::move(pt));
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

ConstrainedFit fit_at(const LossTerm& loss, const PenaltyForm& penalty, double gamma, double lambda,
                      const Eigen::VectorXd* warm, const SolverConfig& solver) {
  const Objective obj(loss, penalty, lambda, gamma);
  const SolveResult res = solve(obj, start_point(obj.mode(), obj.feature_dim(), warm), solver);
  ConstrainedFit fit;
  fit.lambda = lambda;
  fit.theta = res.params.unified();
  fit.accuracy = loss.value(fit.theta) + gamma * obj.ridge(fit.theta);
  fit.fairness = eval_penalty(penalty, fit.theta);
  return fit;
}

}  // namespace

ConstrainedFit minimize_subject_to_fairness(const LossTerm& loss, const PenaltyForm& penalty, double gamma,
                                            double bound, const BisectionConfig& bisect, const SolverConfig& solver,
                                            double lambda_floor) {
  if (!(bound >= 0.0) || !std::isfinite(bound)) throw ValidationError("fairness bound must be finite and >= 0");
  if (!(bisect.lambda_min > 0.0) || !(bisect.lambda_max > bisect.lambda_min))
    throw ValidationError("bisection bracket must satisfy 0 < lambda_min < lambda_max");

  double lo = std::max(lambda_floor, bisect.lambda_min);
  if (lambda_floor <= 0.0) {
    ConstrainedFit unconstrained = fit_at(loss, penalty, gamma, 0.0, nullptr, solver);
    if (unconstrained.fairness <= bound) {
      unconstrained.feasible = true;
      return unconstrained;
    }
    ConstrainedFit smallest = fit_at(loss, penalty, gamma, bisect.lambda_min, &unconstrained.theta, solver);
    if (smallest.fairness <= bound) {
      smallest.feasible = true;
      return smallest;
    }
  }

  ConstrainedFit hi = fit_at(loss, penalty, gamma, bisect.lambda_max, nullptr, solver);
  if (hi.fairness > bound) return hi;  // unreachable within the bracket
  hi.feasible = true;
  for (int it = 0; it < bisect.max_iterations; ++it) {
    if (hi.fairness >= (1.0 - bisect.relative_tolerance) * bound) break;
    if (hi.lambda <= lo * (1.0 + 1e-12)) break;
    const double mid = std::sqrt(lo * hi.lambda);
    ConstrainedFit fit = fit_at(loss, penalty, gamma, mid, &hi.theta, solver);
    if (fit.fairness <= bound) {
      fit.feasible = true;
      hi = std::move(fit);
    } else {
      lo = mid;
    }
  }
  hi.lambda_lower = lo;
  return hi;
}

PoFCurve compute_pof(const Dataset& data, const CrossPairSet& pairs, std::span<const Index> indices,
                     std::span<const double> alphas, PenaltyKind kind, ModelMode mode, double gamma,
                     HybridWeights hybrid, const BisectionConfig& bisect, const SolverConfig& solver) {
  for (std::size_t a = 0; a < alphas.size(); ++a) {
    if (!(alphas[a] > 0.0) || alphas[a] > 1.0)
      throw ValidationError(fmt::format("alpha {} must lie in (0, 1]", alphas[a]));
    if (a > 0 && !(alphas[a] < alphas[a - 1])) throw ValidationError("alpha grid must be strictly descending");
  }
  const LossTerm loss(data, indices, mode);
  const PenaltyForm form = build_penalty_form(pairs, data, kind, mode, hybrid);
  const ConstrainedFit base = fit_at(loss, form, gamma, 0.0, nullptr, solver);

  PoFCurve curve;
  curve.gamma = gamma;
  curve.base_accuracy = base.accuracy;
  curve.base_fairness = base.fairness;
  // round-off from an exact fit is treated as zero, relative to the loss of the all-zero model
  const double negligible = 1e-12 * std::max(1.0, loss.value(Eigen::VectorXd::Zero(loss.dim())));
  const bool fair_zero = !(base.fairness > negligible), accuracy_zero = !(base.accuracy > negligible);
  curve.degenerate = fair_zero || accuracy_zero;
  double floor = 0.0;
  for (double alpha : alphas) {
    PoFPoint pt;
    pt.alpha = alpha;
    if (curve.degenerate) {
      pt.pof = 1.0;
      pt.achieved_ratio = 0.0;
      pt.warning = !fair_zero ? "unconstrained model has zero accuracy loss; price of fairness undefined"
                                       : "unconstrained model has zero fairness penalty; every constraint is vacuous";
    } else if (alpha == 1.0) {
      pt.pof = 1.0;
      pt.achieved_ratio = 1.0;
    } else {
      const ConstrainedFit fit =
          minimize_subject_to_fairness(loss, form, gamma, alpha * base.fairness, bisect, solver, floor);
      pt.pof = fit.accuracy / base.accuracy;
      pt.achieved_ratio = fit.fairness / base.fairness;
      pt.lambda = fit.lambda;
      if (!fit.feasible) pt.warning = "fairness bound not reached at the largest lambda";
      floor = std::max(floor, fit.lambda_lower);
    }
    curve.points.push_back(std::move(pt));
  }
  return curve;
}

PoFCurve compute_pof(const ExperimentContext& ctx, std::span<const double> alphas, PenaltyKind kind,
                     ModelMode mode, double gamma, const BisectionConfig& bisect) {
  const IndexList all = ctx.full_data().all_indices();
  return compute_pof(ctx.full_data(), ctx.full_pairs(), all, alphas, kind, mode, gamma, ctx.options().hybrid,
                     bisect, ctx.options().solver);
}

void validate_pof_curve(const PoFCurve& curve) {
  constexpr double tol = 1e-9;
  for (std::size_t k = 0; k < curve.points.size(); ++k) {
    const auto& pt = curve.points[k];
    if (pt.alpha == 1.0 && pt.pof != 1.0)
      throw NumericalError(fmt::format("price of fairness at alpha=1 is {}, expected exactly 1", pt.pof));
    if (!(pt.pof >= 1.0 - tol))
      throw NumericalError(fmt::format("price of fairness {} at alpha={} is below 1", pt.pof, pt.alpha));
    if (k > 0 && pt.alpha < curve.points[k - 1].alpha && pt.pof < curve.points[k - 1].pof - tol)
      throw NumericalError(fmt::format("price of fairness decreased from {} to {} as alpha fell from {} to {}",
                                       curve.points[k - 1].pof, pt.pof, curve.points[k - 1].alpha, pt.alpha));
  }
}

}  // namespace fairreg
