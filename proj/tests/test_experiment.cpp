#include <doctest.h>

#include "fairreg/error.hpp"
#include "fairreg/experiment.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"

using namespace fairreg;

namespace {

ExperimentOptions quick_options(std::uint64_t seed, std::size_t folds = 5) {
  ExperimentOptions o;
  o.folds = folds;
  o.seed = seed;
  return o;
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

}  // namespace

TEST_CASE("grids") {
  const auto lambdas = default_lambda_grid();
  REQUIRE(lambdas.size() == 25);
  CHECK(lambdas.front() == 0.0);
  CHECK(lambdas[1] == 1e-3);
  CHECK(lambdas.back() == 1e3);
  CHECK(std::is_sorted(lambdas.begin(), lambdas.end()));
  const auto gammas = GammaGrid::standard();
  REQUIRE(gammas.values.size() == 13);
  CHECK(gammas.values.front() == 1e-4);
  CHECK(gammas.values.back() == 1e2);
  CHECK(gammas.values[4] == doctest::Approx(1e-2).epsilon(1e-14));
  CHECK_NOTHROW(gammas.validate());
  CHECK_THROWS_AS((GammaGrid{{}}).validate(), ValidationError);
  CHECK_THROWS_AS((GammaGrid{{0.1, 0.01}}).validate(), ValidationError);
  CHECK_THROWS_AS((GammaGrid{{0.0, 0.1}}).validate(), ValidationError);
}

TEST_CASE("argmin ties go to the first entry") {
  const std::vector<double> one{3.0};
  CHECK(argmin_with_ties(one) == 0);
  const std::vector<double> tie{2.0, 1.0, 1.0 + 1e-13, 1.0};
  CHECK(argmin_with_ties(tie) == 1);
  const std::vector<double> later{2.0, 1.0 + 1e-9, 1.0};
  CHECK(argmin_with_ties(later) == 2);
  CHECK_THROWS_AS(argmin_with_ties(std::vector<double>{}), ValidationError);
}

TEST_CASE("context: stratified folds, per-fold normalization and pairs, reproducible") {
  const auto raw = synthetic::logistic(5, {.n = 90, .d = 3});
  const ExperimentContext a(raw, quick_options(77));
  const ExperimentContext b(raw, quick_options(77));
  CHECK(a.folds() == b.folds());
  CHECK(a.full_pairs() == b.full_pairs());
  REQUIRE(a.fold_data().size() == 5);
  CHECK(a.weight() == DistanceWeight::indicator());
  for (std::size_t f = 0; f < 5; ++f) {
    const auto& fd = a.fold_data()[f];
    CHECK(fd.train_pairs == b.fold_data()[f].train_pairs);
    CHECK(fd.test_pairs == b.fold_data()[f].test_pairs);
    CHECK_FALSE(fd.data.group_members(1, fd.test).empty());
    CHECK_FALSE(fd.data.group_members(2, fd.test).empty());
    for (auto [i, j] : fd.train_pairs.pairs) {
      CHECK(std::binary_search(fd.train.begin(), fd.train.end(), i));
      CHECK(std::binary_search(fd.train.begin(), fd.train.end(), j));
    }
    for (auto [i, j] : fd.test_pairs.pairs) CHECK(std::binary_search(fd.test.begin(), fd.test.end(), i));
    CHECK(fd.train_pairs.size() == default_pair_count(fd.data, fd.train));
    double mean = 0.0;
    for (Index i : fd.train) mean += fd.data.row(i)[0];
    CHECK(std::abs(mean / static_cast<double>(fd.train.size())) <= 1e-12);
  }
  const ExperimentContext c(raw, quick_options(78));
  CHECK_FALSE(c.folds() == a.folds());
}

TEST_CASE("context: a group too small for the folds is reported") {
  auto spec = synthetic::Spec{.n = 40, .d = 2};
  Eigen::MatrixXd x = synthetic::linear(1, spec).features();
  std::vector<int> g(40, 1);
  g[0] = g[1] = g[2] = 2;
  const Dataset raw(x, Eigen::VectorXd::LinSpaced(40, -1, 1), g, Task::Linear);
  CHECK_THROWS_WITH_AS(ExperimentContext(raw, quick_options(1, 5)), doctest::Contains("stratified"), ValidationError);
}

TEST_CASE("held-out evaluation") {
  const auto raw = synthetic::logistic(9, {.n = 60, .d = 3});
  const ExperimentContext ctx(raw, quick_options(4));
  const auto& fd = ctx.fold_data()[0];
  const auto constant = ModelParams::single(Eigen::VectorXd::Zero(3), 0.8);
  for (auto kind : {PenaltyKind::Individual, PenaltyKind::Group, PenaltyKind::Hybrid})
    CHECK(evaluate_on_fold(constant, fd.data, fd.test, kind, fd.test_pairs, LossKind::LogLoss).fairness == 0.0);

  std::mt19937_64 gen(2);
  const auto p = ModelParams::single(oracle::random_vector(gen, 3), 0.1);
  const auto e = evaluate_on_fold(p, fd.data, fd.test, PenaltyKind::Individual, fd.test_pairs, LossKind::LogLoss);
  CHECK(e.accuracy == doctest::Approx(oracle::log_loss(fd.data, fd.test, oracle::decode(p))).epsilon(1e-12));
  CHECK(oracle::close_rel(e.fairness, eval_penalty_bruteforce(fd.test_pairs, fd.data, PenaltyKind::Individual, p),
                          1e-12));
  CHECK(std::abs(e.combined(3.0) - (e.accuracy + 3.0 * e.fairness)) <= 1e-12);
  CHECK_THROWS_AS(evaluate_on_fold(p, fd.data, IndexList{}, PenaltyKind::Group, fd.test_pairs, LossKind::LogLoss),
                  ValidationError);
}

TEST_CASE("cross-validation: one-element grid and the held-out table") {
  const auto raw = synthetic::linear(3, {.n = 60, .d = 4, .noise = 1.0});
  const ExperimentContext ctx(raw, quick_options(12));
  const auto single = select_gamma_cv(ctx, 0.5, PenaltyKind::Group, ModelMode::SingleModel, {{0.3}});
  CHECK(single.total_loss.size() == 1);
  CHECK(single.selected_gamma() == 0.3);

  const GammaGrid grid{{1e-3, 1e-1, 10.0}};
  const auto report = select_gamma_cv(ctx, 0.5, PenaltyKind::Individual, ModelMode::SeparateModels, grid);
  for (std::size_t j = 0; j < 3; ++j) {
    double total = 0.0;
    for (std::size_t i = 0; i < 5; ++i) {
      const auto& fd = ctx.fold_data()[i];
      const LossTerm loss(fd.data, fd.train, ModelMode::SeparateModels);
      const auto form = build_penalty_form(fd.train_pairs, fd.data, PenaltyKind::Individual, ModelMode::SeparateModels);
      const auto fit = solve(Objective(loss, form, 0.5, grid.values[j]), ModelParams::zeros(ModelMode::SeparateModels, 4), {});
      const auto s = oracle::decode(fit.params);
      total += oracle::mse(fd.data, fd.test, s) +
               0.5 * oracle::individual(fd.data, fd.test_pairs.pairs, ctx.weight(), s);
    }
    CHECK(report.total_loss[j] == doctest::Approx(total).epsilon(1e-9));
  }
  CHECK(report.selected == argmin_with_ties(report.total_loss));
}

TEST_CASE("cross-validation: noisy, wide data prefers more than the smallest ridge weight") {
  const auto raw = synthetic::linear(21, {.n = 40, .d = 30, .noise = 2.0});
  const ExperimentContext ctx(raw, quick_options(3));
  const auto report = select_gamma_cv(ctx, 0.0, PenaltyKind::Individual, ModelMode::SingleModel, GammaGrid::standard());
  CHECK(report.selected > 0);
}

TEST_CASE("cross-validation: results do not depend on the worker count") {
  const auto raw = synthetic::logistic(4, {.n = 80, .d = 3});
  auto opts = quick_options(6);
  const ExperimentContext serial(raw, opts);
  opts.jobs = 3;
  const ExperimentContext parallel(raw, opts);
  const std::vector<double> lambdas{0.0, 0.1, 1.0};
  const GammaGrid grid{{1e-3, 1e-1}};
  const auto a = sweep_lambda_frontier(serial, lambdas, PenaltyKind::Hybrid, ModelMode::SeparateModels, grid);
  const auto b = sweep_lambda_frontier(parallel, lambdas, PenaltyKind::Hybrid, ModelMode::SeparateModels, grid);
  REQUIRE(a.size() == b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(same_bits(a[k].cv_loss, b[k].cv_loss));
    CHECK(same_bits(a[k].test_fair, b[k].test_fair));
    CHECK(same_bits(a[k].intercept_2, b[k].intercept_2));
  }
}

TEST_CASE("frontier: lambda order, the unconstrained anchor, progress") {
  const auto raw = synthetic::linear(8, {.n = 70, .d = 3, .label_shift = 1.0});
  const ExperimentContext ctx(raw, quick_options(5));
  const std::vector<double> lambdas{0.0, 0.01, 1.0, 100.0};
  const GammaGrid grid{{1e-3, 1e-1, 10.0}};
  std::vector<double> seen;
  const auto points = sweep_lambda_frontier(ctx, lambdas, PenaltyKind::Group, ModelMode::SingleModel, grid,
                                            [&](const FrontierPoint& p) { seen.push_back(p.lambda); });
  CHECK(seen == lambdas);
  REQUIRE(points.size() == 4);
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(points[k].lambda == lambdas[k]);
    CHECK(points[k].train_acc_loss >= 0.0);
    CHECK(points[k].test_fair >= 0.0);
    CHECK(std::isfinite(points[k].test_acc_loss));
  }
  // the lambda = 0 point is the plain ridge fit at the selected gamma
  double fair = 0.0;
  for (const auto& fd : ctx.fold_data()) {
    const LossTerm loss(fd.data, fd.train, ModelMode::SingleModel);
    const auto form = build_penalty_form(fd.train_pairs, fd.data, PenaltyKind::Group, ModelMode::SingleModel);
    const auto fit = solve(Objective(loss, form, 0.0, points[0].gamma), ModelParams::zeros(ModelMode::SingleModel, 3), {});
    fair += eval_penalty(form, fit.params) / 5.0;
  }
  CHECK(points[0].train_fair == doctest::Approx(fair).epsilon(1e-9));
  CHECK(points[3].train_fair < points[0].train_fair);

  CHECK_THROWS_AS(sweep_lambda_frontier(ctx, std::vector<double>{0.1, 1.0}, PenaltyKind::Group,
                                        ModelMode::SingleModel, grid),
                  ValidationError);
  CHECK_THROWS_AS(sweep_lambda_frontier(ctx, std::vector<double>{0.0, 1.0, 0.5}, PenaltyKind::Group,
                                        ModelMode::SingleModel, grid),
                  ValidationError);
}

TEST_CASE("in-sample path converges to the best constant model") {
  for (Task task : {Task::Linear, Task::Logistic}) {
    const auto raw = task == Task::Linear ? synthetic::linear(31, {.n = 200, .d = 5})
                                          : synthetic::logistic(31, {.n = 200, .d = 5});
    const ExperimentContext ctx(raw, quick_options(2));
    const auto path =
        regularization_path(ctx, std::vector<double>{0.0, 1e6}, PenaltyKind::Individual, ModelMode::SingleModel, 0.0);
    const auto rows = ctx.full_data().all_indices();
    const LossKind kind = loss_kind_for(task);
    const double constant =
        accuracy_loss(best_constant_predictor(ctx.full_data(), rows, kind), ctx.full_data(), rows, kind);
    CHECK(path[1].fairness <= 1e-6 * path[0].fairness);
    CHECK(path[1].accuracy <= 1.01 * constant);
  }
}

// ---------------------------------------------------------------------------

TEST_CASE("constrained fit: feasible and close to the bound") {
  const auto raw = synthetic::linear(13, {.n = 80, .d = 3, .label_shift = 1.0});
  const auto data = apply_normalization(raw, fit_normalization(raw, raw.all_indices()));
  const auto rows = data.all_indices();
  const auto pairs = sample_cross_pairs(data, rows, std::nullopt, DistanceWeight::gaussian(), 1);
  const LossTerm loss(data, rows, ModelMode::SingleModel);
  const auto form = build_penalty_form(pairs, data, PenaltyKind::Individual, ModelMode::SingleModel);
  const auto free_fit = solve(Objective(loss, form, 0.0, 0.01), ModelParams::zeros(ModelMode::SingleModel, 3), {});
  const double f0 = eval_penalty(form, free_fit.params);

  const auto loose = minimize_subject_to_fairness(loss, form, 0.01, 2.0 * f0);
  CHECK(loose.feasible);
  CHECK(loose.lambda == 0.0);

  const auto tight = minimize_subject_to_fairness(loss, form, 0.01, 0.3 * f0);
  CHECK(tight.feasible);
  CHECK(tight.fairness <= 0.3 * f0);
  CHECK(tight.fairness >= (1.0 - 1e-3) * 0.3 * f0);
  CHECK(tight.lambda > 0.0);
  CHECK(tight.lambda_lower < tight.lambda);

  BisectionConfig narrow;
  narrow.lambda_max = 1e-6;
  CHECK_FALSE(minimize_subject_to_fairness(loss, form, 0.01, 1e-6 * f0, narrow).feasible);
  CHECK_THROWS_AS(minimize_subject_to_fairness(loss, form, 0.01, -1.0), ValidationError);
}

TEST_CASE("price of fairness: contract on several instances") {
  const std::vector<double> alphas{1.0, 0.8, 0.5, 0.25, 0.1, 0.01};
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const auto raw = seed % 2 ? synthetic::logistic(seed, {.n = 80, .d = 3, .label_shift = 1.0})
                              : synthetic::linear(seed, {.n = 80, .d = 3, .label_shift = 1.0});
    const ExperimentContext ctx(raw, quick_options(seed));
    for (auto kind : {PenaltyKind::Individual, PenaltyKind::Group})
      for (auto mode : {ModelMode::SingleModel, ModelMode::SeparateModels}) {
        const auto curve = compute_pof(ctx, alphas, kind, mode, 0.01);
        REQUIRE(curve.points.size() == alphas.size());
        CHECK_FALSE(curve.degenerate);
        CHECK(curve.points[0].pof == 1.0);
        CHECK_NOTHROW(validate_pof_curve(curve));
        for (const auto& p : curve.points) CHECK(p.achieved_ratio <= p.alpha + 1e-9);
      }
  }
}

TEST_CASE("price of fairness: one-feature analytic instance") {
  std::mt19937_64 gen(99);
  std::normal_distribution<double> normal;
  std::vector<double> x, y;
  std::vector<int> g;
  for (int i = 0; i < 40; ++i) {
    x.push_back(normal(gen) + (i % 2 ? 0.8 : 0.0));
    y.push_back(std::clamp(0.3 * x.back() + 0.3 * normal(gen), -1.0, 1.0));
    g.push_back(i % 2 ? 2 : 1);
  }
  Eigen::MatrixXd xm = Eigen::Map<Eigen::VectorXd>(x.data(), 40);
  const Dataset data(xm, Eigen::Map<Eigen::VectorXd>(y.data(), 40), g, Task::Linear);
  const auto rows = data.all_indices();
  const auto pairs = sample_cross_pairs(data, rows, 100, DistanceWeight::gaussian(), 5);
  const std::vector<double> alphas{1.0, 0.5, 0.25};
  const auto curve = compute_pof(data, pairs, rows, alphas, PenaltyKind::Individual, ModelMode::SingleModel, 0.0);
  CHECK(curve.points[0].pof == 1.0);
  CHECK(curve.points[1].pof == doctest::Approx(oracle::scalar_pof(x, y, 0.5)).epsilon(1e-3));
  CHECK(std::abs(curve.points[2].pof - oracle::scalar_pof(x, y, 0.25)) <= 1e-3);
}

TEST_CASE("price of fairness: degenerate and invalid input") {
  const auto raw = synthetic::linear(3, {.n = 40, .d = 2});
  const Dataset flat(raw.features(), Eigen::VectorXd::Constant(40, 0.25), raw.groups(), Task::Linear);
  const ExperimentContext ctx(flat, quick_options(1));
  const auto curve = compute_pof(ctx, std::vector<double>{1.0, 0.5}, PenaltyKind::Group, ModelMode::SingleModel, 0.1);
  CHECK(curve.degenerate);
  for (const auto& p : curve.points) {
    CHECK(p.pof == 1.0);
    CHECK_FALSE(p.warning.empty());
  }
  CHECK_THROWS_AS(compute_pof(ctx, std::vector<double>{0.5, 1.0}, PenaltyKind::Group, ModelMode::SingleModel, 0.1),
                  ValidationError);
  CHECK_THROWS_AS(compute_pof(ctx, std::vector<double>{1.5}, PenaltyKind::Group, ModelMode::SingleModel, 0.1),
                  ValidationError);
}

TEST_CASE("price-of-fairness validation rejects broken curves") {
  PoFCurve ok;
  ok.points = {{1.0, 1.0, 1.0, 0.0, ""}, {0.5, 1.2, 0.5, 1.0, ""}, {0.1, 1.2, 0.1, 5.0, ""}};
  CHECK_NOTHROW(validate_pof_curve(ok));
  auto drop = ok;
  drop.points[2].pof = 1.1;
  CHECK_THROWS_AS(validate_pof_curve(drop), NumericalError);
  auto below = ok;
  below.points[1].pof = 0.99;
  CHECK_THROWS_AS(validate_pof_curve(below), NumericalError);
  auto anchor = ok;
  anchor.points[0].pof = 1.0 + 1e-12;
  CHECK_THROWS_AS(validate_pof_curve(anchor), NumericalError);
}

TEST_CASE("subsampling") {
  const auto raw = synthetic::linear(3, {.n = 50, .d = 2});
  const auto half = subsample_rows(raw, 0.5, 9);
  CHECK(half.size() == 25);
  CHECK(subsample_rows(raw, 0.5, 9).features() == half.features());
  CHECK(subsample_rows(raw, 1.0, 9).features() == raw.features());
  CHECK_THROWS_AS(subsample_rows(raw, 0.0, 9), ValidationError);
  CHECK_THROWS_AS(subsample_rows(raw, 1.5, 9), ValidationError);
}

TEST_CASE("separate models usually select at least as large a ridge weight") {
  // a statistical tendency, checked over 20 seeds rather than per instance
  int agree = 0;
  const GammaGrid grid{{1e-3, 1e-2, 1e-1, 1.0, 10.0}};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto raw = synthetic::linear(1000 + seed, {.n = 60, .d = 8, .noise = 1.0, .label_shift = 0.5});
    const ExperimentContext ctx(raw, quick_options(seed));
    const double single =
        select_gamma_cv(ctx, 0.1, PenaltyKind::Individual, ModelMode::SingleModel, grid).selected_gamma();
    const double separate =
        select_gamma_cv(ctx, 0.1, PenaltyKind::Individual, ModelMode::SeparateModels, grid).selected_gamma();
    agree += separate >= single ? 1 : 0;
  }
  MESSAGE("separate >= single in ", agree, " of 20 seeds");
  CHECK(agree > 10);
}
