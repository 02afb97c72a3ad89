#include <doctest.h>

#include <set>
#include <sstream>

#include "fairreg/dataset.hpp"
#include "fairreg/error.hpp"
#include "oracles.hpp"

using namespace fairreg;

namespace {

CsvSchema linear_schema() {
  CsvSchema s;
  s.target = "y";
  s.protected_column = "grp";
  s.task = Task::Linear;
  return s;
}

Dataset parse(const std::string& text, const CsvSchema& schema) {
  std::istringstream in(text);
  return parse_csv(in, schema);
}

Dataset tiny(std::vector<double> x, std::vector<double> y, std::vector<int> g, Task task = Task::Linear) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(x.size()), 1);
  for (std::size_t i = 0; i < x.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = x[i];
  return Dataset(m, Eigen::Map<Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size())), g, task);
}

}  // namespace

TEST_CASE("csv: four rows, two features, two groups") {
  const auto data = parse("a,b,y,grp\n1,2,0.5,A\n3,4,-0.5,B\n5,6,0.1,A\n7,8,0.2,B\n", linear_schema());
  CHECK(data.size() == 4);
  CHECK(data.dim() == 2);
  CHECK(data.groups() == std::vector<int>{1, 2, 1, 2});
  CHECK(data.row(1)[0] == 3.0);
  CHECK(data.label(1) == -0.5);
  CHECK(data.feature_names() == std::vector<std::string>{"a", "b"});
}

TEST_CASE("csv: three protected values are rejected") {
  CHECK_THROWS_WITH_AS(parse("a,y,grp\n1,0,A\n2,0,B\n3,0,C\n", linear_schema()),
                       doctest::Contains("protected column not binary"), ValidationError);
}

TEST_CASE("csv: one missing numeric cell adds an indicator column") {
  const auto full = parse("a,b,y,grp\n1,2,0,A\n3,4,0,B\n5,6,0,A\n", linear_schema());
  const auto gappy = parse("a,b,y,grp\n1,,0,A\n3,4,0,B\n5,6,0,A\n", linear_schema());
  CHECK(gappy.dim() == full.dim() + 1);
  CHECK(gappy.feature_names().back() == "b:missing");
  CHECK(gappy.row(0)[1] == 5.0);  // mean of observed 4 and 6
  CHECK(gappy.row(0)[2] == 1.0);
  CHECK(gappy.row(1)[2] == 0.0);
  const auto na = parse("a,b,y,grp\n1,NA,0,A\n3,4,0,B\n5,6,0,A\n", linear_schema());
  CHECK(na.dim() == 3);
}

TEST_CASE("csv: input errors") {
  CHECK_THROWS_WITH_AS(parse("a,grp\n1,A\n2,B\n", linear_schema()), doctest::Contains("missing column 'y'"),
                       ValidationError);
  CHECK_THROWS_WITH_AS(parse("a,y,grp\nx1,0,A\n2,0,B\n", linear_schema()),
                       doctest::Contains("unparseable numeric cell"), ValidationError);
  CHECK_THROWS_WITH_AS(parse("a,y,grp\n1,0,A\n2,0,A\n", linear_schema()), doctest::Contains("not binary"),
                       ValidationError);
  CHECK_THROWS_AS(parse("a,y,grp\n1,0\n", linear_schema()), ValidationError);
  CHECK_THROWS_AS(parse("", linear_schema()), ValidationError);
}

TEST_CASE("csv: categorical expansion, quoting, ignored columns and logistic labels") {
  CsvSchema s = linear_schema();
  s.task = Task::Logistic;
  s.positive_label = "yes";
  s.categorical = {"color"};
  s.ignore = {"id"};
  s.group_1 = "m";
  const auto data = parse("id,color,y,grp,v\n1,red,yes,f,\"1.5\"\n2,blue,no,m,2\n3,red,no,f,3\n", s);
  CHECK(data.dim() == 3);
  CHECK(data.feature_names() == std::vector<std::string>{"color=blue", "color=red", "v"});
  CHECK(data.labels()[0] == 1.0);
  CHECK(data.labels()[1] == -1.0);
  CHECK(data.groups() == std::vector<int>{2, 1, 2});
  CHECK(data.row(0)[2] == 1.5);
}

TEST_CASE("schema file: missing file is named, unknown keys rejected") {
  oracle::TempDir dir("schema");
  CHECK_THROWS_WITH_AS(load_schema((dir.path() / "nope.json").string()), doctest::Contains("nope.json"),
                       ValidationError);
  const auto bad = dir.write("bad.json", R"({"target":"y","protected":"g","task":"linear","colour":1})");
  CHECK_THROWS_WITH_AS(load_schema(bad.string()), doctest::Contains("colour"), ValidationError);
  const auto no_pos = dir.write("np.json", R"({"target":"y","protected":"g","task":"logistic"})");
  CHECK_THROWS_AS(load_schema(no_pos.string()), ValidationError);
  const auto good = dir.write(
      "ok.json", R"({"target":"y","protected":"g","task":"logistic","positive_label":">50K","categorical":["c"]})");
  const auto schema = load_schema(good.string());
  CHECK(schema.task == Task::Logistic);
  CHECK(schema.positive_label == ">50K");
  CHECK(schema.categorical == std::vector<std::string>{"c"});
}

TEST_CASE("dataset invariants") {
  CHECK_THROWS_AS(tiny({1, 2}, {0, 0}, {1, 3}), ValidationError);
  CHECK_THROWS_AS(tiny({1, 2}, {0, 0}, {1, 1}), ValidationError);
  CHECK_THROWS_AS(tiny({1, std::nan("")}, {0, 0}, {1, 2}), ValidationError);
  CHECK_THROWS_AS(tiny({1, 2}, {0.5, 1}, {1, 2}, Task::Logistic), ValidationError);
  CHECK_NOTHROW(tiny({1, 2}, {-1, 1}, {1, 2}, Task::Logistic));
}

// ---------------------------------------------------------------------------

TEST_CASE("normalization: two-point column, constant column, task rules") {
  Eigen::MatrixXd x(2, 2);
  x << 1, 5, 3, 5;
  const Dataset data(x, Eigen::Vector2d(0.2, 0.4), {1, 2}, Task::Linear);
  const auto stats = fit_normalization(data, data.all_indices());
  CHECK(stats.feature_mean[0] == 2.0);
  CHECK(stats.feature_std[0] == 1.0);
  CHECK(stats.feature_std[1] == 0.0);
  REQUIRE(stats.target);
  const auto z = apply_normalization(data, stats);
  CHECK(z.row(1)[0] == 1.0);  // (3 - 2) / 1
  CHECK(z.row(0)[1] == 0.0);
  CHECK(z.row(1)[1] == 0.0);

  const Dataset logistic(x, Eigen::Vector2d(1, -1), {1, 2}, Task::Logistic);
  CHECK_FALSE(fit_normalization(logistic, logistic.all_indices()).target.has_value());
  CHECK(apply_normalization(logistic, fit_normalization(logistic, logistic.all_indices())).labels() ==
        logistic.labels());
}

TEST_CASE("normalization: statistics come from the fitting rows only") {
  const auto data = tiny({0, 2, 100}, {0, 0, 0}, {1, 2, 1});
  const IndexList train{0, 1};
  const auto stats = fit_normalization(data, train);
  CHECK(stats.feature_mean[0] == 1.0);
  CHECK(stats.feature_std[0] == 1.0);
  CHECK(apply_normalization(data, stats).row(2)[0] == 99.0);
  CHECK_THROWS_AS(fit_normalization(data, IndexList{}), ValidationError);
}

TEST_CASE("normalization: linear targets are clamped to [-1, 1]") {
  const auto data = tiny({0, 1, 2, 3, 4}, {0, 0, 0, 0, 10}, {1, 2, 1, 2, 1});
  const auto z = apply_normalization(data, fit_normalization(data, data.all_indices()));
  CHECK(z.labels().maxCoeff() == 1.0);
  CHECK(z.labels().minCoeff() >= -1.0);
}

TEST_CASE("normalization property: zero mean, unit std, exact round trip") {
  std::mt19937_64 gen(11);
  for (int trial = 0; trial < 25; ++trial) {
    const Dataset data = oracle::random_dataset(gen, 30, 4, Task::Linear);
    IndexList train;
    for (Index i = 0; i < 20; ++i) train.push_back(i);
    const auto stats = fit_normalization(data, train);
    const auto z = apply_normalization(data, stats);
    for (Eigen::Index c = 0; c < 4; ++c) {
      double mean = 0, sq = 0;
      for (Index i : train) mean += z.row(i)[c] / 20.0;
      for (Index i : train) sq += (z.row(i)[c] - mean) * (z.row(i)[c] - mean) / 20.0;
      CHECK(std::abs(mean) <= 1e-10);
      CHECK(std::abs(std::sqrt(sq) - 1.0) <= 1e-10);
    }
    const Eigen::MatrixXd back = invert_feature_normalization(z.features(), stats);
    CHECK((back - data.features()).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("normalization: dimension mismatch") {
  const auto a = tiny({1, 2}, {0, 0}, {1, 2});
  Eigen::MatrixXd x(2, 2);
  x << 1, 2, 3, 4;
  const Dataset b(x, Eigen::Vector2d(0, 0), {1, 2}, Task::Linear);
  CHECK_THROWS_AS(apply_normalization(a, fit_normalization(b, b.all_indices())), ValidationError);
}

// ---------------------------------------------------------------------------

TEST_CASE("folds: singletons, balanced sizes, determinism") {
  const auto ten = make_folds(10, 10, 3);
  for (auto s : ten.fold_sizes()) CHECK(s == 1);

  auto sizes = make_folds(23, 10, 3).fold_sizes();
  std::sort(sizes.begin(), sizes.end());
  CHECK(sizes == std::vector<std::size_t>{2, 2, 2, 2, 2, 2, 2, 3, 3, 3});

  CHECK(make_folds(23, 10, 99) == make_folds(23, 10, 99));
  CHECK(make_folds(23, 10, 99).assignment != make_folds(23, 10, 100).assignment);
  CHECK_THROWS_AS(make_folds(5, 10, 1), ValidationError);
  CHECK_THROWS_AS(make_folds(5, 1, 1), ValidationError);
}

TEST_CASE("folds property: a balanced partition for random n, k") {
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t k = 2 + gen() % 9;
    const std::size_t n = k + gen() % 60;
    const auto plan = make_folds(n, k, gen());
    std::vector<int> seen(n, 0);
    for (std::size_t f = 0; f < k; ++f) {
      const auto test = plan.test_indices(f);
      const auto train = plan.train_indices(f);
      CHECK(test.size() + train.size() == n);
      for (Index i : test) ++seen[i];
    }
    CHECK(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
    const auto s = plan.fold_sizes();
    CHECK(*std::max_element(s.begin(), s.end()) - *std::min_element(s.begin(), s.end()) <= 1);
  }
}

TEST_CASE("stratified folds: every large-enough stratum reaches every fold") {
  std::mt19937_64 gen(8);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t k = 2 + gen() % 5;
    std::vector<int> strata;
    for (int s = 0; s < 3; ++s)
      for (std::size_t m = 0; m < k + gen() % 7; ++m) strata.push_back(s);
    std::shuffle(strata.begin(), strata.end(), gen);
    const auto plan = make_stratified_folds(strata, k, gen());
    const auto sizes = plan.fold_sizes();
    CHECK(*std::max_element(sizes.begin(), sizes.end()) - *std::min_element(sizes.begin(), sizes.end()) <= 1);
    for (std::size_t f = 0; f < k; ++f) {
      std::set<int> present;
      for (Index i : plan.test_indices(f)) present.insert(strata[i]);
      CHECK(present.size() == 3);
    }
  }
}

TEST_CASE("experiment strata separate groups and, for logistic tasks, labels") {
  const auto lin = tiny({0, 0, 0}, {0.5, -0.5, 0.1}, {1, 2, 2});
  CHECK(experiment_strata(lin) == std::vector<int>{1, 2, 2});
  const auto log = tiny({0, 0, 0, 0}, {1, -1, 1, -1}, {1, 1, 2, 2}, Task::Logistic);
  const auto s = experiment_strata(log);
  CHECK(std::set<int>(s.begin(), s.end()).size() == 4);
}

TEST_CASE("experiment folds: a group with k rows reaches every fold even when split by label") {
  std::mt19937_64 gen(13);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 3 + gen() % 5;
    // group 1: k rows split across both labels, group 2: many rows
    std::vector<double> y;
    std::vector<int> g;
    const std::size_t pos = 1 + gen() % (k - 1);
    for (std::size_t i = 0; i < k; ++i) {
      g.push_back(1);
      y.push_back(i < pos ? 1.0 : -1.0);
    }
    for (std::size_t i = 0; i < 3 * k; ++i) {
      g.push_back(2);
      y.push_back(gen() % 2 ? 1.0 : -1.0);
    }
    const auto data = tiny(std::vector<double>(y.size(), 0.0), y, g, Task::Logistic);
    const auto plan = make_stratified_folds(experiment_strata(data), k, gen());
    for (std::size_t f = 0; f < k; ++f) {
      const auto test = plan.test_indices(f);
      CHECK_FALSE(data.group_members(1, test).empty());
    }
  }
}

// ---------------------------------------------------------------------------

TEST_CASE("cross pairs: forced single pair and default count") {
  const auto one = tiny({0, 1}, {0.1, 0.3}, {1, 2});
  const auto pairs = sample_cross_pairs(one, one.all_indices(), 5, DistanceWeight::gaussian(), 1);
  REQUIRE(pairs.size() == 1);
  CHECK(pairs.pairs[0] == std::pair<Index, Index>{0, 1});
  CHECK(pairs.weights[0] == doctest::Approx(std::exp(-0.04)).epsilon(1e-15));

  const auto seven = tiny({0, 0, 0, 0, 0, 0, 0}, {0, 0, 0, 0, 0, 0, 0}, {1, 1, 1, 2, 2, 2, 2});
  CHECK(default_pair_count(seven, seven.all_indices()) == 6);
  const auto six = sample_cross_pairs(seven, seven.all_indices(), std::nullopt, DistanceWeight::indicator(), 4);
  CHECK(six.size() == 6);
  CHECK(std::set(six.pairs.begin(), six.pairs.end()).size() == 6);
  CHECK(six == sample_cross_pairs(seven, seven.all_indices(), std::nullopt, DistanceWeight::indicator(), 4));
}

TEST_CASE("cross pairs property: cross-group, distinct, weighted, complete when oversampled") {
  std::mt19937_64 gen(21);
  for (int trial = 0; trial < 40; ++trial) {
    const Dataset data = oracle::random_dataset(gen, 6 + gen() % 20, 2, Task::Linear);
    IndexList rows;
    for (Index i = 0; i < data.size(); ++i)
      if (i < 4 || gen() % 3) rows.push_back(i);
    const auto weight = trial % 2 ? DistanceWeight::gaussian() : DistanceWeight::indicator();
    const auto count = 1 + gen() % 30;
    const auto pairs = sample_cross_pairs(data, rows, count, weight, gen());
    const auto every = oracle::all_cross_pairs(data, rows);
    CHECK(pairs.size() == std::min<std::size_t>(count, every.size()));
    CHECK(std::is_sorted(pairs.pairs.begin(), pairs.pairs.end()));
    CHECK(std::adjacent_find(pairs.pairs.begin(), pairs.pairs.end()) == pairs.pairs.end());
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      const auto [i, j] = pairs.pairs[p];
      CHECK(data.group(i) == 1);
      CHECK(data.group(j) == 2);
      CHECK(std::find(rows.begin(), rows.end(), i) != rows.end());
      CHECK(pairs.weights[p] == oracle::pair_weight(weight, data.label(i), data.label(j)));
      CHECK(pairs.weights[p] >= 0.0);
      CHECK(pairs.weights[p] <= 1.0);
    }
    const auto full = sample_cross_pairs(data, rows, every.size() + 3, weight, gen());
    CHECK(full.pairs == every);
  }
}

TEST_CASE("cross pairs: a group missing from the rows is an error") {
  const auto data = tiny({0, 1, 2}, {0, 0, 0}, {1, 2, 1});
  CHECK_THROWS_AS(sample_cross_pairs(data, IndexList{0, 2}, 4, DistanceWeight::gaussian(), 1), ValidationError);
}
