#include "fairreg/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_set>

#include <fmt/format.h>

#include "fairreg/error.hpp"
#include "fairreg/rng.hpp"
#include "json.hpp"

namespace fairreg {

std::string to_string(Task task) { return task == Task::Linear ? "linear" : "logistic"; }

Task parse_task(const std::string& name) {
  if (name == "linear") return Task::Linear;
  if (name == "logistic") return Task::Logistic;
  throw ValidationError(fmt::format("unknown task '{}' (expected linear or logistic)", name));
}

Dataset::Dataset(Eigen::MatrixXd features, Eigen::VectorXd labels, std::vector<int> groups, Task task,
                 std::vector<std::string> feature_names)
    : features_(std::move(features)),
      labels_(std::move(labels)),
      groups_(std::move(groups)),
      task_(task),
      feature_names_(std::move(feature_names)) {
  const auto n = static_cast<std::size_t>(labels_.size());
  if (static_cast<std::size_t>(features_.rows()) != n || groups_.size() != n)
    throw ValidationError(fmt::format("dataset shape mismatch: {} feature rows, {} labels, {} groups",
                                      features_.rows(), n, groups_.size()));
  if (feature_names_.empty()) {
    for (Eigen::Index c = 0; c < features_.cols(); ++c) feature_names_.push_back(fmt::format("x{}", c));
  } else if (static_cast<Eigen::Index>(feature_names_.size()) != features_.cols()) {
    throw ValidationError("feature name count does not match feature columns");
  }
  std::size_t n1 = 0, n2 = 0;
  for (int g : groups_) {
    if (g == 1) ++n1;
    else if (g == 2) ++n2;
    else throw ValidationError(fmt::format("group id {} is not 1 or 2", g));
  }
  if (n1 == 0 || n2 == 0) throw ValidationError("empty group: both groups must be nonempty");
  if (!features_.allFinite()) throw ValidationError("non-finite feature value");
  if (!labels_.allFinite()) throw ValidationError("non-finite label");
  if (task_ == Task::Logistic) {
    for (Eigen::Index i = 0; i < labels_.size(); ++i)
      if (labels_[i] != 1.0 && labels_[i] != -1.0)
        throw ValidationError(fmt::format("logistic label {} at row {} is not -1 or +1", labels_[i], i));
  }
}

IndexList Dataset::all_indices() const {
  IndexList out(size());
  for (Index i = 0; i < size(); ++i) out[i] = i;
  return out;
}

IndexList Dataset::group_members(int g, std::span<const Index> indices) const {
  IndexList out;
  for (Index i : indices)
    if (groups_.at(i) == g) out.push_back(i);
  return out;
}

Dataset Dataset::subset(std::span<const Index> indices) const {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(indices.size()), features_.cols());
  Eigen::VectorXd y(static_cast<Eigen::Index>(indices.size()));
  std::vector<int> g(indices.size());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const auto i = static_cast<Eigen::Index>(indices[r]);
    x.row(static_cast<Eigen::Index>(r)) = features_.row(i);
    y[static_cast<Eigen::Index>(r)] = labels_[i];
    g[r] = groups_.at(indices[r]);
  }
  return Dataset(std::move(x), std::move(y), std::move(g), task_, feature_names_);
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (quoted) throw ValidationError("unterminated quoted field in CSV");
  fields.push_back(trim(cur));
  return fields;
}

bool is_missing(const std::string& cell) { return cell.empty() || cell == "NA"; }

std::optional<double> parse_number(const std::string& cell) {
  double v = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace

CsvSchema load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot open schema file '{}'", path));
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(fmt::format("schema file '{}' is not valid JSON: {}", path, e.what()));
  }
  static const std::set<std::string> known = {"target", "protected", "task", "positive_label",
                                              "categorical", "ignore", "group_1"};
  if (!doc.is_object()) throw ValidationError(fmt::format("schema file '{}' must hold an object", path));
  for (const auto& [key, _] : doc.items())
    if (!known.contains(key)) throw ValidationError(fmt::format("unknown schema key '{}'", key));
  for (const char* key : {"target", "protected", "task"})
    if (!doc.contains(key)) throw ValidationError(fmt::format("schema '{}' lacks required key '{}'", path, key));

  CsvSchema schema;
  try {
    schema.target = doc.at("target").get<std::string>();
    schema.protected_column = doc.at("protected").get<std::string>();
    schema.task = parse_task(doc.at("task").get<std::string>());
    if (doc.contains("positive_label")) {
      const auto& p = doc.at("positive_label");
      schema.positive_label = p.is_string() ? p.get<std::string>() : p.dump();
    }
    if (doc.contains("categorical")) schema.categorical = doc.at("categorical").get<std::vector<std::string>>();
    if (doc.contains("ignore")) schema.ignore = doc.at("ignore").get<std::vector<std::string>>();
    if (doc.contains("group_1")) {
      const auto& g = doc.at("group_1");
      schema.group_1 = g.is_string() ? g.get<std::string>() : g.dump();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(fmt::format("schema '{}': {}", path, e.what()));
  }
  if (schema.task == Task::Logistic && !schema.positive_label)
    throw ValidationError("logistic schema requires positive_label");
  return schema;
}

Dataset load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot open data file '{}'", path));
  return parse_csv(in, schema);
}

Dataset parse_csv(std::istream& in, const CsvSchema& schema) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("CSV has no header row");
  const auto header = split_csv_line(line);
  std::map<std::string, std::size_t> column_of;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (!column_of.emplace(header[c], c).second)
      throw ValidationError(fmt::format("duplicate column '{}'", header[c]));
  }
  auto require = [&](const std::string& name) {
    auto it = column_of.find(name);
    if (it == column_of.end()) throw ValidationError(fmt::format("missing column '{}'", name));
    return it->second;
  };
  const std::size_t target_col = require(schema.target);
  const std::size_t protected_col = require(schema.protected_column);
  std::set<std::size_t> categorical_cols, ignored_cols;
  for (const auto& name : schema.categorical) categorical_cols.insert(require(name));
  for (const auto& name : schema.ignore) ignored_cols.insert(require(name));

  std::vector<std::vector<std::string>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != header.size())
      throw ValidationError(
          fmt::format("line {}: expected {} fields, found {}", line_no, header.size(), fields.size()));
    rows.push_back(std::move(fields));
  }
  if (rows.empty()) throw ValidationError("CSV has no data rows");
  const std::size_t n = rows.size();

  // protected column -> groups
  std::set<std::string> levels;
  for (std::size_t r = 0; r < n; ++r) {
    const auto& cell = rows[r][protected_col];
    if (is_missing(cell)) throw ValidationError(fmt::format("row {}: missing protected value", r + 1));
    levels.insert(cell);
  }
  if (levels.size() != 2)
    throw ValidationError(fmt::format("protected column not binary: '{}' has {} distinct values",
                                      schema.protected_column, levels.size()));
  std::string first_group = *levels.begin();
  if (schema.group_1) {
    if (!levels.contains(*schema.group_1))
      throw ValidationError(fmt::format("group_1 value '{}' does not occur in column '{}'", *schema.group_1,
                                        schema.protected_column));
    first_group = *schema.group_1;
  }
  std::vector<int> groups(n);
  for (std::size_t r = 0; r < n; ++r) groups[r] = rows[r][protected_col] == first_group ? 1 : 2;

  Eigen::VectorXd labels(static_cast<Eigen::Index>(n));
  for (std::size_t r = 0; r < n; ++r) {
    const auto& cell = rows[r][target_col];
    if (is_missing(cell)) throw ValidationError(fmt::format("row {}: missing target value", r + 1));
    if (schema.task == Task::Logistic) {
      if (!schema.positive_label) throw ValidationError("logistic schema requires positive_label");
      labels[static_cast<Eigen::Index>(r)] = cell == *schema.positive_label ? 1.0 : -1.0;
    } else {
      auto v = parse_number(cell);
      if (!v) throw ValidationError(fmt::format("row {}: unparseable numeric target '{}'", r + 1, cell));
      labels[static_cast<Eigen::Index>(r)] = *v;
    }
  }

  // feature columns, expanded
  std::vector<std::vector<double>> columns;
  std::vector<std::string> names;
  std::vector<std::vector<double>> missing_columns;
  std::vector<std::string> missing_names;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c == target_col || c == protected_col || ignored_cols.contains(c)) continue;
    std::vector<double> missing(n, 0.0);
    bool any_missing = false;
    for (std::size_t r = 0; r < n; ++r)
      if (is_missing(rows[r][c])) {
        missing[r] = 1.0;
        any_missing = true;
      }
    if (categorical_cols.contains(c)) {
      std::set<std::string> cats;
      for (std::size_t r = 0; r < n; ++r)
        if (!missing[r]) cats.insert(rows[r][c]);
      for (const auto& level : cats) {
        std::vector<double> col(n, 0.0);
        for (std::size_t r = 0; r < n; ++r) col[r] = rows[r][c] == level ? 1.0 : 0.0;
        columns.push_back(std::move(col));
        names.push_back(header[c] + "=" + level);
      }
    } else {
      std::vector<double> col(n, 0.0);
      double sum = 0.0;
      std::size_t observed = 0;
      for (std::size_t r = 0; r < n; ++r) {
        if (missing[r]) continue;
        auto v = parse_number(rows[r][c]);
        if (!v)
          throw ValidationError(
              fmt::format("row {}: unparseable numeric cell '{}' in column '{}'", r + 1, rows[r][c], header[c]));
        col[r] = *v;
        sum += *v;
        ++observed;
      }
      const double fill = observed > 0 ? sum / static_cast<double>(observed) : 0.0;
      for (std::size_t r = 0; r < n; ++r)
        if (missing[r]) col[r] = fill;
      columns.push_back(std::move(col));
      names.push_back(header[c]);
    }
    if (any_missing) {
      missing_columns.push_back(std::move(missing));
      missing_names.push_back(header[c] + ":missing");
    }
  }
  for (std::size_t m = 0; m < missing_columns.size(); ++m) {
    columns.push_back(std::move(missing_columns[m]));
    names.push_back(std::move(missing_names[m]));
  }

  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t c = 0; c < columns.size(); ++c)
    for (std::size_t r = 0; r < n; ++r)
      x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = columns[c][r];
  return Dataset(std::move(x), std::move(labels), std::move(groups), schema.task, std::move(names));
}

// ---------------------------------------------------------------------------
// Normalization

NormalizationStats fit_normalization(const Dataset& data, std::span<const Index> train_indices) {
  if (train_indices.empty()) throw ValidationError("fit_normalization needs at least one training row");
  const auto d = static_cast<Eigen::Index>(data.dim());
  const double m = static_cast<double>(train_indices.size());
  NormalizationStats stats;
  stats.feature_mean = Eigen::VectorXd::Zero(d);
  stats.feature_std = Eigen::VectorXd::Zero(d);
  for (Index i : train_indices) stats.feature_mean += data.row(i);
  stats.feature_mean /= m;
  for (Index i : train_indices) stats.feature_std += (data.row(i) - stats.feature_mean).array().square().matrix();
  stats.feature_std = (stats.feature_std / m).cwiseSqrt();

  if (data.task() == Task::Linear) {
    TargetStats t;
    for (Index i : train_indices) t.mean += data.label(i);
    t.mean /= m;
    double ss = 0.0;
    for (Index i : train_indices) ss += (data.label(i) - t.mean) * (data.label(i) - t.mean);
    t.std = std::sqrt(ss / m);
    stats.target = t;
  }
  return stats;
}

Dataset apply_normalization(const Dataset& data, const NormalizationStats& stats) {
  const auto d = static_cast<Eigen::Index>(data.dim());
  if (stats.feature_mean.size() != d || stats.feature_std.size() != d)
    throw ValidationError(fmt::format("normalization stats cover {} features, dataset has {}",
                                      stats.feature_mean.size(), d));
  if (data.task() == Task::Linear && !stats.target)
    throw ValidationError("normalization stats lack target statistics for a linear task");

  Eigen::MatrixXd x = data.features();
  for (Eigen::Index c = 0; c < d; ++c) {
    if (stats.feature_std[c] > 0.0)
      x.col(c) = (x.col(c).array() - stats.feature_mean[c]) / stats.feature_std[c];
    else
      x.col(c).setZero();
  }
  Eigen::VectorXd y = data.labels();
  if (data.task() == Task::Linear) {
    const auto& t = *stats.target;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      const double z = t.std > 0.0 ? (y[i] - t.mean) / t.std : 0.0;
      y[i] = std::clamp(z, -1.0, 1.0);
    }
  }
  return Dataset(std::move(x), std::move(y), data.groups(), data.task(), data.feature_names());
}

Eigen::MatrixXd invert_feature_normalization(const Eigen::MatrixXd& normalized, const NormalizationStats& stats) {
  if (normalized.cols() != stats.feature_mean.size())
    throw ValidationError("dimension mismatch in invert_feature_normalization");
  Eigen::MatrixXd x = normalized;
  for (Eigen::Index c = 0; c < x.cols(); ++c)
    if (stats.feature_std[c] > 0.0) x.col(c) = x.col(c).array() * stats.feature_std[c] + stats.feature_mean[c];
  return x;
}

// ---------------------------------------------------------------------------
// Folds

IndexList FoldPlan::test_indices(std::size_t fold) const {
  IndexList out;
  for (Index i = 0; i < assignment.size(); ++i)
    if (assignment[i] == fold) out.push_back(i);
  return out;
}

IndexList FoldPlan::train_indices(std::size_t fold) const {
  IndexList out;
  for (Index i = 0; i < assignment.size(); ++i)
    if (assignment[i] != fold) out.push_back(i);
  return out;
}

std::vector<std::size_t> FoldPlan::fold_sizes() const {
  std::vector<std::size_t> sizes(k, 0);
  for (auto f : assignment) ++sizes.at(f);
  return sizes;
}

namespace {

void check_fold_args(std::size_t n, std::size_t k) {
  if (k < 2) throw ValidationError(fmt::format("fold count {} must be at least 2", k));
  if (k > n) throw ValidationError(fmt::format("fold count {} exceeds row count {}", k, n));
}

}  // namespace

FoldPlan make_folds(std::size_t n, std::size_t k, std::uint64_t seed) {
  check_fold_args(n, k);
  std::vector<Index> order(n);
  for (Index i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(std::span<Index>(order));
  FoldPlan plan{k, std::vector<std::size_t>(n), seed};
  for (std::size_t p = 0; p < n; ++p) plan.assignment[order[p]] = p % k;
  return plan;
}

FoldPlan make_stratified_folds(std::span<const int> strata, std::size_t k, std::uint64_t seed) {
  const std::size_t n = strata.size();
  check_fold_args(n, k);
  std::map<int, std::vector<Index>> members;
  for (Index i = 0; i < n; ++i) members[strata[i]].push_back(i);
  Rng rng(seed);
  // Dealing the concatenated shuffled strata round-robin keeps the global
  // sizes within 1 and each stratum's per-fold counts within 1.
  FoldPlan plan{k, std::vector<std::size_t>(n), seed};
  std::size_t position = 0;
  for (auto& [stratum, rows] : members) {
    rng.shuffle(std::span<Index>(rows));
    for (Index i : rows) plan.assignment[i] = position++ % k;
  }
  return plan;
}

std::vector<int> experiment_strata(const Dataset& data) {
  std::vector<int> strata(data.size());
  for (Index i = 0; i < data.size(); ++i) {
    // logistic ids 10, 11, 20, 21 keep each group's strata adjacent when dealt
    strata[i] = data.task() == Task::Logistic ? 10 * data.group(i) + (data.label(i) > 0 ? 1 : 0) : data.group(i);
  }
  return strata;
}

// ---------------------------------------------------------------------------
// Cross pairs

std::size_t default_pair_count(const Dataset& data, std::span<const Index> indices) {
  const auto n1 = data.group_members(1, indices).size();
  const auto n2 = data.group_members(2, indices).size();
  return 2 * std::min(n1, n2);
}

CrossPairSet sample_cross_pairs(const Dataset& data, std::span<const Index> indices,
                                std::optional<std::size_t> count, const DistanceWeight& weight,
                                std::uint64_t seed) {
  const IndexList first = data.group_members(1, indices);
  const IndexList second = data.group_members(2, indices);
  if (first.empty() || second.empty())
    throw ValidationError("cannot form cross pairs: a group is absent from the selected rows");
  const std::uint64_t n1 = first.size();
  const std::uint64_t n2 = second.size();
  const std::uint64_t total = n1 * n2;
  const std::uint64_t want = std::min<std::uint64_t>(count.value_or(2 * std::min(n1, n2)), total);

  std::vector<std::uint64_t> ids;
  ids.reserve(want);
  if (want == total) {
    for (std::uint64_t id = 0; id < total; ++id) ids.push_back(id);
  } else {
    // Floyd's sampling: a uniformly random subset of size `want`.
    std::unordered_set<std::uint64_t> chosen;
    chosen.reserve(want * 2);
    Rng rng(seed);
    for (std::uint64_t j = total - want; j < total; ++j) {
      const std::uint64_t t = rng.below(j + 1);
      chosen.insert(chosen.contains(t) ? j : t);
    }
    ids.assign(chosen.begin(), chosen.end());
  }

  CrossPairSet out;
  out.seed = seed;
  out.pairs.reserve(ids.size());
  for (auto id : ids) out.pairs.emplace_back(first[id / n2], second[id % n2]);
  std::sort(out.pairs.begin(), out.pairs.end());
  out.weights.reserve(out.pairs.size());
  for (const auto& [i, j] : out.pairs) out.weights.push_back(weight(data.label(i), data.label(j)));
  return out;
}

}  // namespace fairreg
