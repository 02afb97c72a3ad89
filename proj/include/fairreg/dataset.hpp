#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "fairreg/weights.hpp"

namespace fairreg {

using Index = std::size_t;
using IndexList = std::vector<Index>;

enum class Task { Linear, Logistic };

std::string to_string(Task task);
Task parse_task(const std::string& name);

/// Tabular data split into two protected groups, labelled 1 and 2.
///
/// Immutable after construction. The constructor enforces: every group id
/// is 1 or 2, both groups are nonempty, all values are finite and logistic
/// labels are exactly -1 or +1. Linear labels are only required to lie in
/// [-1, 1] once normalized (see apply_normalization).
class Dataset {
 public:
  Dataset(Eigen::MatrixXd features, Eigen::VectorXd labels, std::vector<int> groups, Task task,
          std::vector<std::string> feature_names = {});

  Index size() const { return static_cast<Index>(labels_.size()); }
  Index dim() const { return static_cast<Index>(features_.cols()); }
  Task task() const { return task_; }

  const Eigen::MatrixXd& features() const { return features_; }
  const Eigen::VectorXd& labels() const { return labels_; }
  const std::vector<int>& groups() const { return groups_; }
  const std::vector<std::string>& feature_names() const { return feature_names_; }

  auto row(Index i) const { return features_.row(static_cast<Eigen::Index>(i)).transpose(); }
  double label(Index i) const { return labels_[static_cast<Eigen::Index>(i)]; }
  int group(Index i) const { return groups_[i]; }

  IndexList all_indices() const;
  /// Members of group g among `indices`, in the order given.
  IndexList group_members(int g, std::span<const Index> indices) const;
  /// Rows restricted to `indices` as a new dataset (group invariants re-checked).
  Dataset subset(std::span<const Index> indices) const;

 private:
  Eigen::MatrixXd features_;
  Eigen::VectorXd labels_;
  std::vector<int> groups_;
  Task task_;
  std::vector<std::string> feature_names_;
};

// ---------------------------------------------------------------------------
// CSV ingestion

/// Column roles for load_csv. Read from a JSON key-value document with keys
/// target, protected, task, positive_label (logistic only) and the optional
/// categorical (list), ignore (list) and group_1 (raw protected value that
/// becomes group 1; otherwise the lexicographically smaller value).
struct CsvSchema {
  std::string target;
  std::string protected_column;
  Task task = Task::Linear;
  std::optional<std::string> positive_label;
  std::vector<std::string> categorical;
  std::vector<std::string> ignore;
  std::optional<std::string> group_1;
};

CsvSchema load_schema(const std::string& path);

/// Comma-delimited, header row first, empty cell or NA marks a missing
/// value. Categorical columns expand to one indicator per level; every
/// feature column with missing entries gets an indicator column appended
/// after all other features. Missing numeric cells are filled with the
/// column's observed mean.
Dataset load_csv(const std::string& path, const CsvSchema& schema);
Dataset parse_csv(std::istream& in, const CsvSchema& schema);

// ---------------------------------------------------------------------------
// Normalization

struct TargetStats {
  double mean = 0.0;
  double std = 0.0;
};

struct NormalizationStats {
  Eigen::VectorXd feature_mean;
  Eigen::VectorXd feature_std;  // population std; 0 marks a constant column
  std::optional<TargetStats> target;
};

/// Statistics from the rows in `train_indices` only.
NormalizationStats fit_normalization(const Dataset& data, std::span<const Index> train_indices);

/// z-scores every feature column (std 0 maps to 0). Linear targets are
/// z-scored the same way and then clamped to [-1, 1].
Dataset apply_normalization(const Dataset& data, const NormalizationStats& stats);

/// Undo the feature transform on columns with nonzero std.
Eigen::MatrixXd invert_feature_normalization(const Eigen::MatrixXd& normalized,
                                             const NormalizationStats& stats);

// ---------------------------------------------------------------------------
// Folds

struct FoldPlan {
  std::size_t k = 10;
  std::vector<std::size_t> assignment;  // fold id per row
  std::uint64_t seed = 0;

  IndexList test_indices(std::size_t fold) const;
  IndexList train_indices(std::size_t fold) const;
  std::vector<std::size_t> fold_sizes() const;

  bool operator==(const FoldPlan&) const = default;
};

/// Random partition of n rows into k folds whose sizes differ by at most 1.
FoldPlan make_folds(std::size_t n, std::size_t k, std::uint64_t seed);

/// Same balance guarantee, but rows sharing a stratum id are spread evenly
/// across folds, so a stratum with at least k members reaches every fold.
FoldPlan make_stratified_folds(std::span<const int> strata, std::size_t k, std::uint64_t seed);

/// Strata used by experiments: group, and label sign for logistic tasks.
/// A group with at least k rows reaches every fold.
std::vector<int> experiment_strata(const Dataset& data);

// ---------------------------------------------------------------------------
// Cross pairs

/// Sampled (i, j) pairs with group(i) = 1 and group(j) = 2, annotated with
/// d(y_i, y_j). Indices refer to rows of the dataset they were drawn from.
struct CrossPairSet {
  std::vector<std::pair<Index, Index>> pairs;
  std::vector<double> weights;
  std::uint64_t seed = 0;

  std::size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }

  bool operator==(const CrossPairSet&) const = default;
};

/// 2 * min(n_1, n_2) over `indices`.
std::size_t default_pair_count(const Dataset& data, std::span<const Index> indices);

/// Draws min(count, n_1 * n_2) distinct cross pairs uniformly without
/// replacement from the rows in `indices` (all of them when count covers
/// every pair), returned in lexicographic (i, j) order. Omitting `count`
/// uses default_pair_count.
CrossPairSet sample_cross_pairs(const Dataset& data, std::span<const Index> indices,
                                std::optional<std::size_t> count, const DistanceWeight& weight,
                                std::uint64_t seed);

}  // namespace fairreg
