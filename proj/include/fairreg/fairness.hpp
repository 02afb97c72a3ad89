#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fairreg/dataset.hpp"
#include "fairreg/params.hpp"
#include "fairreg/weights.hpp"

namespace fairreg {

/// Individual: mean weighted squared prediction gap over cross pairs.
/// Group: square of the mean weighted signed gap (gaps may cancel).
/// Hybrid: group-style term per same-label bucket (binary labels only).
enum class PenaltyKind { Individual, Group, Hybrid };

std::string to_string(PenaltyKind kind);
PenaltyKind parse_penalty(const std::string& name);

/// Relative weights of the +1 and -1 buckets of the hybrid penalty.
struct HybridWeights {
  double positive = 1.0;
  double negative = 1.0;

  bool operator==(const HybridWeights&) const = default;
};

/// What build_penalty_form does with a hybrid bucket that received no pairs.
/// Training requires both buckets; held-out folds may legitimately miss one,
/// in which case the empty sum contributes nothing.
enum class EmptyBucketPolicy { Reject, Skip };

/// Maps the gap "prediction for i minus prediction for j" to one inner
/// product with theta.
///
/// SingleModel:    (x_i - x_j, 0)        the intercept cancels
/// SeparateModels: (x_i, 1, -x_j, -1)    each group keeps its own intercept
Eigen::VectorXd unified_diff_vector(const Eigen::VectorXd& x_i, const Eigen::VectorXd& x_j, ModelMode mode);

/// A fairness penalty precomputed as a quadratic form in theta.
///
/// Individual penalties keep a PSD matrix A with f = theta' A theta. Group
/// and hybrid penalties keep rank-one buckets (v_b, w_b) with
/// f = sum_b w_b (v_b . theta)^2, which avoids forming A.
class PenaltyForm {
 public:
  struct Bucket {
    Eigen::VectorXd direction;
    double weight = 1.0;
    std::size_t pair_count = 0;
  };

  PenaltyForm(PenaltyKind kind, ModelMode mode, Index feature_dim, Eigen::MatrixXd quad,
              std::vector<Bucket> buckets);

  PenaltyKind kind() const { return kind_; }
  ModelMode mode() const { return mode_; }
  Index feature_dim() const { return d_; }
  Index dim() const { return ModelParams::unified_dim(mode_, d_); }

  /// Individual only; empty otherwise.
  const Eigen::MatrixXd& quad() const { return quad_; }
  const std::vector<Bucket>& buckets() const { return buckets_; }

  /// Hessian of the penalty (2A, or sum of 2 w_b v_b v_b'), built once.
  const Eigen::MatrixXd& hessian() const { return hessian_; }

 private:
  PenaltyKind kind_;
  ModelMode mode_;
  Index d_;
  Eigen::MatrixXd quad_;
  std::vector<Bucket> buckets_;
  Eigen::MatrixXd hessian_;
};

/// Precomputes the penalty over `pairs` (drawn from `data`).
///
/// Sums are normalized by the number of sampled pairs, and hybrid buckets by
/// the number of sampled pairs inside the bucket; with every cross pair
/// present these are exactly n_1 n_2 and n_{1,t} n_{2,t}.
PenaltyForm build_penalty_form(const CrossPairSet& pairs, const Dataset& data, PenaltyKind kind, ModelMode mode,
                               HybridWeights hybrid = {}, EmptyBucketPolicy empty = EmptyBucketPolicy::Reject);

double eval_penalty(const PenaltyForm& form, const ModelParams& params);
double eval_penalty(const PenaltyForm& form, const Eigen::VectorXd& theta);

Eigen::VectorXd penalty_gradient(const PenaltyForm& form, const ModelParams& params);
Eigen::VectorXd penalty_gradient(const PenaltyForm& form, const Eigen::VectorXd& theta);

/// Literal double sums over the pairs using model predictions. Kept as the
/// reference the precomputed forms are checked against.
double eval_penalty_bruteforce(const CrossPairSet& pairs, const Dataset& data, PenaltyKind kind,
                               const ModelParams& params, HybridWeights hybrid = {});

}  // namespace fairreg
