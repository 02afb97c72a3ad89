#include "fairreg/fairness.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "fairreg/error.hpp"
#include "fairreg/model.hpp"

namespace fairreg {

DistanceWeight DistanceWeight::constant(double c) {
  if (!(c >= 0.0) || !std::isfinite(c))
    throw ValidationError(fmt::format("constant pair weight must be finite and >= 0, got {}", c));
  return DistanceWeight(Kind::Constant, c);
}

double DistanceWeight::operator()(double y_i, double y_j) const {
  switch (kind_) {
    case Kind::Gaussian: {
      const double gap = y_i - y_j;
      return std::exp(-gap * gap);
    }
    case Kind::Indicator:
      return y_i == y_j ? 1.0 : 0.0;
    case Kind::Constant:
      return c_;
  }
  return 0.0;
}

std::string to_string(DistanceWeight::Kind kind) {
  switch (kind) {
    case DistanceWeight::Kind::Gaussian: return "gaussian";
    case DistanceWeight::Kind::Indicator: return "indicator";
    case DistanceWeight::Kind::Constant: return "constant";
  }
  return "?";
}

DistanceWeight::Kind parse_weight_kind(const std::string& name) {
  if (name == "gaussian") return DistanceWeight::Kind::Gaussian;
  if (name == "indicator") return DistanceWeight::Kind::Indicator;
  if (name == "constant") return DistanceWeight::Kind::Constant;
  throw ValidationError(fmt::format("unknown weight kind '{}' (expected gaussian, indicator or constant)", name));
}

std::string to_string(PenaltyKind kind) {
  switch (kind) {
    case PenaltyKind::Individual: return "individual";
    case PenaltyKind::Group: return "group";
    case PenaltyKind::Hybrid: return "hybrid";
  }
  return "?";
}

PenaltyKind parse_penalty(const std::string& name) {
  if (name == "individual") return PenaltyKind::Individual;
  if (name == "group") return PenaltyKind::Group;
  if (name == "hybrid") return PenaltyKind::Hybrid;
  throw ValidationError(fmt::format("unknown penalty '{}' (expected individual, group or hybrid)", name));
}

Eigen::VectorXd unified_diff_vector(const Eigen::VectorXd& x_i, const Eigen::VectorXd& x_j, ModelMode mode) {
  if (x_i.size() != x_j.size())
    throw ValidationError(fmt::format("feature dimension mismatch: {} vs {}", x_i.size(), x_j.size()));
  const Eigen::Index d = x_i.size();
  if (mode == ModelMode::SingleModel) {
    Eigen::VectorXd u(d + 1);
    u.head(d) = x_i - x_j;
    u[d] = 0.0;
    return u;
  }
  Eigen::VectorXd u(2 * (d + 1));
  u.head(d) = x_i;
  u[d] = 1.0;
  u.segment(d + 1, d) = -x_j;
  u[2 * d + 1] = -1.0;
  return u;
}

PenaltyForm::PenaltyForm(PenaltyKind kind, ModelMode mode, Index feature_dim, Eigen::MatrixXd quad,
                         std::vector<Bucket> buckets)
    : kind_(kind), mode_(mode), d_(feature_dim), quad_(std::move(quad)), buckets_(std::move(buckets)) {
  const auto n = static_cast<Eigen::Index>(dim());
  if (kind_ == PenaltyKind::Individual) {
    if (quad_.rows() != n || quad_.cols() != n) throw ValidationError("penalty matrix has the wrong shape");
  } else {
    for (const auto& b : buckets_)
      if (b.direction.size() != n) throw ValidationError("penalty bucket has the wrong dimension");
  }
  if (kind_ == PenaltyKind::Individual) {
    hessian_ = 2.0 * quad_;
  } else {
    hessian_ = Eigen::MatrixXd::Zero(n, n);
    for (const auto& b : buckets_) hessian_.noalias() += 2.0 * b.weight * b.direction * b.direction.transpose();
  }
}

namespace {

void require_binary_labels(const Dataset& data) {
  if (data.task() != Task::Logistic) throw ValidationError("hybrid requires binary labels");
}

}  // namespace

PenaltyForm build_penalty_form(const CrossPairSet& pairs, const Dataset& data, PenaltyKind kind, ModelMode mode,
                               HybridWeights hybrid, EmptyBucketPolicy empty) {
  if (pairs.weights.size() != pairs.pairs.size()) throw ValidationError("cross pair set has mismatched weights");
  const Index d = data.dim();
  const auto n = static_cast<Eigen::Index>(ModelParams::unified_dim(mode, d));
  const double total = static_cast<double>(pairs.size());

  switch (kind) {
    case PenaltyKind::Individual: {
      Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
      for (std::size_t p = 0; p < pairs.size(); ++p) {
        const auto [i, j] = pairs.pairs[p];
        const Eigen::VectorXd u = unified_diff_vector(data.row(i), data.row(j), mode);
        a.selfadjointView<Eigen::Lower>().rankUpdate(u, pairs.weights[p]);
      }
      a.triangularView<Eigen::StrictlyUpper>() = a.transpose();
      if (total > 0) a /= total;
      return PenaltyForm(kind, mode, d, std::move(a), {});
    }
    case PenaltyKind::Group: {
      Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
      for (std::size_t p = 0; p < pairs.size(); ++p) {
        const auto [i, j] = pairs.pairs[p];
        v += pairs.weights[p] * unified_diff_vector(data.row(i), data.row(j), mode);
      }
      if (total > 0) v /= total;
      return PenaltyForm(kind, mode, d, {}, {PenaltyForm::Bucket{std::move(v), 1.0, pairs.size()}});
    }
    case PenaltyKind::Hybrid: {
      require_binary_labels(data);
      std::vector<PenaltyForm::Bucket> buckets;
      for (double label : {1.0, -1.0}) {
        PenaltyForm::Bucket bucket{Eigen::VectorXd::Zero(n), label > 0 ? hybrid.positive : hybrid.negative, 0};
        for (std::size_t p = 0; p < pairs.size(); ++p) {
          const auto [i, j] = pairs.pairs[p];
          if (data.label(i) != label || data.label(j) != label) continue;
          bucket.direction += pairs.weights[p] * unified_diff_vector(data.row(i), data.row(j), mode);
          ++bucket.pair_count;
        }
        if (bucket.pair_count == 0) {
          if (empty == EmptyBucketPolicy::Skip) continue;
          throw ValidationError(fmt::format("hybrid penalty: no sampled cross pair has both labels {:+}", label));
        }
        bucket.direction /= static_cast<double>(bucket.pair_count);
        buckets.push_back(std::move(bucket));
      }
      return PenaltyForm(kind, mode, d, {}, std::move(buckets));
    }
  }
  throw ValidationError("unknown penalty kind");
}

namespace {

void check_dim(const PenaltyForm& form, const Eigen::VectorXd& theta) {
  if (static_cast<Index>(theta.size()) != form.dim())
    throw ValidationError(
        fmt::format("parameter dimension {} does not match penalty dimension {}", theta.size(), form.dim()));
}

void check_params(const PenaltyForm& form, const ModelParams& params) {
  if (params.mode() != form.mode() || params.feature_dim() != form.feature_dim())
    throw ValidationError(fmt::format("model ({}, d={}) does not match penalty ({}, d={})", to_string(params.mode()),
                                      params.feature_dim(), to_string(form.mode()), form.feature_dim()));
}

}  // namespace

double eval_penalty(const PenaltyForm& form, const Eigen::VectorXd& theta) {
  check_dim(form, theta);
  if (form.kind() == PenaltyKind::Individual) return std::max(0.0, theta.dot(form.quad() * theta));
  double total = 0.0;
  for (const auto& b : form.buckets()) {
    const double s = b.direction.dot(theta);
    total += b.weight * s * s;
  }
  return total;
}

double eval_penalty(const PenaltyForm& form, const ModelParams& params) {
  check_params(form, params);
  return eval_penalty(form, params.unified());
}

Eigen::VectorXd penalty_gradient(const PenaltyForm& form, const Eigen::VectorXd& theta) {
  check_dim(form, theta);
  if (form.kind() == PenaltyKind::Individual) return 2.0 * (form.quad() * theta);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(theta.size());
  for (const auto& b : form.buckets()) g += 2.0 * b.weight * b.direction.dot(theta) * b.direction;
  return g;
}

Eigen::VectorXd penalty_gradient(const PenaltyForm& form, const ModelParams& params) {
  check_params(form, params);
  return penalty_gradient(form, params.unified());
}

double eval_penalty_bruteforce(const CrossPairSet& pairs, const Dataset& data, PenaltyKind kind,
                               const ModelParams& params, HybridWeights hybrid) {
  if (params.feature_dim() != data.dim())
    throw ValidationError(fmt::format("model has {} features, dataset has {}", params.feature_dim(), data.dim()));
  auto gap = [&](std::size_t p) {
    const auto [i, j] = pairs.pairs[p];
    return predict(params, data.row(i), 1) - predict(params, data.row(j), 2);
  };
  if (pairs.empty()) return 0.0;
  const double total = static_cast<double>(pairs.size());

  switch (kind) {
    case PenaltyKind::Individual: {
      double sum = 0.0;
      for (std::size_t p = 0; p < pairs.size(); ++p) {
        const double g = gap(p);
        sum += pairs.weights[p] * g * g;
      }
      return sum / total;
    }
    case PenaltyKind::Group: {
      double sum = 0.0;
      for (std::size_t p = 0; p < pairs.size(); ++p) sum += pairs.weights[p] * gap(p);
      const double mean = sum / total;
      return mean * mean;
    }
    case PenaltyKind::Hybrid: {
      require_binary_labels(data);
      double result = 0.0;
      for (double label : {1.0, -1.0}) {
        double sum = 0.0;
        std::size_t count = 0;
        for (std::size_t p = 0; p < pairs.size(); ++p) {
          const auto [i, j] = pairs.pairs[p];
          if (data.label(i) != label || data.label(j) != label) continue;
          sum += pairs.weights[p] * gap(p);
          ++count;
        }
        if (count == 0) continue;
        const double mean = sum / static_cast<double>(count);
        result += (label > 0 ? hybrid.positive : hybrid.negative) * mean * mean;
      }
      return result;
    }
  }
  throw ValidationError("unknown penalty kind");
}

}  // namespace fairreg
