#pragma once

#include <string>

namespace fairreg {

/// Similarity weight d(y_i, y_j) attached to each cross-group pair.
///
/// Gaussian is the choice for real-valued targets, Indicator for binary
/// targets. Constant(c) weights every pair equally, which turns the group
/// penalty into a squared gap between group mean predictions.
class DistanceWeight {
 public:
  enum class Kind { Gaussian, Indicator, Constant };

  static DistanceWeight gaussian() { return DistanceWeight(Kind::Gaussian, 1.0); }
  static DistanceWeight indicator() { return DistanceWeight(Kind::Indicator, 1.0); }
  static DistanceWeight constant(double c);

  Kind kind() const { return kind_; }
  double constant_value() const { return c_; }

  /// Largest value operator() can return.
  double upper_bound() const { return kind_ == Kind::Constant ? c_ : 1.0; }

  double operator()(double y_i, double y_j) const;

  bool operator==(const DistanceWeight&) const = default;

 private:
  DistanceWeight(Kind kind, double c) : kind_(kind), c_(c) {}

  Kind kind_;
  double c_;
};

/// Free-function spelling of DistanceWeight::operator().
inline double weight(const DistanceWeight& kind, double y_i, double y_j) { return kind(y_i, y_j); }

std::string to_string(DistanceWeight::Kind kind);
DistanceWeight::Kind parse_weight_kind(const std::string& name);

}  // namespace fairreg
