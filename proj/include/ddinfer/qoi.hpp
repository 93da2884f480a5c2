#pragma once

#include "ddinfer/phase_space.hpp"

#include <memory>
#include <optional>
#include <string>

namespace ddinfer {

enum class QoiKind { One, Sigma, Eps, Gap, ZNorm, Affine, Quadratic, Clipped };

/// Quantity of interest f(y, z) on Z x Z.
///
/// Coordinate and affine quantities read the stacked pair [y; z] of length 4N.
/// Edge indices are 0-based here; the text syntax of `parse_qoi` is 1-based.
class QuantityOfInterest {
 public:
  static QuantityOfInterest one();
  static QuantityOfInterest sigma(Eigen::Index edge);
  static QuantityOfInterest eps(Eigen::Index edge);
  /// |y - z| in the energy norm.
  static QuantityOfInterest gap();
  /// |z| in the energy norm.
  static QuantityOfInterest z_norm();
  /// w . [y; z] + c.
  static QuantityOfInterest affine(Vec w, double c = 0.0);
  /// [y; z]^T M [y; z] + w . [y; z] + c, M symmetric.
  static QuantityOfInterest quadratic(Mat m, Vec w, double c = 0.0);
  static QuantityOfInterest clipped(QuantityOfInterest inner, double lo, double hi);

  QoiKind kind() const { return kind_; }
  const std::string& name() const { return name_; }
  /// True when f is bounded (a C_b quantity); coordinate and affine
  /// quantities are unbounded and only meaningful under Gaussian tails.
  bool bounded() const;

  double operator()(const Vec& y, const Vec& z, const EnergyMetric& metric) const;

  struct AffineForm {
    Vec w;
    double c = 0.0;
  };
  struct QuadraticForm {
    Mat m;
    Vec w;
    double c = 0.0;
  };
  /// Affine representation over [y; z] for N edges, if f is affine.
  std::optional<AffineForm> affine_form(Eigen::Index edges) const;
  /// Quadratic representation (affine ones included), if f is polynomial of
  /// degree <= 2.
  std::optional<QuadraticForm> quadratic_form(Eigen::Index edges) const;

 private:
  friend QuantityOfInterest parse_qoi(const std::string& text);

  QoiKind kind_ = QoiKind::One;
  std::string name_ = "one";
  Eigen::Index index_ = 0;
  Vec coeffs_;  // affine: raw coefficient list (4N, or 4N + constant)
  Mat matrix_;
  double constant_ = 0.0;
  double lo_ = 0.0;
  double hi_ = 0.0;
  std::shared_ptr<const QuantityOfInterest> inner_;
};

/// Text form: "one", "sigma[e]", "eps[e]", "gap", "znorm",
/// "affine:w1,...,wM" (M = 4N, or 4N + 1 with the constant last) and
/// "clip[lo,hi]:<qoi>". Edge indices are 1-based.
QuantityOfInterest parse_qoi(const std::string& text);

}  // namespace ddinfer
