#pragma once

#include "ddinfer/phase_space.hpp"

namespace ddinfer {

/// Gram-Schmidt in the energy inner product (modified, with one
/// re-orthogonalization pass). Columns whose residual falls below
/// `rel_tol` times their original norm are dropped. If `against` is given, the
/// output is also made orthogonal to its (already orthonormal) columns.
Mat energy_orthonormalize(const EnergyMetric& metric, const Mat& vectors, double rel_tol = 1e-12,
                          const Mat* against = nullptr);

/// An affine subspace E = e0 + span(basis) of Z = R^{2N}.
///
/// The basis is orthonormal and e0 = P_E(0) is orthogonal to it, both with
/// respect to the energy inner product. Vectors are stacked [eps; sigma].
class AffineSubspace {
 public:
  AffineSubspace() = default;

  /// Builds E = point + span(spanning) after orthonormalizing `spanning`.
  static AffineSubspace from_spanning(const EnergyMetric& metric, const Vec& point,
                                      const Mat& spanning);

  const EnergyMetric& metric() const { return metric_; }
  const Mat& basis() const { return basis_; }
  /// Orthonormal basis of the orthogonal complement of E0.
  const Mat& complement() const { return complement_; }
  const Vec& offset() const { return offset_; }

  Eigen::Index ambient_dim() const { return offset_.size(); }
  Eigen::Index dim() const { return basis_.cols(); }

  Vec project(const Vec& z) const;
  PhaseVector project(const PhaseVector& z) const;
  double dist(const Vec& z) const;
  double dist(const PhaseVector& z) const;

  /// Chart coordinates of a point on E; throws if dist(z, E) >= 1e-8.
  Vec coords(const Vec& z) const;
  Vec coords(const PhaseVector& z) const;
  /// Isometry from Euclidean R^dim onto (E, energy norm).
  Vec embed(const Vec& c) const;

  /// Same subspace with basis B * R for an orthogonal R (used to check that
  /// downstream results do not depend on the basis).
  AffineSubspace with_rotated_basis(const Mat& rotation) const;

  /// Basis coefficients of the E0 component of v: <v, b_i>.
  Vec tangent_coords(const Vec& v) const;

  /// Maximum deviation from orthonormality and from <e0, b_i> = 0.
  double orthonormality_defect() const;

 private:
  AffineSubspace(EnergyMetric metric, Mat basis, Vec offset);

  EnergyMetric metric_;
  Mat basis_;
  Mat complement_;
  Vec offset_;
  Vec gram_;  // diagonal Gram matrix, cached
};

}  // namespace ddinfer
