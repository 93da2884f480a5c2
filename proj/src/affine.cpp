#include "ddinfer/affine.hpp"

#include <cmath>
#include <string>

namespace ddinfer {

Mat energy_orthonormalize(const EnergyMetric& metric, const Mat& vectors, double rel_tol,
                          const Mat* against) {
  const Eigen::Index dim = 2 * metric.edges();
  check_same_edges(vectors.rows(), dim, "energy_orthonormalize rows");
  const Vec g = metric.gram_diagonal();
  const Eigen::Index fixed = against ? against->cols() : 0;
  Mat q(dim, fixed + vectors.cols());
  if (against) q.leftCols(fixed) = *against;
  Eigen::Index count = fixed;
  for (Eigen::Index j = 0; j < vectors.cols(); ++j) {
    Vec r = vectors.col(j);
    const double original = std::sqrt(r.dot(g.cwiseProduct(r)));
    if (original == 0.0) continue;
    for (int pass = 0; pass < 2; ++pass) {
      for (Eigen::Index i = 0; i < count; ++i) {
        const double proj = q.col(i).dot(g.cwiseProduct(r));
        r -= proj * q.col(i);
      }
    }
    const double rn = std::sqrt(r.dot(g.cwiseProduct(r)));
    if (rn <= rel_tol * original) continue;
    q.col(count++) = r / rn;
  }
  return q.middleCols(fixed, count - fixed);
}

AffineSubspace::AffineSubspace(EnergyMetric metric, Mat basis, Vec offset)
    : metric_(std::move(metric)), basis_(std::move(basis)), offset_(std::move(offset)) {
  gram_ = metric_.gram_diagonal();
  const Eigen::Index dim = offset_.size();
  complement_ = energy_orthonormalize(metric_, Mat::Identity(dim, dim), 1e-8, &basis_);
  require(basis_.cols() + complement_.cols() == dim, ErrorKind::Numerical,
          "failed to complete an orthonormal basis of Z");
}

AffineSubspace AffineSubspace::from_spanning(const EnergyMetric& metric, const Vec& point,
                                             const Mat& spanning) {
  const Eigen::Index dim = 2 * metric.edges();
  check_same_edges(point.size(), dim, "AffineSubspace point");
  require(point.allFinite(), ErrorKind::InvalidArgument, "AffineSubspace point must be finite");
  Mat basis = spanning.cols() > 0 ? energy_orthonormalize(metric, spanning) : Mat(dim, 0);
  const Vec g = metric.gram_diagonal();
  Vec e0 = point;
  for (int pass = 0; pass < 2; ++pass) {
    for (Eigen::Index i = 0; i < basis.cols(); ++i) {
      e0 -= basis.col(i).dot(g.cwiseProduct(e0)) * basis.col(i);
    }
  }
  return AffineSubspace(metric, std::move(basis), std::move(e0));
}

Vec AffineSubspace::tangent_coords(const Vec& v) const {
  check_same_edges(v.size(), ambient_dim(), "AffineSubspace vector");
  return basis_.transpose() * gram_.cwiseProduct(v);
}

Vec AffineSubspace::project(const Vec& z) const {
  return offset_ + basis_ * tangent_coords(z - offset_);
}

PhaseVector AffineSubspace::project(const PhaseVector& z) const {
  return PhaseVector::from_stacked(project(z.stacked()));
}

double AffineSubspace::dist(const Vec& z) const { return metric_.norm(z - project(z)); }

double AffineSubspace::dist(const PhaseVector& z) const { return dist(z.stacked()); }

Vec AffineSubspace::coords(const Vec& z) const {
  const double d = dist(z);
  if (!(d < 1e-8)) {
    throw Error(ErrorKind::InvalidArgument,
                "coords: point is not on the subspace (distance " + format_double(d) + ")");
  }
  return tangent_coords(z - offset_);
}

Vec AffineSubspace::coords(const PhaseVector& z) const { return coords(z.stacked()); }

Vec AffineSubspace::embed(const Vec& c) const {
  check_same_edges(c.size(), dim(), "AffineSubspace chart coordinates");
  return offset_ + basis_ * c;
}

AffineSubspace AffineSubspace::with_rotated_basis(const Mat& rotation) const {
  require(rotation.rows() == dim() && rotation.cols() == dim(), ErrorKind::DimensionMismatch,
          "rotation must be dim x dim");
  const Mat defect = rotation.transpose() * rotation - Mat::Identity(dim(), dim());
  require(defect.cwiseAbs().maxCoeff() < 1e-10, ErrorKind::InvalidArgument,
          "rotation must be orthogonal");
  AffineSubspace out = *this;
  out.basis_ = basis_ * rotation;
  return out;
}

double AffineSubspace::orthonormality_defect() const {
  if (dim() == 0) return 0.0;
  const Mat gram = basis_.transpose() * gram_.asDiagonal() * basis_;
  const double defect = (gram - Mat::Identity(dim(), dim())).cwiseAbs().maxCoeff();
  return std::max(defect, tangent_coords(offset_).cwiseAbs().maxCoeff());
}

}  // namespace ddinfer
