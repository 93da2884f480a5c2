#pragma once

#include "ddinfer/affine.hpp"

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace ddinfer {

/// Phi(x) = 1/2 x^T H x + h^T x + c0 in stacked coordinates, H symmetric
/// positive semidefinite.
struct QuadraticPotential {
  Mat hessian;
  Vec linear;
  double constant = 0.0;

  QuadraticPotential() = default;
  QuadraticPotential(Mat hessian_, Vec linear_, double constant_);

  Eigen::Index ambient_dim() const { return linear.size(); }
  double operator()(const Vec& x) const;
  Vec gradient(const Vec& x) const;
};

/// Product of per-edge sliding Gaussians exp(-|sigma - C eps|^2 / (2 s^2 C)).
///
/// In T-coordinates each factor is exp(-t2^2 / s^2): Gaussian across the
/// material line and invariant along it, so the measure is infinite.
struct SlidingGaussianDensity {
  Vec coeffs;
  Vec scales;

  SlidingGaussianDensity() = default;
  SlidingGaussianDensity(Vec coeffs_, Vec scales_);

  Eigen::Index edges() const { return coeffs.size(); }
  QuadraticPotential quadratic() const;
};

double phi(const PhaseVector& y, const SlidingGaussianDensity& d);
double phi(const Vec& stacked, const SlidingGaussianDensity& d);

/// Axis-aligned square [a1, b1] x [a2, b2] in the T-coordinates of one edge.
/// Bounds may be infinite.
struct TCell {
  double a1, b1, a2, b2;
};

/// mu_{D,e}(cell) in closed form; unit Jacobian of T_e.
double cell_mass(const SlidingGaussianDensity& d, const TCell& cell, Eigen::Index edge);

/// Closed-form integral of |T(y) - (p1, p2)|^2 over a cell against mu_{D,e}.
double cell_second_moment(const SlidingGaussianDensity& d, const TCell& cell, Eigen::Index edge,
                          double p1, double p2);

/// Per-edge lattice T(p_e) in origin + eps Z^2 restricted to an index box.
struct EdgeGrid {
  double eps = 1.0;
  double origin = 0.0;
  std::array<long, 2> lo{0, 0};
  std::array<long, 2> hi{0, 0};

  long count(int axis) const { return hi[axis] - lo[axis] + 1; }
  std::size_t cells() const { return static_cast<std::size_t>(count(0) * count(1)); }
  double node(int /*axis*/, long k) const { return origin + eps * static_cast<double>(k); }
};

/// Product partition of the truncation box: cells A_p = T(p) + (-eps/2, eps/2]^2
/// per edge. Atom index is mixed-radix over edges, last edge fastest.
class GridPartition {
 public:
  GridPartition() = default;
  GridPartition(std::vector<EdgeGrid> edges, double radius, Vec center_t, Vec coeffs);

  const std::vector<EdgeGrid>& edges() const { return edges_; }
  double radius() const { return radius_; }
  const Vec& center_t() const { return center_t_; }
  const Vec& coeffs() const { return coeffs_; }
  std::size_t size() const { return size_; }

  /// Per-edge (k1, k2) lattice indices of atom i.
  std::vector<std::array<long, 2>> indices(std::size_t atom) const;
  std::size_t atom(const std::vector<std::array<long, 2>>& idx) const;
  /// Index of the cell containing y, if y lies in the partitioned region.
  std::optional<std::size_t> locate(const Vec& stacked) const;
  Vec representative(std::size_t atom) const;
  TCell cell(std::size_t atom, std::size_t edge) const;

 private:
  std::vector<EdgeGrid> edges_;
  std::vector<std::size_t> strides_;
  double radius_ = 0.0;
  Vec center_t_;
  Vec coeffs_;
  std::size_t size_ = 0;
};

struct EmpiricalMeta {
  double eps_h = 0.0;
  double delta_h = 0.0;
  double c_star = 1.0;
  double truncation_radius = 0.0;
};

/// Weighted point cloud sum_p m_p delta_p on Z. Points are stacked columns.
struct EmpiricalMeasure {
  Mat points;   // 2N x |P|
  Vec weights;  // m_p >= 0
  std::optional<EmpiricalMeta> meta;
  std::optional<GridPartition> partition;
  Vec reference_mass;  // mu_D(A_p) per atom when generated from a partition

  std::size_t size() const { return static_cast<std::size_t>(points.cols()); }
  Eigen::Index edges() const { return points.rows() / 2; }
  PhaseVector point(std::size_t i) const;
  double total_weight() const;

  /// Checks weights >= 0, some weight > 0, finite points, pairwise distinct.
  void validate() const;
};

EmpiricalMeasure make_empirical(Mat points, Vec weights, std::optional<EmpiricalMeta> meta = std::nullopt);

struct DiscretizeOptions {
  std::size_t max_points = 10'000'000;
  double lattice_origin = 0.0;
};

/// Grid discretization of the material measure: atoms on the T-lattice inside
/// the box of half-width R around T(center), plus the cell holding the center;
/// m_p = mu_D(A_p).
EmpiricalMeasure discretize(const SlidingGaussianDensity& d, const Vec& eps, double radius,
                            const PhaseVector& center, const DiscretizeOptions& opts = {});

/// i.i.d. draws from e^-Phi restricted to the T-box of half-width R around the
/// minimizer of Phi on E, each weighted mu_D(box) / n.
EmpiricalMeasure sample_empirical(const SlidingGaussianDensity& d, const AffineSubspace& e, double radius,
                                  std::size_t n, std::uint64_t seed);

/// mu_D of the T-box [c - R, c + R]^{2N}.
double box_mass(const SlidingGaussianDensity& d, const Vec& center_t, double radius);

Vec to_t_coordinates(const Vec& stacked, const Vec& coeffs);
Vec from_t_coordinates(const Vec& t, const Vec& coeffs);

struct PartitionReport {
  bool eps_ok = false;
  bool cstar_ok = false;
  bool weight_ok = false;
  double eps_h = 0.0;
  double c_star = 0.0;
  double delta_h = 0.0;
  double max_second_moment_ratio = 0.0;  // max_p int |y-p|^2 dmu_D / (eps_h^2 mu_D(A_p))
  double max_cell_radius = 0.0;          // sup over sampled cells of |y - p|
  double max_cstar_ratio = 0.0;          // max witness |p-z|^2 / (eps_h^2 + |y-z|^2)
  std::vector<std::size_t> offending_cells;

  bool ok() const { return eps_ok && cstar_ok && weight_ok; }
};

PartitionReport verify_partition_assumptions(const EmpiricalMeasure& m, const SlidingGaussianDensity& d,
                                             const AffineSubspace& e, std::size_t witnesses = 2000,
                                             std::uint64_t seed = 1);

/// Constants of beta0 |y-z|^2 + Phi(y) >= c (|y|^2 + |z|^2) - b on Z x E.
struct TransversalityCertificate {
  bool ok = false;
  double beta0 = 0.0;
  double c = 0.0;
  double b = 0.0;
  double lambda_min = 0.0;  // of the c = 0 Hessian in whitened coordinates
  std::string message;
};

TransversalityCertificate check_transversality(const QuadraticPotential& phi, const AffineSubspace& e,
                                               double beta0);

struct CertificateCheck {
  std::size_t samples = 0;
  std::size_t violations = 0;
  double min_slack = std::numeric_limits<double>::infinity();
};

/// Evaluates the certified inequality on random (y, z) in Z x E at several
/// scales.
CertificateCheck verify_certificate(const TransversalityCertificate& cert, const QuadraticPotential& phi,
                                    const AffineSubspace& e, std::size_t samples, std::uint64_t seed);

/// Truncation radius R with e^{-(c/4) R^2} <= `relative_tail`, from the
/// sub-Gaussian tail of the certificate. A heuristic default for grids.
double default_truncation_radius(const TransversalityCertificate& cert, double relative_tail = 1e-6);

/// Minimizer of a quadratic potential over E (requires Phi positive definite
/// on E0); falls back to the offset when the restriction is singular.
Vec minimizer_on(const QuadraticPotential& phi, const AffineSubspace& e);

}  // namespace ddinfer
