#include "ddinfer/measures.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace ddinfer {

namespace {

constexpr double kSqrtPi = 1.7724538509055160273;

/// int_a^b exp(-t^2 / s^2) dt, evaluated on the side of the tail that keeps
/// precision.
double gauss_interval(double a, double b, double s) {
  if (!(b > a)) return 0.0;
  const double x = a / s;
  const double y = b / s;
  double diff;
  if (x >= 0.0) {
    diff = std::erfc(x) - std::erfc(y);
  } else if (y <= 0.0) {
    diff = std::erfc(-y) - std::erfc(-x);
  } else {
    diff = std::erf(y) - std::erf(x);
  }
  return 0.5 * s * kSqrtPi * diff;
}

double gauss_tail_weight(double t, double s) {
  if (!std::isfinite(t)) return 0.0;
  return std::exp(-(t * t) / (s * s));
}

/// Samples t with density proportional to exp(-t^2/s^2) on [a, b].
double sample_truncated(double a, double b, double s, double u) {
  const double x = a / s;
  const double y = b / s;
  if (x >= 0.0) {
    const double lo = std::erfc(y);
    const double hi = std::erfc(x);
    return s * boost::math::erfc_inv(lo + u * (hi - lo));
  }
  if (y <= 0.0) {
    const double lo = std::erfc(-x);
    const double hi = std::erfc(-y);
    return -s * boost::math::erfc_inv(lo + u * (hi - lo));
  }
  const double lo = std::erf(x);
  const double hi = std::erf(y);
  double v = lo + u * (hi - lo);
  v = std::clamp(v, std::nextafter(-1.0, 0.0), std::nextafter(1.0, 0.0));
  return s * boost::math::erf_inv(v);
}

long containing_index(double t, const EdgeGrid& g) {
  // cell k covers (node(k) - eps/2, node(k) + eps/2]
  return static_cast<long>(std::ceil((t - g.origin) / g.eps - 0.5));
}

}  // namespace

QuadraticPotential::QuadraticPotential(Mat hessian_, Vec linear_, double constant_)
    : hessian(std::move(hessian_)), linear(std::move(linear_)), constant(constant_) {
  require(hessian.rows() == hessian.cols() && hessian.rows() == linear.size(), ErrorKind::DimensionMismatch,
          "quadratic potential: Hessian and linear term sizes differ");
  require((hessian - hessian.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + hessian.cwiseAbs().maxCoeff()),
          ErrorKind::InvalidArgument, "quadratic potential: Hessian must be symmetric");
  Eigen::SelfAdjointEigenSolver<Mat> eig(hessian, Eigen::EigenvaluesOnly);
  const double lmax = eig.eigenvalues().maxCoeff();
  const double lmin = eig.eigenvalues().minCoeff();
  require(lmin >= -1e-10 * std::max(lmax, 0.0) - 1e-300, ErrorKind::InvalidArgument,
          "quadratic potential: Hessian must be positive semidefinite");
}

double QuadraticPotential::operator()(const Vec& x) const {
  return 0.5 * x.dot(hessian * x) + linear.dot(x) + constant;
}

Vec QuadraticPotential::gradient(const Vec& x) const { return hessian * x + linear; }

SlidingGaussianDensity::SlidingGaussianDensity(Vec coeffs_, Vec scales_)
    : coeffs(std::move(coeffs_)), scales(std::move(scales_)) {
  check_same_edges(coeffs.size(), scales.size(), "sliding Gaussian coefficients/scales");
  require(coeffs.size() >= 1, ErrorKind::InvalidArgument, "sliding Gaussian needs an edge");
  for (Eigen::Index e = 0; e < coeffs.size(); ++e) {
    require(coeffs[e] > 0.0 && std::isfinite(coeffs[e]), ErrorKind::InvalidArgument, "C_e must be positive");
    require(scales[e] > 0.0 && std::isfinite(scales[e]), ErrorKind::InvalidArgument, "s_e must be positive");
  }
}

QuadraticPotential SlidingGaussianDensity::quadratic() const {
  const Eigen::Index n = edges();
  Mat h = Mat::Zero(2 * n, 2 * n);
  for (Eigen::Index e = 0; e < n; ++e) {
    const double c = coeffs[e];
    const double w = 1.0 / (scales[e] * scales[e] * c);
    h(e, e) = w * c * c;
    h(e, n + e) = -w * c;
    h(n + e, e) = -w * c;
    h(n + e, n + e) = w;
  }
  return QuadraticPotential(std::move(h), Vec::Zero(2 * n), 0.0);
}

double phi(const Vec& stacked, const SlidingGaussianDensity& d) {
  const Eigen::Index n = d.edges();
  check_same_edges(stacked.size(), 2 * n, "phi");
  double total = 0.0;
  for (Eigen::Index e = 0; e < n; ++e) {
    const double c = d.coeffs[e];
    const double r = stacked[n + e] - c * stacked[e];
    total += r * r / (2.0 * d.scales[e] * d.scales[e] * c);
  }
  return total;
}

double phi(const PhaseVector& y, const SlidingGaussianDensity& d) { return phi(y.stacked(), d); }

double cell_mass(const SlidingGaussianDensity& d, const TCell& cell, Eigen::Index edge) {
  require(edge >= 0 && edge < d.edges(), ErrorKind::DimensionMismatch, "cell_mass: edge out of range");
  require(cell.b1 >= cell.a1 && cell.b2 >= cell.a2, ErrorKind::InvalidArgument, "cell_mass: empty cell bounds");
  const double g = gauss_interval(cell.a2, cell.b2, d.scales[edge]);
  const double width = cell.b1 - cell.a1;
  if (g == 0.0 || width == 0.0) return 0.0;
  return width * g;
}

double cell_second_moment(const SlidingGaussianDensity& d, const TCell& cell, Eigen::Index edge, double p1,
                          double p2) {
  const double s = d.scales[edge];
  const double a = cell.a2;
  const double b = cell.b2;
  const double i0 = gauss_interval(a, b, s);
  const double ea = gauss_tail_weight(a, s);
  const double eb = gauss_tail_weight(b, s);
  const double i1 = 0.5 * s * s * (ea - eb);
  const double ta = std::isfinite(a) ? a * ea : 0.0;
  const double tb = std::isfinite(b) ? b * eb : 0.0;
  const double i2 = 0.5 * s * s * (i0 - (tb - ta));
  const double m2 = i2 - 2.0 * p2 * i1 + p2 * p2 * i0;
  const double width = cell.b1 - cell.a1;
  const double lo = cell.a1 - p1;
  const double hi = cell.b1 - p1;
  const double t1_moment = (hi * hi * hi - lo * lo * lo) / 3.0;
  return t1_moment * i0 + width * m2;
}

Vec to_t_coordinates(const Vec& stacked, const Vec& coeffs) {
  const Eigen::Index n = coeffs.size();
  check_same_edges(stacked.size(), 2 * n, "T-coordinates");
  Vec t(2 * n);
  for (Eigen::Index e = 0; e < n; ++e) {
    const auto [t1, t2] = t_transform(stacked[e], stacked[n + e], coeffs[e]);
    t[2 * e] = t1;
    t[2 * e + 1] = t2;
  }
  return t;
}

Vec from_t_coordinates(const Vec& t, const Vec& coeffs) {
  const Eigen::Index n = coeffs.size();
  check_same_edges(t.size(), 2 * n, "T-coordinates");
  Vec x(2 * n);
  for (Eigen::Index e = 0; e < n; ++e) {
    const auto [eps, sigma] = t_inverse(t[2 * e], t[2 * e + 1], coeffs[e]);
    x[e] = eps;
    x[n + e] = sigma;
  }
  return x;
}

GridPartition::GridPartition(std::vector<EdgeGrid> edges, double radius, Vec center_t, Vec coeffs)
    : edges_(std::move(edges)), radius_(radius), center_t_(std::move(center_t)), coeffs_(std::move(coeffs)) {
  check_same_edges(static_cast<Eigen::Index>(edges_.size()), coeffs_.size(), "grid partition");
  strides_.assign(edges_.size(), 1);
  size_ = 1;
  for (std::size_t e = edges_.size(); e-- > 0;) {
    strides_[e] = size_;
    size_ *= edges_[e].cells();
  }
}

std::vector<std::array<long, 2>> GridPartition::indices(std::size_t atom) const {
  std::vector<std::array<long, 2>> idx(edges_.size());
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    const std::size_t local = (atom / strides_[e]) % edges_[e].cells();
    const auto n2 = static_cast<std::size_t>(edges_[e].count(1));
    idx[e] = {edges_[e].lo[0] + static_cast<long>(local / n2), edges_[e].lo[1] + static_cast<long>(local % n2)};
  }
  return idx;
}

std::size_t GridPartition::atom(const std::vector<std::array<long, 2>>& idx) const {
  std::size_t a = 0;
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    const EdgeGrid& g = edges_[e];
    const auto i1 = static_cast<std::size_t>(idx[e][0] - g.lo[0]);
    const auto i2 = static_cast<std::size_t>(idx[e][1] - g.lo[1]);
    a += (i1 * static_cast<std::size_t>(g.count(1)) + i2) * strides_[e];
  }
  return a;
}

std::optional<std::size_t> GridPartition::locate(const Vec& stacked) const {
  const Vec t = to_t_coordinates(stacked, coeffs_);
  std::size_t a = 0;
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    const EdgeGrid& g = edges_[e];
    const long k1 = containing_index(t[static_cast<Eigen::Index>(2 * e)], g);
    const long k2 = containing_index(t[static_cast<Eigen::Index>(2 * e + 1)], g);
    if (k1 < g.lo[0] || k1 > g.hi[0] || k2 < g.lo[1] || k2 > g.hi[1]) return std::nullopt;
    a += (static_cast<std::size_t>(k1 - g.lo[0]) * static_cast<std::size_t>(g.count(1)) +
          static_cast<std::size_t>(k2 - g.lo[1])) *
         strides_[e];
  }
  return a;
}

Vec GridPartition::representative(std::size_t atom) const {
  const auto idx = indices(atom);
  Vec t(2 * static_cast<Eigen::Index>(edges_.size()));
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    t[static_cast<Eigen::Index>(2 * e)] = edges_[e].node(0, idx[e][0]);
    t[static_cast<Eigen::Index>(2 * e + 1)] = edges_[e].node(1, idx[e][1]);
  }
  return from_t_coordinates(t, coeffs_);
}

TCell GridPartition::cell(std::size_t atom, std::size_t edge) const {
  const auto idx = indices(atom);
  const EdgeGrid& g = edges_[edge];
  const double h = 0.5 * g.eps;
  const double c1 = g.node(0, idx[edge][0]);
  const double c2 = g.node(1, idx[edge][1]);
  return TCell{c1 - h, c1 + h, c2 - h, c2 + h};
}

PhaseVector EmpiricalMeasure::point(std::size_t i) const {
  return PhaseVector::from_stacked(points.col(static_cast<Eigen::Index>(i)));
}

double EmpiricalMeasure::total_weight() const {
  return pairwise_sum(std::span<const double>(weights.data(), static_cast<std::size_t>(weights.size())));
}

void EmpiricalMeasure::validate() const {
  require(points.rows() >= 2 && points.rows() % 2 == 0, ErrorKind::DimensionMismatch,
          "empirical measure: points must be stacked phase vectors");
  check_same_edges(weights.size(), points.cols(), "empirical measure weights vs points");
  require(points.cols() >= 1, ErrorKind::InvalidArgument, "empirical measure is empty");
  require(points.allFinite() && weights.allFinite(), ErrorKind::InvalidArgument,
          "empirical measure entries must be finite");
  require(weights.minCoeff() >= 0.0, ErrorKind::InvalidArgument, "empirical weights must be nonnegative");
  require(weights.maxCoeff() > 0.0, ErrorKind::InvalidArgument, "empirical measure needs a positive weight");
  std::vector<Eigen::Index> order(static_cast<std::size_t>(points.cols()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index r = 0; r < points.rows(); ++r) {
      if (points(r, a) != points(r, b)) return points(r, a) < points(r, b);
    }
    return false;
  });
  for (std::size_t i = 1; i < order.size(); ++i) {
    // Lexicographic neighbours that agree in every coordinate within 1e-12.
    const double gap = (points.col(order[i]) - points.col(order[i - 1])).cwiseAbs().maxCoeff();
    require(gap > 1e-12, ErrorKind::InvalidArgument, "empirical measure points must be pairwise distinct");
  }
}

EmpiricalMeasure make_empirical(Mat points, Vec weights, std::optional<EmpiricalMeta> meta) {
  EmpiricalMeasure m;
  m.points = std::move(points);
  m.weights = std::move(weights);
  m.meta = meta;
  m.validate();
  return m;
}

EmpiricalMeasure discretize(const SlidingGaussianDensity& d, const Vec& eps, double radius,
                            const PhaseVector& center, const DiscretizeOptions& opts) {
  const Eigen::Index n = d.edges();
  check_same_edges(eps.size(), n, "discretize eps");
  check_same_edges(center.edges(), n, "discretize center");
  require(radius >= 0.0 && std::isfinite(radius), ErrorKind::InvalidArgument, "discretize: radius must be >= 0");
  for (Eigen::Index e = 0; e < n; ++e) {
    require(eps[e] > 0.0 && std::isfinite(eps[e]), ErrorKind::InvalidArgument, "discretize: eps must be positive");
  }
  const Vec center_t = to_t_coordinates(center.stacked(), d.coeffs);
  std::vector<EdgeGrid> grids(static_cast<std::size_t>(n));
  double total = 1.0;
  for (Eigen::Index e = 0; e < n; ++e) {
    EdgeGrid& g = grids[static_cast<std::size_t>(e)];
    g.eps = eps[e];
    g.origin = opts.lattice_origin;
    for (int axis = 0; axis < 2; ++axis) {
      const double tc = center_t[2 * e + axis];
      const long kc = containing_index(tc, g);
      const long lo = static_cast<long>(std::ceil((tc - radius - g.origin) / g.eps));
      const long hi = static_cast<long>(std::floor((tc + radius - g.origin) / g.eps));
      g.lo[axis] = std::min(lo, kc);
      g.hi[axis] = std::max(hi, kc);
    }
    total *= static_cast<double>(g.cells());
  }
  if (total > static_cast<double>(opts.max_points)) {
    throw Error(ErrorKind::GridTooLarge,
                "grid would have " + format_double(total) + " points (cap " + std::to_string(opts.max_points) +
                    "); use the sampling pathway (sample_empirical) instead");
  }
  GridPartition part(std::move(grids), radius, center_t, d.coeffs);
  const std::size_t size = part.size();

  // Per-edge cell mass tables.
  std::vector<std::vector<double>> tables(static_cast<std::size_t>(n));
  for (Eigen::Index e = 0; e < n; ++e) {
    const EdgeGrid& g = part.edges()[static_cast<std::size_t>(e)];
    auto& tab = tables[static_cast<std::size_t>(e)];
    tab.resize(g.cells());
    const double h = 0.5 * g.eps;
    for (long k1 = g.lo[0]; k1 <= g.hi[0]; ++k1) {
      for (long k2 = g.lo[1]; k2 <= g.hi[1]; ++k2) {
        const double c1 = g.node(0, k1);
        const double c2 = g.node(1, k2);
        tab[static_cast<std::size_t>((k1 - g.lo[0]) * g.count(1) + (k2 - g.lo[1]))] =
            cell_mass(d, TCell{c1 - h, c1 + h, c2 - h, c2 + h}, e);
      }
    }
  }

  EmpiricalMeasure m;
  m.points.resize(2 * n, static_cast<Eigen::Index>(size));
  m.weights.resize(static_cast<Eigen::Index>(size));
  Vec t(2 * n);
  for (std::size_t a = 0; a < size; ++a) {
    const auto idx = part.indices(a);
    double w = 1.0;
    for (Eigen::Index e = 0; e < n; ++e) {
      const EdgeGrid& g = part.edges()[static_cast<std::size_t>(e)];
      const auto& ke = idx[static_cast<std::size_t>(e)];
      t[2 * e] = g.node(0, ke[0]);
      t[2 * e + 1] = g.node(1, ke[1]);
      w *= tables[static_cast<std::size_t>(e)][static_cast<std::size_t>((ke[0] - g.lo[0]) * g.count(1) + (ke[1] - g.lo[1]))];
    }
    m.points.col(static_cast<Eigen::Index>(a)) = from_t_coordinates(t, d.coeffs);
    m.weights[static_cast<Eigen::Index>(a)] = w;
  }
  m.reference_mass = m.weights;
  EmpiricalMeta meta;
  meta.eps_h = eps.norm();
  meta.delta_h = 0.0;
  meta.c_star = std::numbers::sqrt2;
  meta.truncation_radius = radius;
  m.meta = meta;
  m.partition = std::move(part);
  require(m.weights.maxCoeff() > 0.0, ErrorKind::InvalidArgument, "discretize: all cell masses underflowed");
  return m;
}

double box_mass(const SlidingGaussianDensity& d, const Vec& center_t, double radius) {
  double mass = 1.0;
  for (Eigen::Index e = 0; e < d.edges(); ++e) {
    const double c2 = center_t[2 * e + 1];
    mass *= 2.0 * radius * gauss_interval(c2 - radius, c2 + radius, d.scales[e]);
  }
  return mass;
}

double default_truncation_radius(const TransversalityCertificate& cert, double relative_tail) {
  require(cert.ok && cert.c > 0.0, ErrorKind::InvalidArgument, "default radius needs a valid certificate");
  require(relative_tail > 0.0 && relative_tail < 1.0, ErrorKind::InvalidArgument, "relative_tail must be in (0, 1)");
  return 2.0 * std::sqrt(-std::log(relative_tail) / cert.c);
}

Vec minimizer_on(const QuadraticPotential& phi, const AffineSubspace& e) {
  const Mat& q = e.basis();
  if (q.cols() == 0) return e.offset();
  const Mat a = q.transpose() * phi.hessian * q;
  const Vec lin = q.transpose() * phi.gradient(e.offset());
  Eigen::LLT<Mat> llt(a);
  if (llt.info() != Eigen::Success) return e.offset();
  return e.embed(-llt.solve(lin));
}

EmpiricalMeasure sample_empirical(const SlidingGaussianDensity& d, const AffineSubspace& e, double radius,
                                  std::size_t n, std::uint64_t seed) {
  require(n >= 1, ErrorKind::InvalidArgument, "sample_empirical: n must be >= 1");
  require(radius > 0.0 && std::isfinite(radius), ErrorKind::InvalidArgument, "sample_empirical: radius must be > 0");
  const Eigen::Index edges = d.edges();
  check_same_edges(e.ambient_dim(), 2 * edges, "sample_empirical subspace");
  const Vec center = minimizer_on(d.quadratic(), e);
  const Vec ct = to_t_coordinates(center, d.coeffs);
  const double mass = box_mass(d, ct, radius);
  EmpiricalMeasure m;
  m.points.resize(2 * edges, static_cast<Eigen::Index>(n));
  m.weights = Vec::Constant(static_cast<Eigen::Index>(n), mass / static_cast<double>(n));
  Vec t(2 * edges);
  for (std::size_t i = 0; i < n; ++i) {
    CounterRng rng(seed, i);
    for (Eigen::Index k = 0; k < edges; ++k) {
      t[2 * k] = ct[2 * k] - radius + 2.0 * radius * rng.uniform();
      t[2 * k + 1] = sample_truncated(ct[2 * k + 1] - radius, ct[2 * k + 1] + radius, d.scales[k], rng.uniform());
    }
    m.points.col(static_cast<Eigen::Index>(i)) = from_t_coordinates(t, d.coeffs);
  }
  EmpiricalMeta meta;
  meta.truncation_radius = radius;
  meta.c_star = std::numbers::sqrt2;
  m.meta = meta;
  return m;
}

PartitionReport verify_partition_assumptions(const EmpiricalMeasure& m, const SlidingGaussianDensity& d,
                                             const AffineSubspace& e, std::size_t witnesses, std::uint64_t seed) {
  require(m.partition.has_value() && m.meta.has_value(), ErrorKind::InvalidArgument,
          "verify_partition_assumptions needs partition metadata");
  const GridPartition& part = *m.partition;
  const EmpiricalMeta& meta = *m.meta;
  const Eigen::Index n = d.edges();
  check_same_edges(m.edges(), n, "verify_partition_assumptions");
  PartitionReport rep;
  rep.eps_h = meta.eps_h;
  rep.c_star = meta.c_star;
  const double eps2 = meta.eps_h * meta.eps_h;

  // Per-edge tables: conditional second moment about the representative and
  // cell mass.
  std::vector<std::vector<double>> moment_ratio(static_cast<std::size_t>(n));
  std::vector<std::vector<double>> mass(static_cast<std::size_t>(n));
  for (Eigen::Index k = 0; k < n; ++k) {
    const EdgeGrid& g = part.edges()[static_cast<std::size_t>(k)];
    auto& mr = moment_ratio[static_cast<std::size_t>(k)];
    auto& ms = mass[static_cast<std::size_t>(k)];
    mr.resize(g.cells());
    ms.resize(g.cells());
    const double h = 0.5 * g.eps;
    for (long k1 = g.lo[0]; k1 <= g.hi[0]; ++k1) {
      for (long k2 = g.lo[1]; k2 <= g.hi[1]; ++k2) {
        const std::size_t slot = static_cast<std::size_t>((k1 - g.lo[0]) * g.count(1) + (k2 - g.lo[1]));
        const double p1 = g.node(0, k1);
        const double p2 = g.node(1, k2);
        const TCell cell{p1 - h, p1 + h, p2 - h, p2 + h};
        const double m0 = cell_mass(d, cell, k);
        ms[slot] = m0;
        if (m0 > 1e-250) {
          mr[slot] = cell_second_moment(d, cell, k, p1, p2) / m0;
        } else {
          // underflowed tail cell: the pointwise bound (corner distance) is exact as an upper bound
          mr[slot] = 2.0 * h * h;
        }
      }
    }
  }

  const std::size_t size = part.size();
  require(m.size() == size, ErrorKind::InvalidArgument, "partition size does not match the measure");
  double worst_delta = 0.0;
  std::vector<std::size_t> weight_offenders;
  for (std::size_t a = 0; a < size; ++a) {
    const auto idx = part.indices(a);
    double ratio = 0.0;
    double ref = 1.0;
    for (Eigen::Index k = 0; k < n; ++k) {
      const EdgeGrid& g = part.edges()[static_cast<std::size_t>(k)];
      const auto& ke = idx[static_cast<std::size_t>(k)];
      const std::size_t slot = static_cast<std::size_t>((ke[0] - g.lo[0]) * g.count(1) + (ke[1] - g.lo[1]));
      ratio += moment_ratio[static_cast<std::size_t>(k)][slot];
      ref *= mass[static_cast<std::size_t>(k)][slot];
    }
    ratio /= eps2;
    rep.max_second_moment_ratio = std::max(rep.max_second_moment_ratio, ratio);
    if (ratio > 1.0 + 1e-12) rep.offending_cells.push_back(a);
    const double w = m.weights[static_cast<Eigen::Index>(a)];
    double dev = 0.0;
    if (ref > 0.0) {
      dev = std::abs(w - ref) / ref;
    } else if (w > 0.0) {
      dev = std::numeric_limits<double>::infinity();
    }
    if (dev > worst_delta) worst_delta = dev;
    if (dev > meta.delta_h + 1e-12) weight_offenders.push_back(a);
  }
  rep.eps_ok = rep.max_second_moment_ratio <= 1.0 + 1e-12;
  rep.delta_h = worst_delta;
  rep.weight_ok = weight_offenders.empty();

  // Witness sampling for the c_* inequality (checked for all z in Z, which
  // is stronger than z in E) and for the cell radius.
  const Vec coeffs = d.coeffs;
  bool cstar_ok = rep.c_star >= 1.0;
  for (std::size_t w = 0; w < witnesses; ++w) {
    CounterRng rng(seed, w);
    const std::size_t a = std::min(size - 1, static_cast<std::size_t>(rng.uniform() * static_cast<double>(size)));
    const Vec p = part.representative(a);
    Vec ty = to_t_coordinates(p, coeffs);
    for (Eigen::Index k = 0; k < n; ++k) {
      const double h = 0.5 * part.edges()[static_cast<std::size_t>(k)].eps;
      ty[2 * k] += (2.0 * rng.uniform() - 1.0) * h;
      ty[2 * k + 1] += (2.0 * rng.uniform() - 1.0) * h;
    }
    const Vec y = from_t_coordinates(ty, coeffs);
    // z: either on E near the projection of p, or anywhere in Z
    Vec z;
    const double scale = std::pow(10.0, 2.0 * rng.uniform() - 1.0);
    if (w % 2 == 0 && e.dim() > 0) {
      Vec c = e.coords(e.project(p));
      for (Eigen::Index i = 0; i < c.size(); ++i) c[i] += scale * rng.normal();
      z = e.embed(c);
    } else {
      z = y;
      Vec tz = to_t_coordinates(z, coeffs);
      for (Eigen::Index i = 0; i < tz.size(); ++i) tz[i] += scale * rng.normal();
      z = from_t_coordinates(tz, coeffs);
    }
    const EnergyMetric& metric = e.metric();
    const double pz = metric.norm(p - z);
    const double yz = metric.norm(y - z);
    const double ratio = pz * pz / (eps2 + yz * yz);
    rep.max_cstar_ratio = std::max(rep.max_cstar_ratio, ratio);
    if (ratio > rep.c_star * rep.c_star * (1.0 + 1e-12)) {
      cstar_ok = false;
      rep.offending_cells.push_back(a);
    }
    // exact sup of |y - p| over the cell: corner distance
    double sup2 = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
      const double h = 0.5 * part.edges()[static_cast<std::size_t>(k)].eps;
      sup2 += 2.0 * h * h;
    }
    rep.max_cell_radius = std::max(rep.max_cell_radius, std::sqrt(sup2));
  }
  if (rep.max_cell_radius > meta.eps_h * (1.0 + 1e-12)) rep.eps_ok = false;
  rep.cstar_ok = cstar_ok;
  rep.offending_cells.insert(rep.offending_cells.end(), weight_offenders.begin(), weight_offenders.end());
  std::sort(rep.offending_cells.begin(), rep.offending_cells.end());
  rep.offending_cells.erase(std::unique(rep.offending_cells.begin(), rep.offending_cells.end()),
                            rep.offending_cells.end());
  return rep;
}

namespace {

struct CertificateForm {
  Mat hessian0;  // c = 0, whitened (u, s) coordinates
  Vec gradient;
  double constant0 = 0.0;
  double e0_norm2 = 0.0;
};

CertificateForm certificate_form(const QuadraticPotential& phi, const AffineSubspace& e, double beta0) {
  const Eigen::Index dim = e.ambient_dim();
  const Eigen::Index k = e.dim();
  const Vec w = e.metric().whitening();
  const Vec winv = w.cwiseInverse();
  const Mat hw = winv.asDiagonal() * phi.hessian * winv.asDiagonal();
  const Mat qw = w.asDiagonal() * e.basis();
  const Vec e0w = w.cwiseProduct(e.offset());
  CertificateForm f;
  f.hessian0 = Mat::Zero(dim + k, dim + k);
  f.hessian0.topLeftCorner(dim, dim) = 2.0 * beta0 * Mat::Identity(dim, dim) + hw;
  if (k > 0) {
    f.hessian0.topRightCorner(dim, k) = -2.0 * beta0 * qw;
    f.hessian0.bottomLeftCorner(k, dim) = -2.0 * beta0 * qw.transpose();
    f.hessian0.bottomRightCorner(k, k) = 2.0 * beta0 * Mat::Identity(k, k);
  }
  f.gradient = Vec::Zero(dim + k);
  f.gradient.head(dim) = -2.0 * beta0 * e0w + winv.cwiseProduct(phi.linear);
  f.e0_norm2 = e0w.squaredNorm();
  f.constant0 = beta0 * f.e0_norm2 + phi.constant;
  return f;
}

}  // namespace

TransversalityCertificate check_transversality(const QuadraticPotential& phi, const AffineSubspace& e,
                                               double beta0) {
  require(beta0 > 0.0 && std::isfinite(beta0), ErrorKind::InvalidArgument, "check_transversality: beta0 must be > 0");
  check_same_edges(phi.ambient_dim(), e.ambient_dim(), "check_transversality");
  TransversalityCertificate cert;
  cert.beta0 = beta0;
  const CertificateForm form = certificate_form(phi, e, beta0);
  const Eigen::Index m = form.hessian0.rows();
  Eigen::SelfAdjointEigenSolver<Mat> eig(form.hessian0, Eigen::EigenvaluesOnly);
  cert.lambda_min = eig.eigenvalues().minCoeff();
  const double lambda_max = eig.eigenvalues().maxCoeff();
  if (!(cert.lambda_min > 1e-10 * lambda_max)) {
    cert.ok = false;
    cert.message = "no c > 0 at beta0 = " + format_double(beta0) + ": Hessian lambda_min = " +
                   format_double(cert.lambda_min) + " (try a larger beta0 only if Phi is positive on E0)";
    return cert;
  }
  auto positive = [&](double c) {
    const Mat h = form.hessian0 - 2.0 * c * Mat::Identity(m, m);
    Eigen::LLT<Mat> llt(h);
    if (llt.info() != Eigen::Success) return false;
    return llt.matrixL().toDenseMatrix().diagonal().minCoeff() > 1e-12 * std::sqrt(lambda_max);
  };
  double c_max = beta0;
  if (!positive(beta0)) {
    double lo = 0.0;
    double hi = beta0;
    for (int it = 0; it < 80; ++it) {
      const double mid = 0.5 * (lo + hi);
      (positive(mid) ? lo : hi) = mid;
    }
    c_max = lo;
  }
  // Back off from the boundary so that b stays moderate.
  cert.c = 0.5 * c_max;
  const Mat h = form.hessian0 - 2.0 * cert.c * Mat::Identity(m, m);
  const Vec sol = h.llt().solve(form.gradient);
  const double q_min = form.constant0 - cert.c * form.e0_norm2 - 0.5 * form.gradient.dot(sol);
  cert.b = std::max(0.0, -q_min) + 1e-9 * (1.0 + std::abs(q_min));
  cert.ok = std::isfinite(cert.b) && cert.c > 0.0;
  if (!cert.ok) cert.message = "certificate constant is not finite";
  return cert;
}

CertificateCheck verify_certificate(const TransversalityCertificate& cert, const QuadraticPotential& phi,
                                    const AffineSubspace& e, std::size_t samples, std::uint64_t seed) {
  CertificateCheck out;
  out.samples = samples;
  const EnergyMetric& metric = e.metric();
  const Vec w = metric.whitening();
  const Eigen::Index dim = e.ambient_dim();
  for (std::size_t i = 0; i < samples; ++i) {
    CounterRng rng(seed, i);
    const double scale = std::pow(10.0, static_cast<double>(i % 5) - 1.0);
    Vec c(e.dim());
    for (Eigen::Index j = 0; j < c.size(); ++j) c[j] = scale * rng.normal();
    const Vec z = e.embed(c);
    Vec y(dim);
    if (i % 4 == 3) {
      // near the diagonal, the direction where the inequality is tight
      for (Eigen::Index j = 0; j < dim; ++j) y[j] = z[j] + 0.01 * scale * rng.normal() / w[j];
    } else {
      for (Eigen::Index j = 0; j < dim; ++j) y[j] = scale * rng.normal() / w[j];
    }
    const double yz = metric.norm(y - z);
    const double lhs = cert.beta0 * yz * yz + phi(y);
    const double ny = metric.norm(y);
    const double nz = metric.norm(z);
    const double rhs = cert.c * (ny * ny + nz * nz) - cert.b;
    const double slack = lhs - rhs;
    out.min_slack = std::min(out.min_slack, slack);
    if (slack < -1e-9 * (1.0 + std::abs(lhs) + std::abs(rhs))) ++out.violations;
  }
  return out;
}

}  // namespace ddinfer
