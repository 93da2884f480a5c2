#pragma once

#include "ddinfer/measures.hpp"
#include "ddinfer/qoi.hpp"

namespace ddinfer {

/// Unnormalized density exp(-1/2 x^T A x + b^T x + c) on R^d.
struct GaussianForm {
  Mat precision;
  Vec linear;
  double constant = 0.0;

  Eigen::Index dim() const { return linear.size(); }
  /// log of the total mass; throws NotFinite unless A is positive definite.
  double log_mass() const;
  Vec mean() const;
  Mat covariance() const;
};

/// Lower Cholesky factor of a covariance, with a 1e-12 relative jitter as the
/// only concession; anything worse is an error.
Mat covariance_cholesky(const Mat& cov);

/// B_beta = (pi / beta)^N, normalizer of exp(-beta |y - z|^2) over Z.
double b_beta(Eigen::Index edges, double beta);
double log_b_beta(Eigen::Index edges, double beta);
/// C_beta = (pi / beta)^{k / 2}, the same integral over the k-dimensional E0.
double c_beta(Eigen::Index k, double beta);
double log_c_beta(Eigen::Index k, double beta);

/// Exact moments of the thermalized measure mu_beta on Z x E.
///
/// The Gaussian lives in the chart x = (s, a, b) with y = e0 + Q s + P a and
/// z = e0 + Q s - Q b (Q, P energy-orthonormal bases of E0 and its
/// complement); the chart has unit Jacobian. Mean and covariance are of the
/// normalized measure, over the stacked pair [y; z].
struct ThermalMoments {
  double beta = 0.0;
  double tv_mass = 0.0;
  double log_tv_mass = 0.0;
  Vec mean;
  Mat covariance;
  GaussianForm form;  // in the chart
  Mat chart;          // [y; z] = chart * x + chart_offset
  Vec chart_offset;
  Eigen::Index k = 0;
};

ThermalMoments thermalized_moments(const QuadraticPotential& phi, const AffineSubspace& e, double beta);
ThermalMoments thermalized_moments(const SlidingGaussianDensity& d, const AffineSubspace& e, double beta);

/// Exact moments of mu_infty = e^{-Phi} H^k on E pushed to the diagonal.
struct LimitMoments {
  double tv_mass = 0.0;
  double log_tv_mass = 0.0;
  Vec chart_mean;  // E-chart coordinates
  Mat chart_covariance;
  Vec mean;  // stacked [y; z] with y = z
  Mat covariance;
  GaussianForm form;
};

LimitMoments limit_moments(const QuadraticPotential& phi, const AffineSubspace& e);
LimitMoments limit_moments(const SlidingGaussianDensity& d, const AffineSubspace& e);

struct Estimate {
  double value = 0.0;
  double stderr_ = 0.0;
  bool closed_form = false;
};

/// E_infty[f]: closed form for affine and quadratic f, exact Gaussian Monte
/// Carlo otherwise.
Estimate expectation_infty(const QuantityOfInterest& f, const QuadraticPotential& phi, const AffineSubspace& e,
                           std::size_t n_samples = 100000, std::uint64_t seed = 1, int threads = 1);
Estimate expectation_infty(const QuantityOfInterest& f, const SlidingGaussianDensity& d, const AffineSubspace& e,
                           std::size_t n_samples = 100000, std::uint64_t seed = 1, int threads = 1);

/// Equal-weight point cloud on Z x Z; column i of y and z is one sample.
struct PairCloud {
  Mat y;
  Mat z;
  double weight = 0.0;  // per sample
  std::size_t size() const { return static_cast<std::size_t>(y.cols()); }
  double total() const { return weight * static_cast<double>(size()); }
};

/// Exact samples of mu_beta with weight tv_mass / n each.
///
/// Sample i uses the normal stream (seed, i) in chart order (s, a, b) and a
/// lower-triangular factor, so its E-chart component is driven by the first
/// k normals only. `sample_limit` uses the same first k normals, which couples
/// the two clouds sample by sample.
PairCloud sample_thermalized(const ThermalMoments& m, std::size_t n, std::uint64_t seed, int threads = 1);
PairCloud sample_thermalized(const SlidingGaussianDensity& d, const AffineSubspace& e, double beta, std::size_t n,
                             std::uint64_t seed, int threads = 1);
PairCloud sample_limit(const LimitMoments& m, const AffineSubspace& e, std::size_t n, std::uint64_t seed,
                       int threads = 1);
PairCloud sample_limit(const SlidingGaussianDensity& d, const AffineSubspace& e, std::size_t n, std::uint64_t seed,
                       int threads = 1);

/// Upper bound on |mu_beta|_TV valid for every beta >= 2 beta0, from the
/// transversality certificate: 2^N e^b e^{-c |e0|^2} (pi / c)^{k/2}.
double uniform_tv_bound(const TransversalityCertificate& cert, const AffineSubspace& e);

}  // namespace ddinfer
