#pragma once

#include "ddinfer/gaussian_oracle.hpp"
#include "ddinfer/measures.hpp"
#include "ddinfer/qoi.hpp"

namespace ddinfer {

/// B_beta^{-1} exp(-beta |y - z|^2).
double thermal_weight(const Vec& y, const Vec& z, double beta, const EnergyMetric& metric);
double thermal_weight(const PhaseVector& y, const PhaseVector& z, double beta, const EnergyMetric& metric);

/// mu_{h,beta} = sum_p m_p B_beta^{-1} e^{-beta |p - z|^2} delta_p(y) H^k(z) on
/// Z x E. Integrating z out leaves the per-point mass
/// m_p B_beta^{-1} C_beta e^{-beta dist(p, E)^2}, kept in log form.
struct ThermalizedDiscrete {
  double beta = 0.0;
  AffineSubspace subspace;
  Mat points;                      // kept source points, 2N x n
  Vec log_mass;                    // per kept point
  Vec dist2;                       // dist(p, E)^2
  std::vector<std::size_t> source_index;  // column in the source measure
  double log_total = -std::numeric_limits<double>::infinity();
  std::size_t dropped = 0;
  double dropped_mass_bound = 0.0;  // upper bound on the dropped mass

  std::size_t size() const { return static_cast<std::size_t>(points.cols()); }
  double total_mass() const { return std::exp(log_total); }
  /// Masses normalized to sum to 1.
  Vec probabilities() const;
  /// Absolute masses; may underflow to zero at extreme beta.
  Vec masses() const;
};

ThermalizedDiscrete discrete_thermal_mass(const EmpiricalMeasure& m, const AffineSubspace& e, double beta,
                                          int threads = 1);

struct ExpectationOptions {
  std::size_t n_samples = 20000;
  std::uint64_t seed = 1;
  int threads = 1;
  /// Stratified bootstrap replicates for the stderr; 0 keeps the delta method.
  std::size_t bootstrap = 0;
};

struct ExpectationResult {
  double value = 0.0;
  double stderr_ = 0.0;
  bool closed_form = false;
  std::size_t samples = 0;
  bool bounded = true;  // false: f is not in C_b, value relies on Gaussian tails
};

/// Ratio estimator of E_{h,beta}[f]. For affine and quadratic f the z-integral
/// is exact; otherwise z ~ N(P_E p, (2 beta)^{-1} I) in the E-chart is sampled
/// with per-point counts proportional to mass (at least one).
ExpectationResult expectation_h(const QuantityOfInterest& f, const ThermalizedDiscrete& t,
                                const ExpectationOptions& opts = {});
ExpectationResult expectation_h(const QuantityOfInterest& f, const EmpiricalMeasure& m, const AffineSubspace& e,
                                double beta, const ExpectationOptions& opts = {});

/// Signed (here nonnegative) weighted cloud on Z x Z.
struct WeightedPairCloud {
  Mat y;
  Mat z;
  Vec weights;
  std::size_t size() const { return static_cast<std::size_t>(y.cols()); }
  double total() const { return weights.sum(); }
};

WeightedPairCloud to_weighted(const PairCloud& c);

/// k z-samples per kept point, each carrying mass(p) / k.
WeightedPairCloud to_signed_cloud(const ThermalizedDiscrete& t, std::size_t per_point_z_samples,
                                  std::uint64_t seed);

/// n particles: atoms chosen by systematic sampling proportional to mass, one
/// z draw each, weight |mu_{h,beta}|_TV / n.
WeightedPairCloud sample_signed_cloud(const ThermalizedDiscrete& t, std::size_t n, std::uint64_t seed);

/// Particles of mu_{h,beta} obtained from samples of mu_beta by moving each
/// (y, z) to (p, P_E p + z - P_E y) with p the atom of the cell holding y,
/// reweighted by m_p / mu_D(A_p) e^{-beta (dist(p)^2 - dist(y)^2)}. The
/// estimator is unbiased for grid measures, and reusing the mu_beta samples
/// couples the two clouds. Samples outside the partition are dropped.
WeightedPairCloud coupled_discrete_cloud(const EmpiricalMeasure& m, const AffineSubspace& e, double beta,
                                         const PairCloud& thermal_samples);

}  // namespace ddinfer
