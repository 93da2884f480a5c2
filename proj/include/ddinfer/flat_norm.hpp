#pragma once

#include "ddinfer/thermalize.hpp"

#include <functional>

namespace ddinfer {

/// Finitely supported signed measure on Z or Z x Z.
///
/// Columns of `support` are points of dimension 2N (on Z) or 4N (on Z x Z);
/// distances are energy norms of differences, applied blockwise.
struct DiscreteSignedMeasure {
  Mat support;
  Vec weights;
  EnergyMetric metric;

  static DiscreteSignedMeasure on_z(Mat points, Vec weights, const EnergyMetric& metric);
  static DiscreteSignedMeasure on_pairs(const WeightedPairCloud& cloud, const EnergyMetric& metric);
  static DiscreteSignedMeasure on_pairs(const PairCloud& cloud, const EnergyMetric& metric);

  std::size_t size() const { return static_cast<std::size_t>(support.cols()); }
  double tv_norm() const { return weights.cwiseAbs().sum(); }
  /// Per-coordinate scale mapping the distance to a Euclidean one.
  Vec whitening() const;
  double distance(std::size_t i, std::size_t j) const;

  /// Sums the weights of points that agree within `tol` in every coordinate
  /// and drops exact zero weights. Returns the merged index of each original
  /// column, or -1 where the merged weight vanished.
  std::vector<Eigen::Index> merge(double tol = 1e-12);
};

/// mu1 - mu2 on the merged support; the metrics must agree (including ell).
DiscreteSignedMeasure difference(const DiscreteSignedMeasure& mu1, const DiscreteSignedMeasure& mu2);

struct FlatNormOptions {
  int neighbors = 12;          // initial nearest-neighbour Lipschitz arcs per point
  std::size_t max_rounds = 100;  // constraint-generation rounds
  std::size_t max_pivots = 50'000'000;
};

struct FlatNormResult {
  double value = 0.0;
  Vec witness;  // optimal f at the input support points, in input order
  std::size_t pivots = 0;
  std::size_t rounds = 0;
  std::size_t arcs = 0;          // Lipschitz arcs in the final model
  double max_violation = 0.0;    // over all pairwise and box constraints
  double duality_gap = 0.0;
};

/// max sum_i a_i f_i over |f_i| <= 1, f_i - f_j <= d(x_i, x_j) / ell.
///
/// Solved through its dual, an uncapacitated min-cost flow on the support
/// plus a ground node, by a primal network simplex with strongly feasible
/// trees. Lipschitz arcs start from a nearest-neighbour set and violated pairs
/// are added until the witness is feasible for every pair.
FlatNormResult flat_norm(const DiscreteSignedMeasure& nu, const FlatNormOptions& opts = {});

double fn_distance(const DiscreteSignedMeasure& mu1, const DiscreteSignedMeasure& mu2,
                   const FlatNormOptions& opts = {});

/// A continuous measure seen through k-sample clouds, one per seed.
using CloudSource = std::function<WeightedPairCloud(std::size_t k, std::uint64_t seed)>;

CloudSource cloud_source(const ThermalizedDiscrete& t);
CloudSource cloud_source(const ThermalMoments& m);
CloudSource cloud_source(const LimitMoments& m, const AffineSubspace& e);

struct FnMeasuresOptions {
  std::size_t k = 2000;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::size_t cap = 4000;  // merged support cap before subsampling
  int threads = 1;
  FlatNormOptions lp;
};

struct FnMeasuresResult {
  double value = 0.0;      // mean over seeds
  double mc_error = 0.0;   // sample standard deviation over seeds
  std::vector<double> replicates;
  bool subsampled = false;
};

/// Systematic resampling to n equal-magnitude particles, proportional to |w|.
WeightedPairCloud subsample(const WeightedPairCloud& c, std::size_t n, std::uint64_t seed);

FnMeasuresResult fn_distance_measures(const CloudSource& a, const CloudSource& b, const EnergyMetric& metric,
                                      const FnMeasuresOptions& opts = {});

}  // namespace ddinfer
