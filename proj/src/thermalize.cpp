#include "ddinfer/thermalize.hpp"

#include <algorithm>
#include <cmath>

namespace ddinfer {

namespace {

constexpr double kLogDropThreshold = -690.7755278982137;  // log(1e-300)

double sample_variance(const double* xs, std::size_t n, double mean) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += (xs[i] - mean) * (xs[i] - mean);
  return acc / static_cast<double>(n - 1);
}

/// z-coordinates on E for a point: center P_E p plus isotropic chart noise of
/// variance 1 / (2 beta).
Vec draw_z(const AffineSubspace& e, const Vec& center_coords, double beta, CounterRng& rng) {
  Vec c = center_coords;
  const double scale = 1.0 / std::sqrt(2.0 * beta);
  for (Eigen::Index i = 0; i < c.size(); ++i) c[i] += scale * rng.normal();
  return e.embed(c);
}

}  // namespace

double thermal_weight(const Vec& y, const Vec& z, double beta, const EnergyMetric& metric) {
  const double d = metric.norm(y - z);
  return std::exp(-log_b_beta(metric.edges(), beta) - beta * d * d);
}

double thermal_weight(const PhaseVector& y, const PhaseVector& z, double beta, const EnergyMetric& metric) {
  return thermal_weight(y.stacked(), z.stacked(), beta, metric);
}

Vec ThermalizedDiscrete::probabilities() const { return (log_mass.array() - log_total).exp().matrix(); }

Vec ThermalizedDiscrete::masses() const { return log_mass.array().exp().matrix(); }

ThermalizedDiscrete discrete_thermal_mass(const EmpiricalMeasure& m, const AffineSubspace& e, double beta,
                                          int threads) {
  require(beta > 0.0 && std::isfinite(beta), ErrorKind::InvalidArgument, "beta must be positive and finite");
  check_same_edges(m.points.rows(), e.ambient_dim(), "discrete_thermal_mass");
  const std::size_t n = m.size();
  const Eigen::Index edges = e.ambient_dim() / 2;
  const double log_const = -log_b_beta(edges, beta) + log_c_beta(e.dim(), beta);
  std::vector<double> log_mass(n);
  std::vector<double> dist2(n);
  parallel_for(n, threads, [&](std::size_t i) {
    const auto c = static_cast<Eigen::Index>(i);
    const double d = e.dist(Vec(m.points.col(c)));
    dist2[i] = d * d;
    const double w = m.weights[c];
    log_mass[i] = w > 0.0 ? std::log(w) + log_const - beta * dist2[i] : -std::numeric_limits<double>::infinity();
  });
  const double hi = *std::max_element(log_mass.begin(), log_mass.end());
  require(std::isfinite(hi), ErrorKind::InvalidArgument, "discrete_thermal_mass: no point carries positive weight");

  ThermalizedDiscrete t;
  t.beta = beta;
  t.subspace = e;
  std::vector<std::size_t> keep;
  std::size_t dropped_positive = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (log_mass[i] - hi >= kLogDropThreshold) {
      keep.push_back(i);
    } else if (std::isfinite(log_mass[i])) {
      ++dropped_positive;
    }
  }
  t.points.resize(m.points.rows(), static_cast<Eigen::Index>(keep.size()));
  t.log_mass.resize(static_cast<Eigen::Index>(keep.size()));
  t.dist2.resize(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j) {
    const auto c = static_cast<Eigen::Index>(j);
    t.points.col(c) = m.points.col(static_cast<Eigen::Index>(keep[j]));
    t.log_mass[c] = log_mass[keep[j]];
    t.dist2[c] = dist2[keep[j]];
  }
  t.source_index = std::move(keep);
  t.log_total = log_sum_exp(std::span<const double>(t.log_mass.data(), t.size()));
  t.dropped = dropped_positive;
  t.dropped_mass_bound = static_cast<double>(dropped_positive) * std::exp(hi + kLogDropThreshold);
  return t;
}

ExpectationResult expectation_h(const QuantityOfInterest& f, const ThermalizedDiscrete& t,
                                const ExpectationOptions& opts) {
  require(t.size() >= 1, ErrorKind::InvalidArgument, "expectation_h: empty thermalized measure");
  const AffineSubspace& e = t.subspace;
  const Eigen::Index edges = e.ambient_dim() / 2;
  if (!(t.total_mass() > 0.0)) {
    double dmin = std::numeric_limits<double>::infinity();
    double dmax = 0.0;
    for (Eigen::Index i = 0; i < t.dist2.size(); ++i) {
      dmin = std::min(dmin, std::sqrt(t.dist2[i]));
      dmax = std::max(dmax, std::sqrt(t.dist2[i]));
    }
    throw Error(ErrorKind::NotFinite, "expectation_h: total thermal mass is zero at beta = " + format_double(t.beta) +
                                          " (point-to-E distances from " + format_double(dmin) + " to " +
                                          format_double(dmax) + ")");
  }
  const Vec prob = t.probabilities();
  const std::size_t n = t.size();
  // Dividing by the same pairwise sum makes constant f exactly 1.
  const double norm = pairwise_sum(std::span<const double>(prob.data(), n));
  ExpectationResult res;
  res.bounded = f.bounded();

  if (auto q = f.quadratic_form(edges)) {
    const Eigen::Index dim = 2 * edges;
    const Mat& basis = e.basis();
    const Mat mzz = q->m.bottomRightCorner(dim, dim);
    const double trace_term = (basis.transpose() * mzz * basis).trace() / (2.0 * t.beta);
    std::vector<double> terms(n);
    parallel_for(n, opts.threads, [&](std::size_t i) {
      const auto c = static_cast<Eigen::Index>(i);
      Vec x(2 * dim);
      x << t.points.col(c), e.project(Vec(t.points.col(c)));
      terms[i] = prob[c] * (x.dot(q->m * x) + q->w.dot(x) + q->c + trace_term);
    });
    res.value = pairwise_sum(terms) / norm;
    res.closed_form = true;
    return res;
  }

  // Stratified Monte Carlo over the atoms.
  std::vector<std::size_t> count(n);
  std::vector<std::size_t> offset(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const double want = static_cast<double>(opts.n_samples) * prob[static_cast<Eigen::Index>(i)];
    count[i] = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(want)));
    offset[i + 1] = offset[i] + count[i];
  }
  std::vector<double> values(offset[n]);
  std::vector<double> means(n);
  const EnergyMetric& metric = e.metric();
  parallel_for(n, opts.threads, [&](std::size_t i) {
    const auto c = static_cast<Eigen::Index>(i);
    const Vec p = t.points.col(c);
    const Vec center = e.tangent_coords(p - e.offset());
    CounterRng rng(opts.seed, t.source_index[i]);
    for (std::size_t j = 0; j < count[i]; ++j) {
      values[offset[i] + j] = f(p, draw_z(e, center, t.beta, rng), metric);
    }
    means[i] = pairwise_sum(std::span<const double>(values.data() + offset[i], count[i])) /
               static_cast<double>(count[i]);
  });
  std::vector<double> weighted(n);
  for (std::size_t i = 0; i < n; ++i) weighted[i] = prob[static_cast<Eigen::Index>(i)] * means[i];
  res.value = pairwise_sum(weighted) / norm;
  res.samples = offset[n];

  // Denominator is exact, so the ratio's delta method reduces to the
  // stratified variance. Single-sample strata use the pooled within-stratum
  // variance.
  double pooled_num = 0.0;
  double pooled_den = 0.0;
  std::vector<double> var(n, -1.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (count[i] >= 2) {
      var[i] = sample_variance(values.data() + offset[i], count[i], means[i]);
      pooled_num += var[i] * static_cast<double>(count[i] - 1);
      pooled_den += static_cast<double>(count[i] - 1);
    }
  }
  double pooled = 0.0;
  if (pooled_den > 0.0) {
    pooled = pooled_num / pooled_den;
  } else if (n >= 2) {
    pooled = sample_variance(means.data(), n, pairwise_sum(means) / static_cast<double>(n));
  }
  std::vector<double> contrib(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double v = var[i] >= 0.0 ? var[i] : pooled;
    const double p = prob[static_cast<Eigen::Index>(i)];
    contrib[i] = p * p * v / static_cast<double>(count[i]);
  }
  res.stderr_ = std::sqrt(pairwise_sum(contrib));

  if (opts.bootstrap > 0) {
    std::vector<double> reps(opts.bootstrap);
    for (std::size_t b = 0; b < opts.bootstrap; ++b) {
      CounterRng rng(opts.seed ^ 0x5bd1e995u, b);
      std::vector<double> terms(n);
      for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < count[i]; ++j) {
          const auto pick = std::min(count[i] - 1, static_cast<std::size_t>(rng.uniform() * static_cast<double>(count[i])));
          acc += values[offset[i] + pick];
        }
        terms[i] = prob[static_cast<Eigen::Index>(i)] * acc / static_cast<double>(count[i]);
      }
      reps[b] = pairwise_sum(terms);
    }
    const double mean = pairwise_sum(reps) / static_cast<double>(reps.size());
    res.stderr_ = reps.size() >= 2 ? std::sqrt(sample_variance(reps.data(), reps.size(), mean)) : 0.0;
  }
  return res;
}

ExpectationResult expectation_h(const QuantityOfInterest& f, const EmpiricalMeasure& m, const AffineSubspace& e,
                                double beta, const ExpectationOptions& opts) {
  return expectation_h(f, discrete_thermal_mass(m, e, beta, opts.threads), opts);
}

WeightedPairCloud to_weighted(const PairCloud& c) {
  WeightedPairCloud w;
  w.y = c.y;
  w.z = c.z;
  w.weights = Vec::Constant(static_cast<Eigen::Index>(c.size()), c.weight);
  return w;
}

WeightedPairCloud to_signed_cloud(const ThermalizedDiscrete& t, std::size_t per_point_z_samples,
                                  std::uint64_t seed) {
  require(per_point_z_samples >= 1, ErrorKind::InvalidArgument, "to_signed_cloud: k must be >= 1");
  const AffineSubspace& e = t.subspace;
  const std::size_t k = per_point_z_samples;
  const auto total = static_cast<Eigen::Index>(t.size() * k);
  WeightedPairCloud out;
  out.y.resize(e.ambient_dim(), total);
  out.z.resize(e.ambient_dim(), total);
  out.weights.resize(total);
  const Vec mass = t.masses();
  for (std::size_t i = 0; i < t.size(); ++i) {
    const auto c = static_cast<Eigen::Index>(i);
    const Vec p = t.points.col(c);
    const Vec center = e.tangent_coords(p - e.offset());
    CounterRng rng(seed, t.source_index[i]);
    for (std::size_t j = 0; j < k; ++j) {
      const auto col = static_cast<Eigen::Index>(i * k + j);
      out.y.col(col) = p;
      out.z.col(col) = draw_z(e, center, t.beta, rng);
      out.weights[col] = mass[c] / static_cast<double>(k);
    }
  }
  return out;
}

WeightedPairCloud sample_signed_cloud(const ThermalizedDiscrete& t, std::size_t n, std::uint64_t seed) {
  require(n >= 1, ErrorKind::InvalidArgument, "sample_signed_cloud: n must be >= 1");
  const AffineSubspace& e = t.subspace;
  const Vec prob = t.probabilities();
  WeightedPairCloud out;
  out.y.resize(e.ambient_dim(), static_cast<Eigen::Index>(n));
  out.z.resize(e.ambient_dim(), static_cast<Eigen::Index>(n));
  out.weights = Vec::Constant(static_cast<Eigen::Index>(n), t.total_mass() / static_cast<double>(n));
  CounterRng start(seed, 0);
  const double u0 = start.uniform();
  double cdf = prob[0];
  std::size_t atom = 0;
  for (std::size_t j = 0; j < n; ++j) {
    const double target = (static_cast<double>(j) + u0) / static_cast<double>(n);
    while (cdf < target && atom + 1 < t.size()) cdf += prob[static_cast<Eigen::Index>(++atom)];
    const Vec p = t.points.col(static_cast<Eigen::Index>(atom));
    CounterRng rng(seed, j + 1);
    out.y.col(static_cast<Eigen::Index>(j)) = p;
    out.z.col(static_cast<Eigen::Index>(j)) = draw_z(e, e.tangent_coords(p - e.offset()), t.beta, rng);
  }
  return out;
}

WeightedPairCloud coupled_discrete_cloud(const EmpiricalMeasure& m, const AffineSubspace& e, double beta,
                                         const PairCloud& thermal_samples) {
  require(m.partition.has_value() && m.reference_mass.size() == m.weights.size(), ErrorKind::InvalidArgument,
          "coupled_discrete_cloud needs a partitioned (grid) measure");
  check_same_edges(m.points.rows(), e.ambient_dim(), "coupled_discrete_cloud");
  const GridPartition& part = *m.partition;
  const std::size_t n = thermal_samples.size();
  std::vector<Eigen::Index> keep;
  std::vector<double> weight;
  std::vector<std::size_t> atom;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec y = thermal_samples.y.col(static_cast<Eigen::Index>(i));
    const auto a = part.locate(y);
    if (!a) continue;
    const auto c = static_cast<Eigen::Index>(*a);
    const double ref = m.reference_mass[c];
    if (!(ref > 0.0) || !(m.weights[c] > 0.0)) continue;
    const double dp = e.dist(Vec(m.points.col(c)));
    const double dy = e.dist(y);
    const double log_w = std::log(m.weights[c] / ref) - beta * (dp * dp - dy * dy);
    keep.push_back(static_cast<Eigen::Index>(i));
    weight.push_back(thermal_samples.weight * std::exp(log_w));
    atom.push_back(*a);
  }
  WeightedPairCloud out;
  const auto k = static_cast<Eigen::Index>(keep.size());
  out.y.resize(e.ambient_dim(), k);
  out.z.resize(e.ambient_dim(), k);
  out.weights.resize(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    const Vec p = m.points.col(static_cast<Eigen::Index>(atom[static_cast<std::size_t>(j)]));
    const Vec y = thermal_samples.y.col(keep[static_cast<std::size_t>(j)]);
    const Vec z = thermal_samples.z.col(keep[static_cast<std::size_t>(j)]);
    out.y.col(j) = p;
    out.z.col(j) = e.project(p) + (z - e.project(y));
    out.weights[j] = weight[static_cast<std::size_t>(j)];
  }
  return out;
}

}  // namespace ddinfer
