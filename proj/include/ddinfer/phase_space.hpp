#pragma once

#include "ddinfer/common.hpp"

#include <utility>

namespace ddinfer {

/// A state z = (eps, sigma): per-edge potential differences and fluxes.
///
/// Internally most algorithms work with the stacked vector [eps; sigma] of
/// length 2N; `stacked()` / `from_stacked()` convert.
struct PhaseVector {
  Vec eps;
  Vec sigma;

  PhaseVector() = default;
  explicit PhaseVector(Eigen::Index n) : eps(Vec::Zero(n)), sigma(Vec::Zero(n)) {}
  PhaseVector(Vec eps_, Vec sigma_);

  Eigen::Index edges() const { return eps.size(); }
  Vec stacked() const;
  static PhaseVector from_stacked(const Vec& x);
};

/// Diagonal energy metric: coefficients C_e > 0 and the bounded-Lipschitz
/// length scale ell.
struct EnergyMetric {
  Vec coeffs;
  double ell = 1.0;

  EnergyMetric() = default;
  explicit EnergyMetric(Vec coeffs_, double ell_ = 1.0);

  Eigen::Index edges() const { return coeffs.size(); }

  /// Diagonal of the Gram matrix in stacked coordinates: [C; 1/C].
  Vec gram_diagonal() const;
  /// Square root of the Gram diagonal. Multiplying stacked coordinates by it
  /// maps the energy norm onto the Euclidean one (unit determinant).
  Vec whitening() const;

  double inner(const Vec& x, const Vec& y) const;
  double norm(const Vec& x) const;
};

double energy_inner(const PhaseVector& a, const PhaseVector& b, const EnergyMetric& m);
double energy_norm(const PhaseVector& z, const EnergyMetric& m);

/// Per-edge map T_e with |T_e(y)| = ||y||_e and |det| = 1. The second
/// component vanishes exactly on the material line sigma = C * eps.
std::pair<double, double> t_transform(double eps_e, double sigma_e, double c_e);
std::pair<double, double> t_inverse(double t1, double t2, double c_e);

void check_same_edges(Eigen::Index a, Eigen::Index b, const char* what);

}  // namespace ddinfer
