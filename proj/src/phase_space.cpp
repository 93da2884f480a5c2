#include "ddinfer/phase_space.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace ddinfer {

void check_same_edges(Eigen::Index a, Eigen::Index b, const char* what) {
  if (a != b) {
    throw Error(ErrorKind::DimensionMismatch,
                std::string(what) + ": " + std::to_string(a) + " vs " + std::to_string(b) + " edges");
  }
}

PhaseVector::PhaseVector(Vec eps_, Vec sigma_) : eps(std::move(eps_)), sigma(std::move(sigma_)) {
  check_same_edges(eps.size(), sigma.size(), "PhaseVector eps/sigma");
  require(eps.size() >= 1, ErrorKind::InvalidArgument, "PhaseVector needs at least one edge");
  require(eps.allFinite() && sigma.allFinite(), ErrorKind::InvalidArgument,
          "PhaseVector entries must be finite");
}

Vec PhaseVector::stacked() const {
  Vec x(2 * eps.size());
  x << eps, sigma;
  return x;
}

PhaseVector PhaseVector::from_stacked(const Vec& x) {
  require(x.size() % 2 == 0 && x.size() > 0, ErrorKind::DimensionMismatch,
          "stacked phase vector must have even positive length");
  const Eigen::Index n = x.size() / 2;
  return PhaseVector(x.head(n), x.tail(n));
}

EnergyMetric::EnergyMetric(Vec coeffs_, double ell_) : coeffs(std::move(coeffs_)), ell(ell_) {
  require(coeffs.size() >= 1, ErrorKind::InvalidArgument, "metric needs at least one edge");
  for (Eigen::Index e = 0; e < coeffs.size(); ++e) {
    require(std::isfinite(coeffs[e]) && coeffs[e] > 0.0, ErrorKind::InvalidArgument,
            "metric coefficients must be positive and finite");
  }
  require(std::isfinite(ell) && ell > 0.0, ErrorKind::InvalidArgument, "ell must be positive");
}

Vec EnergyMetric::gram_diagonal() const {
  Vec g(2 * coeffs.size());
  g << coeffs, coeffs.cwiseInverse();
  return g;
}

Vec EnergyMetric::whitening() const { return gram_diagonal().cwiseSqrt(); }

double EnergyMetric::inner(const Vec& x, const Vec& y) const {
  check_same_edges(x.size(), 2 * coeffs.size(), "energy inner product (lhs)");
  check_same_edges(y.size(), 2 * coeffs.size(), "energy inner product (rhs)");
  const Eigen::Index n = coeffs.size();
  return (x.head(n).cwiseProduct(y.head(n)).cwiseProduct(coeffs)).sum() +
         (x.tail(n).cwiseProduct(y.tail(n)).cwiseQuotient(coeffs)).sum();
}

double EnergyMetric::norm(const Vec& x) const { return std::sqrt(inner(x, x)); }

double energy_inner(const PhaseVector& a, const PhaseVector& b, const EnergyMetric& m) {
  check_same_edges(a.edges(), m.edges(), "energy_inner");
  check_same_edges(b.edges(), m.edges(), "energy_inner");
  return (a.eps.cwiseProduct(b.eps).cwiseProduct(m.coeffs)).sum() +
         (a.sigma.cwiseProduct(b.sigma).cwiseQuotient(m.coeffs)).sum();
}

double energy_norm(const PhaseVector& z, const EnergyMetric& m) {
  return std::sqrt(energy_inner(z, z, m));
}

std::pair<double, double> t_transform(double eps_e, double sigma_e, double c_e) {
  require(c_e > 0.0, ErrorKind::InvalidArgument, "t_transform needs C_e > 0");
  const double rc = std::sqrt(c_e);
  const double a = eps_e * rc * std::numbers::sqrt2 / 2.0;
  const double b = sigma_e / (rc * std::numbers::sqrt2);
  return {a + b, a - b};
}

std::pair<double, double> t_inverse(double t1, double t2, double c_e) {
  require(c_e > 0.0, ErrorKind::InvalidArgument, "t_inverse needs C_e > 0");
  const double rc = std::sqrt(c_e);
  // t1 + t2 = sqrt(2 C) eps, t1 - t2 = sqrt(2 / C) sigma
  const double eps = (t1 + t2) / (std::numbers::sqrt2 * rc);
  const double sigma = (t1 - t2) * rc / std::numbers::sqrt2;
  return {eps, sigma};
}

}  // namespace ddinfer
