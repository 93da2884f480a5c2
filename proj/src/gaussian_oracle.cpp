#include "ddinfer/gaussian_oracle.hpp"

#include <cmath>
#include <numbers>

namespace ddinfer {

namespace {

Eigen::LLT<Mat> positive_factor(const Mat& a, const char* what) {
  Eigen::LLT<Mat> llt(a);
  bool ok = llt.info() == Eigen::Success;
  if (ok && a.rows() > 0) {
    const Vec diag = llt.matrixL().toDenseMatrix().diagonal();
    ok = diag.minCoeff() > 0.0 && diag.allFinite() &&
         diag.minCoeff() * diag.minCoeff() > 1e-14 * a.diagonal().cwiseAbs().maxCoeff();
  }
  if (!ok) {
    Eigen::SelfAdjointEigenSolver<Mat> eig(a, Eigen::EigenvaluesOnly);
    const double lmin = a.rows() > 0 ? eig.eigenvalues().minCoeff() : 0.0;
    throw Error(ErrorKind::NotFinite,
                std::string(what) + ": precision matrix is not positive definite (lambda_min = " +
                    format_double(lmin) + "); the measure has infinite mass");
  }
  return llt;
}

double quadratic_expectation(const QuantityOfInterest::QuadraticForm& q, const Vec& mean, const Mat& cov) {
  return (q.m * cov).trace() + mean.dot(q.m * mean) + q.w.dot(mean) + q.c;
}

}  // namespace

double GaussianForm::log_mass() const {
  const Eigen::LLT<Mat> llt = positive_factor(precision, "Gaussian form");
  const Vec mu = llt.solve(linear);
  const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return constant + 0.5 * static_cast<double>(dim()) * std::log(2.0 * std::numbers::pi) - 0.5 * log_det +
         0.5 * linear.dot(mu);
}

Vec GaussianForm::mean() const { return positive_factor(precision, "Gaussian form").solve(linear); }

Mat GaussianForm::covariance() const {
  const Eigen::LLT<Mat> llt = positive_factor(precision, "Gaussian form");
  Mat cov = llt.solve(Mat::Identity(dim(), dim()));
  return 0.5 * (cov + cov.transpose());
}

Mat covariance_cholesky(const Mat& cov) {
  if (cov.rows() == 0) return Mat(0, 0);
  Eigen::LLT<Mat> llt(cov);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  const double jitter = 1e-12 * std::max(cov.diagonal().cwiseAbs().maxCoeff(), 1e-300);
  Eigen::LLT<Mat> retry(cov + jitter * Mat::Identity(cov.rows(), cov.cols()));
  require(retry.info() == Eigen::Success, ErrorKind::Numerical,
          "covariance is not positive semidefinite beyond the 1e-12 jitter");
  return retry.matrixL();
}

double log_b_beta(Eigen::Index edges, double beta) {
  require(beta > 0.0 && std::isfinite(beta), ErrorKind::InvalidArgument, "beta must be positive and finite");
  return static_cast<double>(edges) * (std::log(std::numbers::pi) - std::log(beta));
}

double b_beta(Eigen::Index edges, double beta) { return std::exp(log_b_beta(edges, beta)); }

double log_c_beta(Eigen::Index k, double beta) {
  require(beta > 0.0 && std::isfinite(beta), ErrorKind::InvalidArgument, "beta must be positive and finite");
  return 0.5 * static_cast<double>(k) * (std::log(std::numbers::pi) - std::log(beta));
}

double c_beta(Eigen::Index k, double beta) { return std::exp(log_c_beta(k, beta)); }

ThermalMoments thermalized_moments(const QuadraticPotential& phi, const AffineSubspace& e, double beta) {
  require(beta > 0.0 && std::isfinite(beta), ErrorKind::InvalidArgument, "beta must be positive and finite");
  check_same_edges(phi.ambient_dim(), e.ambient_dim(), "thermalized_moments");
  const Eigen::Index dim = e.ambient_dim();
  const Eigen::Index n = dim / 2;
  const Eigen::Index k = e.dim();
  const Eigen::Index r = dim - k;
  const Mat& q = e.basis();
  const Mat& p = e.complement();
  const Vec& e0 = e.offset();
  const Eigen::Index d = 2 * k + r;  // (s, a, b)

  Mat m = Mat::Zero(dim, d);  // y - e0 = M x
  m.leftCols(k) = q;
  m.middleCols(k, r) = p;
  ThermalMoments out;
  out.beta = beta;
  out.k = k;
  out.form.precision = m.transpose() * phi.hessian * m;
  out.form.precision.diagonal().segment(k, r + k).array() += 2.0 * beta;
  out.form.precision = 0.5 * (out.form.precision + out.form.precision.transpose());
  out.form.linear = -m.transpose() * phi.gradient(e0);
  out.form.constant = -phi(e0) - log_b_beta(n, beta);

  out.log_tv_mass = out.form.log_mass();
  out.tv_mass = std::exp(out.log_tv_mass);

  out.chart = Mat::Zero(2 * dim, d);
  out.chart.topRows(dim) = m;
  out.chart.bottomRows(dim).leftCols(k) = q;
  out.chart.bottomRows(dim).rightCols(k) = -q;
  out.chart_offset.resize(2 * dim);
  out.chart_offset << e0, e0;
  out.mean = out.chart * out.form.mean() + out.chart_offset;
  out.covariance = out.chart * out.form.covariance() * out.chart.transpose();
  return out;
}

ThermalMoments thermalized_moments(const SlidingGaussianDensity& d, const AffineSubspace& e, double beta) {
  return thermalized_moments(d.quadratic(), e, beta);
}

LimitMoments limit_moments(const QuadraticPotential& phi, const AffineSubspace& e) {
  check_same_edges(phi.ambient_dim(), e.ambient_dim(), "limit_moments");
  const Mat& q = e.basis();
  const Vec& e0 = e.offset();
  const Eigen::Index dim = e.ambient_dim();
  LimitMoments out;
  out.form.precision = q.transpose() * phi.hessian * q;
  out.form.precision = 0.5 * (out.form.precision + out.form.precision.transpose());
  out.form.linear = -q.transpose() * phi.gradient(e0);
  out.form.constant = -phi(e0);
  if (e.dim() == 0) {
    out.log_tv_mass = out.form.constant;
    out.chart_mean = Vec(0);
    out.chart_covariance = Mat(0, 0);
  } else {
    out.log_tv_mass = out.form.log_mass();
    out.chart_mean = out.form.mean();
    out.chart_covariance = out.form.covariance();
  }
  out.tv_mass = std::exp(out.log_tv_mass);
  Mat pair(2 * dim, e.dim());
  pair << q, q;
  out.mean.resize(2 * dim);
  const Vec xi = e.embed(out.chart_mean);
  out.mean << xi, xi;
  out.covariance = pair * out.chart_covariance * pair.transpose();
  return out;
}

LimitMoments limit_moments(const SlidingGaussianDensity& d, const AffineSubspace& e) {
  return limit_moments(d.quadratic(), e);
}

Estimate expectation_infty(const QuantityOfInterest& f, const QuadraticPotential& phi, const AffineSubspace& e,
                           std::size_t n_samples, std::uint64_t seed, int threads) {
  const LimitMoments lim = limit_moments(phi, e);
  const Eigen::Index n = e.ambient_dim() / 2;
  Estimate est;
  if (auto q = f.quadratic_form(n)) {
    est.value = quadratic_expectation(*q, lim.mean, lim.covariance);
    est.closed_form = true;
    return est;
  }
  require(n_samples >= 2, ErrorKind::InvalidArgument, "expectation_infty: need at least 2 samples");
  const PairCloud cloud = sample_limit(lim, e, n_samples, seed, threads);
  std::vector<double> vals(n_samples);
  const EnergyMetric& metric = e.metric();
  parallel_for(n_samples, threads, [&](std::size_t i) {
    const auto c = static_cast<Eigen::Index>(i);
    vals[i] = f(cloud.y.col(c), cloud.z.col(c), metric);
  });
  const double mean = pairwise_sum(vals) / static_cast<double>(n_samples);
  std::vector<double> sq(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) sq[i] = (vals[i] - mean) * (vals[i] - mean);
  const double var = pairwise_sum(sq) / static_cast<double>(n_samples - 1);
  est.value = mean;
  est.stderr_ = std::sqrt(var / static_cast<double>(n_samples));
  return est;
}

Estimate expectation_infty(const QuantityOfInterest& f, const SlidingGaussianDensity& d, const AffineSubspace& e,
                           std::size_t n_samples, std::uint64_t seed, int threads) {
  return expectation_infty(f, d.quadratic(), e, n_samples, seed, threads);
}

PairCloud sample_thermalized(const ThermalMoments& m, std::size_t n, std::uint64_t seed, int threads) {
  require(n >= 1, ErrorKind::InvalidArgument, "sample_thermalized: n must be >= 1");
  const Mat l = covariance_cholesky(m.form.covariance());
  const Vec mean = m.form.mean();
  const Eigen::Index d = m.form.dim();
  const Eigen::Index dim = m.chart.rows() / 2;
  PairCloud cloud;
  cloud.y.resize(dim, static_cast<Eigen::Index>(n));
  cloud.z.resize(dim, static_cast<Eigen::Index>(n));
  cloud.weight = m.tv_mass / static_cast<double>(n);
  parallel_for(n, threads, [&](std::size_t i) {
    Vec g(d);
    standard_normals(seed, i, std::span<double>(g.data(), static_cast<std::size_t>(d)));
    const Vec x = mean + l.triangularView<Eigen::Lower>() * g;
    const Vec yz = m.chart * x + m.chart_offset;
    cloud.y.col(static_cast<Eigen::Index>(i)) = yz.head(dim);
    cloud.z.col(static_cast<Eigen::Index>(i)) = yz.tail(dim);
  });
  return cloud;
}

PairCloud sample_thermalized(const SlidingGaussianDensity& d, const AffineSubspace& e, double beta, std::size_t n,
                             std::uint64_t seed, int threads) {
  return sample_thermalized(thermalized_moments(d, e, beta), n, seed, threads);
}

PairCloud sample_limit(const LimitMoments& m, const AffineSubspace& e, std::size_t n, std::uint64_t seed,
                       int threads) {
  require(n >= 1, ErrorKind::InvalidArgument, "sample_limit: n must be >= 1");
  const Mat l = covariance_cholesky(m.chart_covariance);
  const Eigen::Index k = e.dim();
  const Eigen::Index dim = e.ambient_dim();
  PairCloud cloud;
  cloud.y.resize(dim, static_cast<Eigen::Index>(n));
  cloud.weight = m.tv_mass / static_cast<double>(n);
  parallel_for(n, threads, [&](std::size_t i) {
    Vec g(k);
    standard_normals(seed, i, std::span<double>(g.data(), static_cast<std::size_t>(k)));
    const Vec s = k > 0 ? Vec(m.chart_mean + l.triangularView<Eigen::Lower>() * g) : Vec(0);
    cloud.y.col(static_cast<Eigen::Index>(i)) = e.embed(s);
  });
  cloud.z = cloud.y;
  return cloud;
}

PairCloud sample_limit(const SlidingGaussianDensity& d, const AffineSubspace& e, std::size_t n, std::uint64_t seed,
                       int threads) {
  return sample_limit(limit_moments(d, e), e, n, seed, threads);
}

double uniform_tv_bound(const TransversalityCertificate& cert, const AffineSubspace& e) {
  require(cert.ok && cert.c > 0.0, ErrorKind::InvalidArgument, "uniform_tv_bound needs a valid certificate");
  const double n = static_cast<double>(e.ambient_dim() / 2);
  const double e0 = e.metric().norm(e.offset());
  const double log_bound = n * std::log(2.0) + cert.b - cert.c * e0 * e0 +
                           0.5 * static_cast<double>(e.dim()) * std::log(std::numbers::pi / cert.c);
  return std::exp(log_bound);
}

}  // namespace ddinfer
