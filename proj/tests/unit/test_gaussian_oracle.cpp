#include "ddinfer/gaussian_oracle.hpp"
#include "ddinfer/network.hpp"
#include "oracle.hpp"
#include "support.hpp"

#include <doctest.h>

#include <numbers>

using namespace ddinfer;

namespace {

struct Setup {
  Network net;
  AffineSubspace e;
  SlidingGaussianDensity d;
};

Setup single() {
  auto net = testing::single_edge();
  return {net, constraint_subspace(net), SlidingGaussianDensity(net.coeffs, net.noise)};
}

Setup from(const Network& net) { return {net, constraint_subspace(net), SlidingGaussianDensity(net.coeffs, net.noise)}; }

/// E|y - z|^2 under the normalized moments, stacked [y; z].
double mean_gap2(const ThermalMoments& t, const EnergyMetric& m) {
  const Eigen::Index d = t.mean.size() / 2;
  Mat diff = Mat::Zero(d, 2 * d);
  diff.leftCols(d).setIdentity();
  diff.rightCols(d) = -Mat::Identity(d, d);
  const Vec g = m.gram_diagonal();
  const Vec mu = diff * t.mean;
  const Mat cov = diff * t.covariance * diff.transpose();
  return mu.dot(g.cwiseProduct(mu)) + (g.asDiagonal() * cov).trace();
}

}  // namespace

TEST_SUITE("gaussian_oracle") {
  TEST_CASE("normalizing constants") {
    for (double beta : {0.5, 1.0, 4.0, 123.0}) {
      for (Eigen::Index n : {1, 2, 5}) {
        CHECK(b_beta(n, beta) * std::pow(beta, static_cast<double>(n)) ==
              doctest::Approx(std::pow(std::numbers::pi, static_cast<double>(n))).epsilon(1e-14));
        CHECK(c_beta(n, beta) == doctest::Approx(std::pow(std::numbers::pi / beta, 0.5 * static_cast<double>(n))).epsilon(1e-14));
      }
    }
  }

  TEST_CASE("thermalized mass matches 3D quadrature at beta = 4") {
    const auto s = single();
    const double beta = 4.0;
    const auto t = thermalized_moments(s.d, s.e, beta);
    // y = (eps, sigma) in R^2 and z = (u, 1) on E; C = 1 so the energy norm is Euclidean.
    const double oracle = testing::integrate3(
        [&](double sigma, double eps, double u) {
          const double gap2 = (eps - u) * (eps - u) + (sigma - 1.0) * (sigma - 1.0);
          const double ph = 0.5 * (sigma - eps) * (sigma - eps);
          return beta / std::numbers::pi * std::exp(-beta * gap2 - ph);
        },
        -3.0, 5.0, -12.0, 14.0, -6.0, 8.0, 1e-9);
    // eps-range shift is irrelevant: the inner integrals are translation invariant along u.
    CHECK(t.tv_mass == doctest::Approx(oracle).epsilon(1e-6));
  }

  TEST_CASE("thermalized mass tends to the limit mass") {
    const auto s = single();
    const double limit = std::sqrt(2.0 * std::numbers::pi);
    double prev = std::numeric_limits<double>::infinity();
    for (double beta : {1e2, 1e3, 1e4}) {
      const auto t = thermalized_moments(s.d, s.e, beta);
      const double gap = std::abs(t.tv_mass - limit);
      CHECK(gap <= prev);
      prev = gap;
      for (Eigen::Index i = 0; i < 4; ++i) CHECK(t.mean[i] == doctest::Approx(1.0).epsilon(1e-6));
    }
    CHECK(prev < 1e-6);
  }

  TEST_CASE("limit moments of the single edge") {
    const auto s = single();
    const auto lim = limit_moments(s.d, s.e);
    CHECK(lim.tv_mass == doctest::Approx(std::sqrt(2.0 * std::numbers::pi)).epsilon(1e-12));
    for (Eigen::Index i = 0; i < 4; ++i) CHECK(lim.mean[i] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(lim.chart_covariance(0, 0) == doctest::Approx(1.0).epsilon(1e-12));

    const auto wide = single();
    const SlidingGaussianDensity d2(wide.net.coeffs, Vec::Constant(1, 2.0));
    CHECK(limit_moments(d2, wide.e).tv_mass == doctest::Approx(2.0 * lim.tv_mass).epsilon(1e-12));
  }

  TEST_CASE("limit mean is the classical solution") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto s = from(testing::random_network(1 + static_cast<int>(seed % 2), 1, seed + 100));
      const auto lim = limit_moments(s.d, s.e);
      const Vec classical = classical_solution(s.net).state.stacked();
      const Eigen::Index n = classical.size();
      CHECK((lim.mean.head(n) - classical).norm() < 1e-8);
      CHECK((lim.mean.tail(n) - classical).norm() < 1e-8);
    }
  }

  TEST_CASE("limit expectations") {
    const auto s = single();
    auto one = expectation_infty(QuantityOfInterest::one(), s.d, s.e);
    CHECK(one.value == 1.0);
    CHECK(one.closed_form);
    auto sig = expectation_infty(QuantityOfInterest::sigma(0), s.d, s.e);
    CHECK(sig.value == doctest::Approx(1.0).epsilon(1e-12));
    auto gap = expectation_infty(QuantityOfInterest::gap(), s.d, s.e, 1000, 3);
    CHECK(gap.value == doctest::Approx(0.0));
    auto eps2 = expectation_infty(
        QuantityOfInterest::quadratic((Mat(4, 4) << 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0).finished(),
                                      Vec::Zero(4)),
        s.d, s.e);
    // eps(z) ~ N(1, 1) on E, so E[eps^2] = 2.
    CHECK(eps2.value == doctest::Approx(2.0).epsilon(1e-12));
    auto nonlinear = expectation_infty(QuantityOfInterest::z_norm(), s.d, s.e, 200000, 5);
    CHECK_FALSE(nonlinear.closed_form);
    // |z| = sqrt(u^2 + 1), u ~ N(1, 1).
    const double oracle = testing::integrate(
        [](double u) { return std::sqrt(u * u + 1.0) * std::exp(-0.5 * (u - 1.0) * (u - 1.0)); }, -12.0, 14.0) /
                          std::sqrt(2.0 * std::numbers::pi);
    CHECK(std::abs(nonlinear.value - oracle) < 4.0 * nonlinear.stderr_);
  }

  TEST_CASE("thermalized samples reproduce the exact moments") {
    const auto s = from(testing::random_network(1, 1, 7));
    const double beta = 6.0;
    const auto t = thermalized_moments(s.d, s.e, beta);
    const std::size_t n = 100000;
    const auto cloud = sample_thermalized(t, n, 11, 2);
    CHECK(cloud.total() == doctest::Approx(t.tv_mass).epsilon(1e-12));
    Mat x(cloud.y.rows() * 2, cloud.y.cols());
    x << cloud.y, cloud.z;
    const Vec mean = x.rowwise().mean();
    const Mat centered = x.colwise() - mean;
    const Mat cov = centered * centered.transpose() / static_cast<double>(n - 1);
    for (Eigen::Index i = 0; i < mean.size(); ++i) {
      const double se = std::sqrt(t.covariance(i, i) / static_cast<double>(n));
      CHECK(std::abs(mean[i] - t.mean[i]) < 4.0 * se);
      CHECK(cov(i, i) == doctest::Approx(t.covariance(i, i)).epsilon(0.05));
    }
    CHECK((cov - t.covariance).norm() < 0.05 * t.covariance.norm());
    // Samples lie in Z x E.
    for (Eigen::Index j = 0; j < 50; ++j) CHECK(s.e.dist(Vec(cloud.z.col(j))) < 1e-10);
  }

  TEST_CASE("samplers are deterministic across thread counts") {
    const auto s = from(testing::random_network(2, 1, 3));
    const auto a = sample_thermalized(s.d, s.e, 9.0, 3000, 42, 1);
    const auto b = sample_thermalized(s.d, s.e, 9.0, 3000, 42, 4);
    CHECK(a.y == b.y);
    CHECK(a.z == b.z);
    const auto la = sample_limit(s.d, s.e, 3000, 42, 1);
    const auto lb = sample_limit(s.d, s.e, 3000, 42, 3);
    CHECK(la.y == lb.y);
    CHECK(la.y == la.z);
  }

  TEST_CASE("thermal and limit clouds are coupled through the E-chart normals") {
    const auto s = single();
    const auto th = sample_thermalized(s.d, s.e, 1e4, 500, 9);
    const auto lim = sample_limit(s.d, s.e, 500, 9);
    const double rms = std::sqrt((th.z - lim.z).squaredNorm() / 500.0);
    CHECK(rms < 0.05);
  }

  TEST_CASE("uniform bound holds along a doubling beta sequence") {
    const auto s = from(testing::random_network(2, 1, 17));
    const double beta0 = 1.0;
    const auto cert = check_transversality(s.d.quadratic(), s.e, beta0);
    REQUIRE(cert.ok);
    const double bound = uniform_tv_bound(cert, s.e);
    CHECK(std::isfinite(bound));
    double beta = 2.0 * beta0;
    for (int j = 0; j < 10; ++j, beta *= 2.0) CHECK(thermalized_moments(s.d, s.e, beta).tv_mass <= bound);
  }

  TEST_CASE("diagonal concentration decays like 1 / beta") {
    const auto s = from(testing::random_network(2, 1, 23));
    std::vector<double> scaled;
    for (double beta : {10.0, 100.0, 1000.0, 10000.0}) {
      const double g2 = mean_gap2(thermalized_moments(s.d, s.e, beta), s.e.metric());
      scaled.push_back(g2 * beta);
    }
    for (std::size_t i = 1; i < scaled.size(); ++i) CHECK(scaled[i] == doctest::Approx(scaled[0]).epsilon(0.5));
    CHECK(scaled.back() == doctest::Approx(scaled[2]).epsilon(0.02));
  }

  TEST_CASE("invalid inputs are refused") {
    const auto s = single();
    CHECK_THROWS_AS(thermalized_moments(s.d, s.e, 0.0), Error);
    const QuadraticPotential zero(Mat::Zero(2, 2), Vec::Zero(2), 0.0);
    try {
      limit_moments(zero, s.e);
      FAIL("expected NotFinite");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::NotFinite);
    }
    Mat cov(2, 2);
    cov << 1.0, 0.0, 0.0, -1.0;
    CHECK_THROWS_AS(covariance_cholesky(cov), Error);
  }
}
