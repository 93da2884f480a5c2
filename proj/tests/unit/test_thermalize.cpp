#include "ddinfer/network.hpp"
#include "ddinfer/thermalize.hpp"
#include "support.hpp"

#include <doctest.h>

#include <numbers>

using namespace ddinfer;

namespace {

EmpiricalMeasure atoms(std::initializer_list<std::pair<double, double>> pts, std::initializer_list<double> w) {
  Mat p(2, static_cast<Eigen::Index>(pts.size()));
  Eigen::Index i = 0;
  for (auto [e, s] : pts) p.col(i++) << e, s;
  Vec weights(static_cast<Eigen::Index>(w.size()));
  i = 0;
  for (double v : w) weights[i++] = v;
  return make_empirical(p, weights);
}

struct Grid {
  Network net;
  AffineSubspace e;
  SlidingGaussianDensity d;
  EmpiricalMeasure m;
};

Grid grid(double eps, double radius = 4.0, std::uint64_t net_seed = 0) {
  Network net = net_seed == 0 ? testing::single_edge() : testing::random_network(1, 1, net_seed);
  SlidingGaussianDensity d(net.coeffs, net.noise);
  auto m = discretize(d, Vec::Constant(net.n_edges, eps), radius, classical_solution(net).state);
  return {net, constraint_subspace(net), d, std::move(m)};
}

}  // namespace

TEST_SUITE("thermalize") {
  const EnergyMetric unit(Vec::Constant(1, 1.0));

  TEST_CASE("thermal weight examples") {
    const Vec y = (Vec(2) << 0.3, 0.7).finished();
    CHECK(thermal_weight(y, y, 1.0, unit) == doctest::Approx(1.0 / std::numbers::pi).epsilon(1e-15));
    const Vec z = (Vec(2) << 1.3, 0.7).finished();
    CHECK(thermal_weight(y, z, 4.0, unit) == doctest::Approx(4.0 / std::numbers::pi * std::exp(-4.0)).epsilon(1e-14));
    const Vec w = (Vec(2) << 0.0, -0.2).finished();
    const double ratio = thermal_weight(y, z, 3.0, unit) / thermal_weight(y, w, 3.0, unit);
    const double expect = std::exp(-3.0 * (std::pow(unit.norm(y - z), 2) - std::pow(unit.norm(y - w), 2)));
    CHECK(ratio == doctest::Approx(expect).epsilon(1e-13));
  }

  TEST_CASE("per-point thermal masses") {
    const auto e = constraint_subspace(testing::single_edge());
    const auto on = discrete_thermal_mass(atoms({{0.4, 1.0}}, {1.0}), e, 4.0);
    CHECK(on.total_mass() == doctest::Approx(2.0 / std::sqrt(std::numbers::pi)).epsilon(1e-14));
    const auto off = discrete_thermal_mass(atoms({{0.0, 0.0}}, {1.0}), e, 4.0);
    CHECK(off.total_mass() == doctest::Approx(2.0 / std::sqrt(std::numbers::pi) * std::exp(-4.0)).epsilon(1e-14));
  }

  TEST_CASE("monotone suppression in beta") {
    const auto e = constraint_subspace(testing::single_edge());
    const auto m = atoms({{0.4, 1.0}, {0.0, 0.3}}, {1.0, 1.0});
    double prev_on = 0.0, prev_off = std::numeric_limits<double>::infinity();
    for (double beta : {1.0, 2.0, 4.0, 8.0, 16.0}) {
      const Vec mass = discrete_thermal_mass(m, e, beta).masses();
      CHECK(mass[0] == doctest::Approx(std::sqrt(beta / std::numbers::pi)).epsilon(1e-14));
      CHECK(mass[0] > prev_on);
      CHECK(mass[1] < prev_off);
      prev_on = mass[0];
      prev_off = mass[1];
    }
  }

  TEST_CASE("negligible atoms are dropped with an accounted bound") {
    const auto e = constraint_subspace(testing::single_edge());
    const auto t = discrete_thermal_mass(atoms({{0.0, 1.0}, {0.0, 30.0}}, {1.0, 1.0}), e, 1.0);
    CHECK(t.size() == 1);
    CHECK(t.dropped == 1);
    CHECK(t.dropped_mass_bound > 0.0);
    CHECK(t.dropped_mass_bound < 1e-290 * t.total_mass());
  }

  TEST_CASE("grid total mass is close to the oracle mass") {
    const auto g = grid(0.05);
    const double beta = 16.0;
    const auto t = discrete_thermal_mass(g.m, g.e, beta);
    const double oracle = thermalized_moments(g.d, g.e, beta).tv_mass;
    CHECK(std::abs(t.total_mass() - oracle) <= std::sqrt(beta) * 0.05 * oracle);
  }

  TEST_CASE("expectation of one is exactly one") {
    const auto g = grid(0.2, 2.0);
    const auto r = expectation_h(QuantityOfInterest::one(), g.m, g.e, 10.0);
    CHECK(r.value == 1.0);
    CHECK(r.stderr_ == 0.0);
    CHECK(r.closed_form);
  }

  TEST_CASE("single atom on E") {
    const auto e = constraint_subspace(testing::single_edge());
    for (double beta : {0.5, 5.0, 500.0}) {
      const auto r = expectation_h(QuantityOfInterest::sigma(0), atoms({{0.4, 1.0}}, {2.0}), e, beta);
      CHECK(r.value == doctest::Approx(1.0).epsilon(1e-14));
      CHECK_FALSE(r.bounded);
      const auto q = expectation_h(QuantityOfInterest::eps(0), atoms({{0.4, 1.0}}, {2.0}), e, beta);
      CHECK(q.value == doctest::Approx(0.4).epsilon(1e-14));
    }
  }

  TEST_CASE("closed-form path adds the E0 variance for quadratic f") {
    const auto e = constraint_subspace(testing::single_edge());
    Mat m = Mat::Zero(4, 4);
    m(2, 2) = 1.0;  // eps(z)^2
    const auto f = QuantityOfInterest::quadratic(m, Vec::Zero(4));
    const double beta = 3.0;
    const auto r = expectation_h(f, atoms({{0.4, 1.0}}, {1.0}), e, beta);
    CHECK(r.value == doctest::Approx(0.16 + 1.0 / (2.0 * beta)).epsilon(1e-14));
  }

  TEST_CASE("Monte Carlo path agrees with the closed form") {
    const auto g = grid(0.25, 2.0);
    const double beta = 8.0;
    const auto exact = expectation_h(QuantityOfInterest::eps(0), g.m, g.e, beta);
    ExpectationOptions opts;
    opts.n_samples = 50000;
    opts.seed = 3;
    const auto mc = expectation_h(parse_qoi("clip[-100,100]:eps[1]"), g.m, g.e, beta, opts);
    CHECK_FALSE(mc.closed_form);
    CHECK(mc.stderr_ > 0.0);
    CHECK(std::abs(mc.value - exact.value) < 4.0 * mc.stderr_);
    opts.bootstrap = 200;
    const auto boot = expectation_h(parse_qoi("clip[-100,100]:eps[1]"), g.m, g.e, beta, opts);
    CHECK(boot.value == mc.value);
    CHECK(boot.stderr_ == doctest::Approx(mc.stderr_).epsilon(0.5));
  }

  TEST_CASE("results are independent of the thread count") {
    const auto g = grid(0.3, 1.5, 5);
    ExpectationOptions opts;
    opts.n_samples = 5000;
    const auto a = expectation_h(QuantityOfInterest::gap(), g.m, g.e, 6.0, opts);
    opts.threads = 4;
    const auto b = expectation_h(QuantityOfInterest::gap(), g.m, g.e, 6.0, opts);
    CHECK(a.value == b.value);
    CHECK(a.stderr_ == b.stderr_);
    const auto ta = discrete_thermal_mass(g.m, g.e, 6.0, 1);
    const auto tb = discrete_thermal_mass(g.m, g.e, 6.0, 3);
    CHECK(ta.log_mass == tb.log_mass);
    CHECK(ta.log_total == tb.log_total);
  }

  TEST_CASE("normalization invariance") {
    auto g = grid(0.3, 1.5);
    ExpectationOptions opts;
    opts.n_samples = 4000;
    const auto f = QuantityOfInterest::z_norm();
    const auto a = expectation_h(f, g.m, g.e, 5.0, opts);
    g.m.weights *= 4.0;  // a power of two keeps the rescaling exact
    const auto b = expectation_h(f, g.m, g.e, 5.0, opts);
    CHECK(a.value == doctest::Approx(b.value).epsilon(1e-14));
    const auto c = expectation_h(QuantityOfInterest::sigma(0), g.m, g.e, 5.0, opts);
    g.m.weights *= 0.37;
    const auto d = expectation_h(QuantityOfInterest::sigma(0), g.m, g.e, 5.0, opts);
    CHECK(c.value == doctest::Approx(d.value).epsilon(1e-12));
  }

  TEST_CASE("translation equivariance") {
    auto g = grid(0.3, 1.5, 9);
    const Vec shift = (Vec(4) << 0.3, -0.2, 0.7, 0.1).finished();
    auto moved = g.m;
    moved.points.colwise() += shift;
    const auto e2 = AffineSubspace::from_spanning(g.e.metric(), g.e.offset() + shift, g.e.basis());
    ExpectationOptions opts;
    opts.n_samples = 3000;
    const auto a = expectation_h(QuantityOfInterest::gap(), g.m, g.e, 7.0, opts);
    const auto b = expectation_h(QuantityOfInterest::gap(), moved, e2, 7.0, opts);
    CHECK(a.value == doctest::Approx(b.value).epsilon(1e-10));
    const auto c = expectation_h(QuantityOfInterest::sigma(1), g.m, g.e, 7.0, opts);
    const auto d = expectation_h(QuantityOfInterest::sigma(1), moved, e2, 7.0, opts);
    CHECK(d.value - c.value == doctest::Approx(shift[3]).epsilon(1e-10));
  }

  TEST_CASE("atoms far from E at large beta are an error naming the distances") {
    const auto e = constraint_subspace(testing::single_edge());
    try {
      expectation_h(QuantityOfInterest::one(), atoms({{0.0, 0.0}}, {1.0}), e, 1e4);
      FAIL("expected an error");
    } catch (const Error& err) {
      CHECK(std::string(err.what()).find("distances") != std::string::npos);
    }
  }

  TEST_CASE("signed clouds carry the full mass") {
    const auto g = grid(0.3, 1.5);
    const auto t = discrete_thermal_mass(g.m, g.e, 6.0);
    const auto c = to_signed_cloud(t, 5, 2);
    CHECK(c.size() == 5 * t.size());
    CHECK(c.total() == doctest::Approx(t.total_mass()).epsilon(1e-12));
    for (Eigen::Index j = 0; j < 20; ++j) CHECK(g.e.dist(Vec(c.z.col(j))) < 1e-10);
    const auto s = sample_signed_cloud(t, 777, 2);
    CHECK(s.size() == 777);
    CHECK(s.total() == doctest::Approx(t.total_mass()).epsilon(1e-12));
    CHECK(to_signed_cloud(t, 5, 2).z == c.z);

    const auto e = constraint_subspace(testing::single_edge());
    const auto one = to_signed_cloud(discrete_thermal_mass(atoms({{0.2, 1.0}}, {1.0}), e, 50.0), 1, 3);
    CHECK(one.size() == 1);
    CHECK(one.y(0, 0) == 0.2);
    CHECK(std::abs(one.z(0, 0) - 0.2) < 1.0);
  }

  TEST_CASE("cloud mean of eps(z) matches the expectation") {
    const auto g = grid(0.25, 2.0);
    const double beta = 8.0;
    const auto t = discrete_thermal_mass(g.m, g.e, beta);
    const auto c = sample_signed_cloud(t, 40000, 5);
    const double mean = c.z.row(0).dot(c.weights) / c.total();
    const double var = ((c.z.row(0).array() - mean).square().matrix().dot(c.weights)) / c.total();
    const auto exact = expectation_h(QuantityOfInterest::eps(0), t);
    CHECK(std::abs(mean - exact.value) < 4.0 * std::sqrt(var / 40000.0));
  }

  TEST_CASE("coupled cloud is an unbiased picture of the grid measure") {
    const auto g = grid(0.2, 4.0);
    const double beta = 10.0;
    const auto t = discrete_thermal_mass(g.m, g.e, beta);
    const auto th = sample_thermalized(g.d, g.e, beta, 40000, 7);
    const auto c = coupled_discrete_cloud(g.m, g.e, beta, th);
    const Vec w = c.weights;
    const double n = 40000.0;
    const double total = w.sum();
    const double sd = std::sqrt((w.array() - total / n).square().sum() / (n - 1.0)) * std::sqrt(n);
    CHECK(std::abs(total - t.total_mass()) < 4.0 * sd);
    for (Eigen::Index j = 0; j < 50; ++j) {
      CHECK(g.e.dist(Vec(c.z.col(j))) < 1e-10);
      CHECK(g.m.partition->locate(Vec(c.y.col(j))).has_value());
    }
  }
}
