// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset.

#include "ddinfer/annealing.hpp"
#include "ddinfer/io.hpp"
#include "../unit/lp_oracle.hpp"
#include "../unit/support.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

using namespace ddinfer;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct SingleEdge {
  Network net = testing::single_edge();
  SlidingGaussianDensity d{net.coeffs, net.noise};
  AffineSubspace e = constraint_subspace(net);
};

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

Outcome thermalization_rate() {
  const SingleEdge s;
  StudyOptions opts;
  const auto rep = thermalization_study(s.net, {25.0, 100.0, 400.0, 1600.0}, opts);
  const double slope = rep.therm_vs_beta->slope;
  // Single line of slope -1/2: C_i = FN_i sqrt(beta_i) against their geometric mean.
  double logc = 0.0;
  std::vector<double> c;
  for (const auto& r : rep.rows) {
    c.push_back(r.fn_therm * std::sqrt(r.beta_h));
    logc += std::log(c.back());
  }
  const double fitted = std::exp(logc / static_cast<double>(c.size()));
  double worst = 0.0;
  for (double ci : c) worst = std::max(worst, rel(ci, fitted));
  std::string detail = fmt("slope %.3f, C = %.3f, max deviation %.1f%%, FN =", slope, fitted, 100.0 * worst);
  for (const auto& r : rep.rows) detail += fmt(" %.4f", r.fn_therm);
  return {slope <= -0.40 && worst <= 0.30, detail};
}

Outcome limit_identity() {
  const SingleEdge s;
  const auto lim = limit_moments(s.d, s.e);
  const double tv_err = std::abs(lim.tv_mass - std::sqrt(2.0 * std::numbers::pi));
  const double mean_err = (lim.mean - Vec::Ones(4)).cwiseAbs().maxCoeff();
  double net_err = 0.0;
  const std::pair<int, int> shapes[] = {{1, 1}, {2, 1}, {2, 0}};
  std::uint64_t seed = 31;
  for (auto [nodes, extra] : shapes) {
    const auto net = testing::random_network(nodes, extra, seed++);
    const SlidingGaussianDensity d(net.coeffs, net.noise);
    const auto l = limit_moments(d, constraint_subspace(net));
    const Vec classical = classical_solution(net).state.stacked();
    const Eigen::Index n = classical.size();
    net_err = std::max({net_err, (l.mean.head(n) - classical).cwiseAbs().maxCoeff(),
                        (l.mean.tail(n) - classical).cwiseAbs().maxCoeff()});
  }
  return {tv_err <= 1e-10 && mean_err <= 1e-8 && net_err <= 1e-6,
          fmt("|tv - sqrt(2 pi)| = %.2e, |mean - (1,1)| = %.2e, random networks %.2e", tv_err, mean_err, net_err)};
}

Outcome discretization_bound() {
  const SingleEdge s;
  const double beta = 16.0;
  StudyOptions opts;
  const auto rep = convergence_study(s.net, custom_schedule({0.4, 0.2, 0.1, 0.05}, {beta, beta, beta, beta}), opts);
  bool decreasing = true;
  for (std::size_t i = 1; i < rep.rows.size(); ++i) decreasing &= rep.rows[i].fn_approx < rep.rows[i - 1].fn_approx;
  std::vector<double> c;
  for (std::size_t i = 1; i < rep.rows.size(); ++i) c.push_back(rep.rows[i].fn_approx / (std::sqrt(beta) * rep.rows[i].eps_h));
  const double mean = (c[0] + c[1] + c[2]) / 3.0;
  double worst = 0.0;
  for (double ci : c) worst = std::max(worst, rel(ci, mean));
  bool partitions = true;
  for (const auto& r : rep.rows) partitions &= r.atoms > 0;
  std::string detail = fmt("C = %.3f %.3f %.3f (max deviation %.1f%%), FN =", c[0], c[1], c[2], 100.0 * worst);
  for (const auto& r : rep.rows) detail += fmt(" %.4f", r.fn_approx);
  return {decreasing && worst <= 0.25 && partitions, detail};
}

ConvergenceReport schedule_report() {
  static std::optional<ConvergenceReport> cached;
  if (!cached) {
    const SingleEdge s;
    cached = convergence_study(s.net, make_schedule({0.4, 0.2, 0.1, 0.05}, 2.0), StudyOptions{});
  }
  return *cached;
}

Outcome optimal_schedule() {
  const auto rep = schedule_report();
  const auto& f = *rep.total_vs_eps;
  std::string detail = fmt("slope %.3f (95%% CI %.3f..%.3f), FN =", f.slope, f.ci_low, f.ci_high);
  for (const auto& r : rep.rows) detail += fmt(" %.4f+-%.4f", r.fn_total, r.mc_total);
  return {f.slope >= 0.35 && f.slope <= 0.65, detail};
}

Outcome lp_exactness() {
  std::mt19937_64 rng(2024);
  const EnergyMetric unit(Vec::Constant(1, 1.0));
  std::size_t cases = 0, grid_fail = 0, vertex_fail = 0;
  double worst_vertex = 0.0;
  for (std::size_t n = 1; n <= 4; ++n) {
    for (int trial = 0; trial < 40; ++trial) {
      const double spread = trial % 3 == 0 ? 0.2 : 1.0;
      Mat pts(2, static_cast<Eigen::Index>(n));
      Vec a(static_cast<Eigen::Index>(n));
      std::uniform_real_distribution<double> w(-1.0, 1.0);
      for (Eigen::Index i = 0; i < pts.cols(); ++i) {
        pts.col(i) = testing::random_vec(rng, 2, spread);
        a[i] = w(rng);
      }
      const auto nu = DiscreteSignedMeasure::on_z(pts, a, unit);
      const double lp = flat_norm(nu).value;
      const double grid = testing::grid_oracle(nu);
      const double exact = testing::vertex_oracle(nu);
      ++cases;
      if (grid > lp + 1e-9 || lp - grid > 0.1 * nu.tv_norm() + 1e-9) ++grid_fail;
      worst_vertex = std::max(worst_vertex, std::abs(lp - exact));
      if (std::abs(lp - exact) > 1e-9) ++vertex_fail;
    }
  }
  double worst_pair = 0.0;
  std::uniform_real_distribution<double> ell(0.2, 3.0);
  for (int i = 0; i < 100; ++i) {
    const EnergyMetric m(Vec((Vec(2) << 0.5 + 0.1 * i, 1.5).finished()), ell(rng));
    const Vec x = testing::random_vec(rng, 4, 1.5), y = testing::random_vec(rng, 4, 1.5);
    const double v = fn_distance(DiscreteSignedMeasure::on_z(Mat(x), Vec::Ones(1), m),
                                 DiscreteSignedMeasure::on_z(Mat(y), Vec::Ones(1), m));
    worst_pair = std::max(worst_pair, std::abs(v - std::min(2.0, m.norm(x - y) / m.ell)));
  }
  return {grid_fail == 0 && vertex_fail == 0 && worst_pair <= 1e-9,
          fmt("%zu supports: %zu grid-oracle and %zu vertex-oracle mismatches (max |LP - exact| %.1e); "
              "two-point max error %.1e",
              cases, grid_fail, vertex_fail, worst_vertex, worst_pair)};
}

Outcome expectation_engine() {
  const SingleEdge s;
  const auto m = discretize(s.d, Vec::Constant(1, 0.05), 4.0, classical_solution(s.net).state);
  const auto t = discrete_thermal_mass(m, s.e, 40.0);
  const auto sig = expectation_h(QuantityOfInterest::sigma(0), t);
  const auto one = expectation_h(QuantityOfInterest::one(), t);
  const double oracle = expectation_infty(QuantityOfInterest::sigma(0), s.d, s.e).value;
  const double tol = std::max(3.0 * sig.stderr_, 0.05);
  return {std::abs(sig.value - oracle) <= tol && one.value == 1.0,
          fmt("E_h[sigma_1] = %.6f (oracle %.6f, tol %.3f), E_h[1] = %.17g", sig.value, oracle, tol, one.value)};
}

Outcome transversality() {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(DDINFER_FIXTURES)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  bool ok = !files.empty();
  std::size_t violations = 0;
  std::string names;
  for (const auto& f : files) {
    const auto net = load_network(f);
    const SlidingGaussianDensity d(net.coeffs, net.noise);
    const auto e = constraint_subspace(net);
    const auto cert = check_transversality(d.quadratic(), e, 1.0);
    ok &= cert.ok;
    if (!cert.ok) continue;
    violations += verify_certificate(cert, d.quadratic(), e, 10000, 17).violations;
    names += fmt(" %s(c=%.3g,b=%.3g)", f.stem().string().c_str(), cert.c, cert.b);
  }
  const auto e = constraint_subspace(testing::single_edge());
  const auto zero = check_transversality(QuadraticPotential(Mat::Zero(2, 2), Vec::Zero(2), 0.0), e, 1.0);
  return {ok && violations == 0 && !zero.ok,
          fmt("%zu fixtures certified, %zu violations in 1e4 samples each, zero potential %s;", files.size(),
              violations, zero.ok ? "accepted" : "refused") +
              names};
}

Outcome delta_zero() {
  // Z = R^2 with the Euclidean energy norm, material data on the line R a and
  // E = R b; the two lines meet only at 0.
  const EnergyMetric metric(Vec::Constant(1, 1.0));
  const Vec a = (Vec(2) << 1.0, 0.0).finished();
  const Vec b = (Vec(2) << 1.0, 1.0).finished().normalized();
  const auto e = AffineSubspace::from_spanning(metric, Vec::Zero(2), Mat(b));
  const auto schedule = make_schedule({0.1, 0.05, 0.02, 0.01, 0.005}, 2.0);
  std::vector<double> values;
  bool decreasing = true;
  std::string detail = "E_h[|z|] =";
  for (std::size_t h = 0; h < schedule.size(); ++h) {
    const double eps = schedule.eps[h];
    const long k = static_cast<long>(std::ceil(3.0 / eps));
    Mat pts(2, 2 * k + 1);
    for (long i = -k; i <= k; ++i) pts.col(i + k) = static_cast<double>(i) * eps * a;
    const auto m = make_empirical(pts, Vec::Constant(2 * k + 1, eps));
    ExpectationOptions opts;
    opts.n_samples = 40000;
    const auto r = expectation_h(QuantityOfInterest::z_norm(), m, e, schedule.beta[h], opts);
    if (!values.empty()) decreasing &= r.value < values.back();
    values.push_back(r.value);
    detail += fmt(" %.4f", r.value);
  }
  return {decreasing && values.back() < 0.05, detail + fmt(" at beta up to %.0f", schedule.beta.back())};
}

Outcome invariants() {
  std::mt19937_64 rng(99);
  std::vector<std::string> failed;
  auto check = [&](bool cond, const char* name) {
    if (!cond) failed.push_back(name);
  };
  const auto net = testing::random_network(2, 1, 5);
  const auto e = constraint_subspace(net);
  const EnergyMetric& metric = e.metric();
  const SlidingGaussianDensity d(net.coeffs, net.noise);

  double orth = 0.0, pyth = 0.0, cov = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const Vec y = testing::random_vec(rng, e.ambient_dim(), 2.0);
    const Vec z = e.embed(testing::random_vec(rng, e.dim(), 2.0));
    const Vec xi = e.project(y), eta = y - xi, zeta = xi - z;
    for (Eigen::Index j = 0; j < e.dim(); ++j) orth = std::max(orth, std::abs(metric.inner(eta, e.basis().col(j))));
    const double lhs = std::pow(metric.norm(y), 2) + std::pow(metric.norm(z), 2);
    pyth = std::min(pyth, lhs - 0.25 * std::pow(metric.norm(xi), 2));
    cov = std::max({cov, (zeta - e.basis() * e.tangent_coords(zeta)).norm(),
                    std::abs(std::pow(metric.norm(y - z), 2) - std::pow(metric.norm(eta), 2) - std::pow(metric.norm(zeta), 2)) /
                        (1.0 + lhs)});
  }
  check(orth < 1e-10, "projection orthogonality");
  check(pyth >= -1e-12, "Pythagoras bound");
  check(cov < 1e-10, "change of variables");

  const auto net2 = testing::random_network(1, 1, 6);
  const SlidingGaussianDensity d2(net2.coeffs, net2.noise);
  const auto e2 = constraint_subspace(net2);
  const auto coarse = discretize(d2, Vec::Constant(2, 0.4), 0.8, classical_solution(net2).state);
  DiscretizeOptions fine_opts;
  fine_opts.lattice_origin = -0.1;
  const auto fine = discretize(d2, Vec::Constant(2, 0.2), 1.2, classical_solution(net2).state, fine_opts);
  std::map<std::size_t, double> sums;
  for (std::size_t i = 0; i < fine.size(); ++i) {
    if (auto p = coarse.partition->locate(fine.points.col(static_cast<Eigen::Index>(i)))) sums[*p] += fine.weights[static_cast<Eigen::Index>(i)];
  }
  double refine = sums.size() == coarse.size() ? 0.0 : 1.0;
  for (const auto& [p, w] : sums) refine = std::max(refine, rel(w, coarse.weights[static_cast<Eigen::Index>(p)]));
  check(refine < 1e-10, "refinement consistency");
  check(verify_partition_assumptions(coarse, d2, e2, 1000, 2).ok(), "partition assumptions");

  double violation = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    Mat pts(e.ambient_dim(), 300);
    for (Eigen::Index i = 0; i < 300; ++i) pts.col(i) = testing::random_vec(rng, e.ambient_dim());
    Vec w(300);
    for (Eigen::Index i = 0; i < 300; ++i) w[i] = std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
    violation = std::max(violation, flat_norm(DiscreteSignedMeasure::on_z(pts, w, metric)).max_violation);
  }
  check(violation <= 1e-9, "LP witness feasibility");
  check(schedule_report().budget_ok(), "triangle budgets");

  const auto s1 = sample_thermalized(d, e, 20.0, 5000, 3, 1);
  const auto s4 = sample_thermalized(d, e, 20.0, 5000, 3, 4);
  ExpectationOptions o1, o4;
  o4.threads = 4;
  const auto grid = discretize(d, Vec::Constant(3, 0.5), 0.7, classical_solution(net).state);
  const auto t = discrete_thermal_mass(grid, e, 5.0);
  const auto e1 = expectation_h(QuantityOfInterest::gap(), t, o1);
  const auto e4 = expectation_h(QuantityOfInterest::gap(), t, o4);
  FnMeasuresOptions f1, f4;
  f1.k = 300;
  f4.k = 300;
  f4.threads = 3;
  const auto src_a = cloud_source(t);
  const auto src_b = cloud_source(thermalized_moments(d, e, 5.0));
  const auto fn1 = fn_distance_measures(src_a, src_b, metric, f1);
  const auto fn4 = fn_distance_measures(src_a, src_b, metric, f4);
  check(s1.y == s4.y && s1.z == s4.z && e1.value == e4.value && fn1.replicates == fn4.replicates,
        "seed determinism across thread counts");

  std::string detail = failed.empty() ? "all invariants hold" : "failed:";
  for (const auto& f : failed) detail += " [" + f + "]";
  detail += fmt(" (orthogonality %.1e, change of variables %.1e, refinement %.1e, LP violation %.1e)", orth, cov,
                refine, violation);
  return {failed.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"thermalization rate", thermalization_rate},
      {"limit measure identity", limit_identity},
      {"discretization bound", discretization_bound},
      {"optimal schedule", optimal_schedule},
      {"flat-norm LP exactness", lp_exactness},
      {"expectation engine", expectation_engine},
      {"transversality certificate", transversality},
      {"delta_0 sanity case", delta_zero},
      {"determinism and invariants", invariants},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = criteria[i].second();
    } catch (const std::exception& e) {
      out = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s criterion %d (%s): %s [%.1fs]\n", out.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(),
                out.detail.c_str(), secs);
    std::fflush(stdout);
    failures += out.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
