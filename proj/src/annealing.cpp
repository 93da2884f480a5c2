#include "ddinfer/annealing.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <json.hpp>

#include <cmath>
#include <sstream>

namespace ddinfer {

namespace {

void check_eps(const std::vector<double>& eps) {
  require(!eps.empty(), ErrorKind::InvalidArgument, "schedule needs at least one eps");
  for (std::size_t i = 0; i < eps.size(); ++i) {
    require(eps[i] > 0.0 && std::isfinite(eps[i]), ErrorKind::InvalidArgument, "schedule eps must be positive");
    if (i > 0) {
      require(eps[i] < eps[i - 1], ErrorKind::InvalidArgument, "schedule eps must be strictly decreasing");
    }
  }
}

void check_bounded(const Schedule& s) {
  const double first = s.beta[0] * s.eps[0] * s.eps[0];
  for (std::size_t i = 1; i < s.size(); ++i) {
    const double v = s.beta[i] * s.eps[i] * s.eps[i];
    if (v > first * (1.0 + 1e-9)) {
      throw Error(ErrorKind::InvalidArgument,
                  "schedule violates the boundedness of beta*eps^2: " + format_double(v) + " at eps = " +
                      format_double(s.eps[i]) + " exceeds the coarsest value " + format_double(first));
    }
  }
}

RateFit fit_impl(const std::vector<double>& xs, const std::vector<double>& ys, const std::vector<double>& w) {
  require(xs.size() == ys.size() && xs.size() == w.size(), ErrorKind::DimensionMismatch,
          "rate_fit: xs and ys differ in length");
  require(xs.size() >= 3, ErrorKind::InvalidArgument, "rate_fit: need at least 3 points");
  const std::size_t n = xs.size();
  std::vector<double> lx(n), ly(n);
  for (std::size_t i = 0; i < n; ++i) {
    require(xs[i] > 0.0 && ys[i] > 0.0 && std::isfinite(xs[i]) && std::isfinite(ys[i]), ErrorKind::InvalidArgument,
            "rate_fit: values must be positive and finite");
    lx[i] = std::log(xs[i]);
    ly[i] = std::log(ys[i]);
  }
  double sw = 0.0, mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sw += w[i];
    mx += w[i] * lx[i];
    my += w[i] * ly[i];
  }
  mx /= sw;
  my /= sw;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += w[i] * (lx[i] - mx) * (lx[i] - mx);
    sxy += w[i] * (lx[i] - mx) * (ly[i] - my);
    syy += w[i] * (ly[i] - my) * (ly[i] - my);
  }
  require(sxx > 0.0, ErrorKind::InvalidArgument, "rate_fit: xs must not all be equal");
  RateFit f;
  f.points = n;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = ly[i] - (f.intercept + f.slope * lx[i]);
    sse += w[i] * r * r;
  }
  f.r_squared = syy > 0.0 ? 1.0 - sse / syy : 1.0;
  const double dof = static_cast<double>(n - 2);
  f.slope_stderr = std::sqrt(sse / dof / sxx);
  const boost::math::students_t t(dof);
  const double q = boost::math::quantile(t, 0.975);
  f.ci_low = f.slope - q * f.slope_stderr;
  f.ci_high = f.slope + q * f.slope_stderr;
  return f;
}

struct Replicate {
  double therm = 0.0;
  double approx = 0.0;
  double total = 0.0;
};

double mean_of(const std::vector<double>& v) { return pairwise_sum(v) / static_cast<double>(v.size()); }

double spread_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

nlohmann::json fit_json(const std::optional<RateFit>& f) {
  if (!f) return nullptr;
  return {{"slope", f->slope},         {"intercept", f->intercept}, {"r_squared", f->r_squared},
          {"slope_stderr", f->slope_stderr}, {"ci95", {f->ci_low, f->ci_high}}, {"points", f->points}};
}

struct StudySetup {
  SlidingGaussianDensity density;
  AffineSubspace subspace;
  PhaseVector center;
};

StudySetup setup(const Network& net, double ell) {
  StudySetup s{SlidingGaussianDensity(net.coeffs, net.noise), constraint_subspace(net, ell), classical_solution(net).state};
  return s;
}

}  // namespace

Schedule make_schedule(const std::vector<double>& eps, double c) {
  check_eps(eps);
  require(c > 0.0 && std::isfinite(c), ErrorKind::InvalidArgument, "schedule constant c must be positive");
  Schedule s;
  s.eps = eps;
  s.rule = ScheduleRule::Optimal;
  s.c = c;
  for (double e : eps) s.beta.push_back(c / e);
  check_bounded(s);
  return s;
}

Schedule custom_schedule(const std::vector<double>& eps, const std::vector<double>& beta) {
  check_eps(eps);
  require(beta.size() == eps.size(), ErrorKind::DimensionMismatch, "schedule eps and beta lists differ in length");
  for (double b : beta) require(b > 0.0 && std::isfinite(b), ErrorKind::InvalidArgument, "schedule beta must be positive");
  Schedule s;
  s.eps = eps;
  s.beta = beta;
  s.rule = ScheduleRule::Custom;
  check_bounded(s);
  return s;
}

RateFit rate_fit(const std::vector<double>& xs, const std::vector<double>& ys) {
  return fit_impl(xs, ys, std::vector<double>(xs.size(), 1.0));
}

RateFit rate_fit(const std::vector<double>& xs, const std::vector<double>& ys, const std::vector<double>& y_errors) {
  require(y_errors.size() == ys.size(), ErrorKind::DimensionMismatch, "rate_fit: error list length differs");
  std::vector<double> w(ys.size());
  for (std::size_t i = 0; i < ys.size(); ++i) {
    require(ys[i] > 0.0, ErrorKind::InvalidArgument, "rate_fit: values must be positive");
    const double rel = std::max(std::abs(y_errors[i]) / ys[i], 1e-3);
    w[i] = 1.0 / (rel * rel);
  }
  return fit_impl(xs, ys, w);
}

bool ConvergenceReport::budget_ok() const {
  return std::all_of(rows.begin(), rows.end(), [](const ConvergenceRow& r) { return r.budget_ok; });
}

std::string ConvergenceReport::to_csv() const {
  std::ostringstream out;
  out << "eps_h,beta_h,fn_therm,mc_therm,fn_approx,mc_approx,fn_total,mc_total,tv_beta,tv_infty,tv_h,atoms,budget_ok\n";
  for (const ConvergenceRow& r : rows) {
    out << format_double(r.eps_h) << ',' << format_double(r.beta_h) << ',' << format_double(r.fn_therm) << ','
        << format_double(r.mc_therm) << ',' << format_double(r.fn_approx) << ',' << format_double(r.mc_approx)
        << ',' << format_double(r.fn_total) << ',' << format_double(r.mc_total) << ',' << format_double(r.tv_beta)
        << ',' << format_double(r.tv_infty) << ',' << format_double(r.tv_h) << ',' << r.atoms << ','
        << (r.budget_ok ? 1 : 0) << '\n';
  }
  return out.str();
}

std::string ConvergenceReport::to_json() const {
  nlohmann::json rows_json = nlohmann::json::array();
  for (const ConvergenceRow& r : rows) {
    rows_json.push_back({{"eps_h", r.eps_h},
                         {"beta_h", r.beta_h},
                         {"fn_therm", r.fn_therm},
                         {"fn_approx", r.fn_approx},
                         {"fn_total", r.fn_total},
                         {"mc_therm", r.mc_therm},
                         {"mc_approx", r.mc_approx},
                         {"mc_total", r.mc_total},
                         {"tv_beta", r.tv_beta},
                         {"tv_infty", r.tv_infty},
                         {"tv_h", r.tv_h},
                         {"atoms", r.atoms},
                         {"budget_ok", r.budget_ok},
                         {"replicates",
                          {{"therm", r.therm_replicates}, {"approx", r.approx_replicates}, {"total", r.total_replicates}}}});
  }
  nlohmann::json j;
  j["rows"] = rows_json;
  j["fits"] = {{"total_vs_eps", fit_json(total_vs_eps)},
               {"therm_vs_beta", fit_json(therm_vs_beta)},
               {"approx_vs_eps", fit_json(approx_vs_eps)}};
  j["certificate"] = {{"ok", certificate.ok}, {"beta0", certificate.beta0}, {"c", certificate.c}, {"b", certificate.b}};
  j["schedule"] = {{"rule", schedule.rule == ScheduleRule::Optimal ? "optimal" : "custom"},
                   {"c", schedule.c},
                   {"eps", schedule.eps},
                   {"beta", schedule.beta}};
  j["options"] = {{"k", options.k},         {"seeds", options.seeds},   {"radius", options.radius},
                  {"ell", options.ell},     {"coupled", options.coupled}, {"neighbors", options.lp.neighbors}};
  j["budget_ok"] = budget_ok();
  return j.dump(2);
}

ConvergenceReport convergence_study(const Network& net, const Schedule& schedule, const StudyOptions& opts) {
  require(schedule.size() >= 1, ErrorKind::InvalidArgument, "convergence_study: empty schedule");
  require(!opts.seeds.empty(), ErrorKind::InvalidArgument, "convergence_study: need at least one seed");
  const StudySetup st = setup(net, opts.ell);
  ConvergenceReport rep;
  rep.schedule = schedule;
  rep.options = opts;
  rep.certificate = check_transversality(st.density.quadratic(), st.subspace, 0.5 * schedule.beta.front());
  if (!rep.certificate.ok) {
    throw Error(ErrorKind::NotFinite, "convergence_study: no transversality certificate: " + rep.certificate.message);
  }
  const LimitMoments lim = limit_moments(st.density, st.subspace);
  const EnergyMetric metric = net.metric(opts.ell);
  const std::size_t levels = schedule.size();
  const std::size_t seeds = opts.seeds.size();

  std::vector<EmpiricalMeasure> grids(levels);
  std::vector<ThermalMoments> moments(levels);
  std::vector<double> tv_h(levels);
  for (std::size_t h = 0; h < levels; ++h) {
    const Vec eps = Vec::Constant(net.n_edges, schedule.eps[h]);
    grids[h] = discretize(st.density, eps, opts.radius, st.center);
    const PartitionReport pr =
        verify_partition_assumptions(grids[h], st.density, st.subspace, opts.partition_witnesses, 1);
    if (!pr.ok()) {
      throw Error(ErrorKind::Numerical, "partition assumptions fail at eps = " + format_double(schedule.eps[h]) +
                                            ": second-moment ratio " + format_double(pr.max_second_moment_ratio) +
                                            ", c* ratio " + format_double(pr.max_cstar_ratio) + ", delta " +
                                            format_double(pr.delta_h));
    }
    moments[h] = thermalized_moments(st.density, st.subspace, schedule.beta[h]);
    tv_h[h] = discrete_thermal_mass(grids[h], st.subspace, schedule.beta[h]).total_mass();
  }

  std::vector<Replicate> reps(levels * seeds);
  parallel_for(levels * seeds, opts.threads, [&](std::size_t job) {
    const std::size_t h = job / seeds;
    const std::uint64_t seed = opts.seeds[job % seeds];
    const PairCloud thermal = sample_thermalized(moments[h], opts.k, seed);
    const PairCloud limit = sample_limit(lim, st.subspace, opts.k, seed);
    WeightedPairCloud discrete;
    if (opts.coupled) {
      discrete = coupled_discrete_cloud(grids[h], st.subspace, schedule.beta[h], thermal);
    } else {
      discrete = sample_signed_cloud(discrete_thermal_mass(grids[h], st.subspace, schedule.beta[h]), opts.k, seed);
    }
    const auto mu_beta = DiscreteSignedMeasure::on_pairs(thermal, metric);
    const auto mu_inf = DiscreteSignedMeasure::on_pairs(limit, metric);
    const auto mu_h = DiscreteSignedMeasure::on_pairs(discrete, metric);
    Replicate& r = reps[job];
    r.therm = fn_distance(mu_beta, mu_inf, opts.lp);
    r.approx = fn_distance(mu_h, mu_beta, opts.lp);
    r.total = fn_distance(mu_h, mu_inf, opts.lp);
  });

  for (std::size_t h = 0; h < levels; ++h) {
    ConvergenceRow row;
    row.eps_h = schedule.eps[h];
    row.beta_h = schedule.beta[h];
    for (std::size_t s = 0; s < seeds; ++s) {
      const Replicate& r = reps[h * seeds + s];
      row.therm_replicates.push_back(r.therm);
      row.approx_replicates.push_back(r.approx);
      row.total_replicates.push_back(r.total);
    }
    row.fn_therm = mean_of(row.therm_replicates);
    row.fn_approx = mean_of(row.approx_replicates);
    row.fn_total = mean_of(row.total_replicates);
    row.mc_therm = spread_of(row.therm_replicates);
    row.mc_approx = spread_of(row.approx_replicates);
    row.mc_total = spread_of(row.total_replicates);
    row.tv_beta = moments[h].tv_mass;
    row.tv_infty = lim.tv_mass;
    row.tv_h = tv_h[h];
    row.atoms = grids[h].size();
    row.budget_ok = row.fn_total <= row.fn_therm + row.fn_approx + 3.0 * (row.mc_therm + row.mc_approx + row.mc_total) + 1e-9;
    rep.rows.push_back(std::move(row));
  }
  if (levels >= 3) {
    std::vector<double> eps, betas, total, total_err, therm, approx;
    for (const ConvergenceRow& r : rep.rows) {
      eps.push_back(r.eps_h);
      betas.push_back(r.beta_h);
      total.push_back(r.fn_total);
      total_err.push_back(r.mc_total);
      therm.push_back(r.fn_therm);
      approx.push_back(r.fn_approx);
    }
    rep.total_vs_eps = rate_fit(eps, total, total_err);
    if (std::all_of(therm.begin(), therm.end(), [](double v) { return v > 0.0; }) &&
        betas.front() != betas.back()) {
      rep.therm_vs_beta = rate_fit(betas, therm);
    }
    if (std::all_of(approx.begin(), approx.end(), [](double v) { return v > 0.0; })) {
      rep.approx_vs_eps = rate_fit(eps, approx);
    }
  }
  return rep;
}

ConvergenceReport thermalization_study(const Network& net, const std::vector<double>& betas, const StudyOptions& opts) {
  require(!betas.empty(), ErrorKind::InvalidArgument, "thermalization_study: need at least one beta");
  require(!opts.seeds.empty(), ErrorKind::InvalidArgument, "thermalization_study: need at least one seed");
  const StudySetup st = setup(net, opts.ell);
  ConvergenceReport rep;
  rep.options = opts;
  rep.schedule.beta = betas;
  rep.certificate = check_transversality(st.density.quadratic(), st.subspace,
                                         0.5 * *std::min_element(betas.begin(), betas.end()));
  if (!rep.certificate.ok) {
    throw Error(ErrorKind::NotFinite, "thermalization_study: no transversality certificate: " + rep.certificate.message);
  }
  const LimitMoments lim = limit_moments(st.density, st.subspace);
  const EnergyMetric metric = net.metric(opts.ell);
  const std::size_t seeds = opts.seeds.size();
  std::vector<ThermalMoments> moments(betas.size());
  for (std::size_t h = 0; h < betas.size(); ++h) moments[h] = thermalized_moments(st.density, st.subspace, betas[h]);
  std::vector<double> vals(betas.size() * seeds);
  parallel_for(vals.size(), opts.threads, [&](std::size_t job) {
    const std::size_t h = job / seeds;
    const std::uint64_t seed = opts.seeds[job % seeds];
    vals[job] = fn_distance(DiscreteSignedMeasure::on_pairs(sample_thermalized(moments[h], opts.k, seed), metric),
                            DiscreteSignedMeasure::on_pairs(sample_limit(lim, st.subspace, opts.k, seed), metric),
                            opts.lp);
  });
  std::vector<double> therm;
  for (std::size_t h = 0; h < betas.size(); ++h) {
    ConvergenceRow row;
    row.beta_h = betas[h];
    row.therm_replicates.assign(vals.begin() + static_cast<long>(h * seeds), vals.begin() + static_cast<long>((h + 1) * seeds));
    row.fn_therm = mean_of(row.therm_replicates);
    row.mc_therm = spread_of(row.therm_replicates);
    row.tv_beta = moments[h].tv_mass;
    row.tv_infty = lim.tv_mass;
    row.budget_ok = true;
    therm.push_back(row.fn_therm);
    rep.rows.push_back(std::move(row));
  }
  if (betas.size() >= 3 && std::all_of(therm.begin(), therm.end(), [](double v) { return v > 0.0; })) {
    rep.therm_vs_beta = rate_fit(betas, therm);
  }
  return rep;
}

CauchyReport cauchy_diagnostic(const std::vector<ThermalizedDiscrete>& measures, const CauchyOptions& opts) {
  require(measures.size() >= 2, ErrorKind::InvalidArgument, "cauchy_diagnostic needs at least two measures");
  const std::size_t m = measures.size();
  const EnergyMetric& metric = measures.front().subspace.metric();
  for (const auto& t : measures) {
    check_same_edges(t.subspace.ambient_dim(), measures.front().subspace.ambient_dim(), "cauchy_diagnostic");
  }
  CauchyReport rep;
  rep.distances = Mat::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  rep.mc_errors = Mat::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) pairs.emplace_back(i, j);
  }
  FnMeasuresOptions fo;
  fo.k = opts.k;
  fo.seeds = opts.seeds;
  fo.lp = opts.lp;
  std::vector<FnMeasuresResult> results(pairs.size());
  parallel_for(pairs.size(), opts.threads, [&](std::size_t p) {
    const auto [i, j] = pairs[p];
    results[p] = fn_distance_measures(cloud_source(measures[i]), cloud_source(measures[j]), metric, fo);
  });
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto i = static_cast<Eigen::Index>(pairs[p].first);
    const auto j = static_cast<Eigen::Index>(pairs[p].second);
    rep.distances(i, j) = rep.distances(j, i) = results[p].value;
    rep.mc_errors(i, j) = rep.mc_errors(j, i) = results[p].mc_error;
  }
  bool decreasing = true;
  for (std::size_t i = 0; i + 1 < m; ++i) {
    rep.successive.push_back(rep.distances(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i + 1)));
    if (i > 0) {
      const double slack = 2.0 * (rep.mc_errors(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i + 1)) +
                                  rep.mc_errors(static_cast<Eigen::Index>(i - 1), static_cast<Eigen::Index>(i)));
      if (rep.successive[i] > rep.successive[i - 1] + slack) decreasing = false;
    }
  }
  for (const auto& t : measures) {
    rep.tv_masses.push_back(t.total_mass());
    const Vec prob = t.probabilities();
    double outside = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (metric.norm(Vec(t.points.col(static_cast<Eigen::Index>(i)))) > opts.tight_radius) {
        outside += prob[static_cast<Eigen::Index>(i)];
      }
    }
    rep.outside_fraction.push_back(outside);
  }
  rep.cauchy = decreasing && rep.successive.back() < opts.threshold;
  rep.verdict = rep.cauchy ? "Cauchy-consistent" : "not Cauchy-consistent";
  return rep;
}

}  // namespace ddinfer
