#pragma once

#include "ddinfer/flat_norm.hpp"
#include "ddinfer/network.hpp"

#include <optional>
#include <string>

namespace ddinfer {

enum class ScheduleRule { Optimal, Custom };

/// Coupling of data resolution eps_h to inverse temperature beta_h. The
/// constructors refuse lists along which beta_h eps_h^2 grows past its first
/// value.
struct Schedule {
  std::vector<double> eps;
  std::vector<double> beta;
  ScheduleRule rule = ScheduleRule::Custom;
  double c = 0.0;  // beta = c / eps for the optimal rule

  std::size_t size() const { return eps.size(); }
};

/// beta_h = c / eps_h; eps must be strictly decreasing and positive.
Schedule make_schedule(const std::vector<double>& eps, double c);
Schedule custom_schedule(const std::vector<double>& eps, const std::vector<double>& beta);

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  double slope_stderr = 0.0;
  double ci_low = 0.0;  // 95% interval for the slope
  double ci_high = 0.0;
  std::size_t points = 0;
};

/// Least squares of log y on log x.
RateFit rate_fit(const std::vector<double>& xs, const std::vector<double>& ys);
/// Weighted by 1 / var(log y) with var(log y) ~ (y_err / y)^2; errors below
/// 1e-3 of y are floored there.
RateFit rate_fit(const std::vector<double>& xs, const std::vector<double>& ys, const std::vector<double>& y_errors);

struct StudyOptions {
  std::size_t k = 2000;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  double radius = 4.0;
  double ell = 1.0;
  int threads = 1;
  /// Build mu_{h,beta} clouds from the mu_beta samples (common random
  /// numbers); otherwise sample the thermalized grid independently.
  bool coupled = true;
  std::size_t partition_witnesses = 500;
  FlatNormOptions lp;
};

struct ConvergenceRow {
  double eps_h = 0.0;
  double beta_h = 0.0;
  double fn_therm = 0.0;   // FN(mu_beta, mu_infty)
  double fn_approx = 0.0;  // FN(mu_{h,beta}, mu_beta)
  double fn_total = 0.0;   // FN(mu_{h,beta}, mu_infty)
  double mc_therm = 0.0;
  double mc_approx = 0.0;
  double mc_total = 0.0;
  double tv_beta = 0.0;
  double tv_infty = 0.0;
  double tv_h = 0.0;
  std::size_t atoms = 0;
  bool budget_ok = false;
  std::vector<double> therm_replicates, approx_replicates, total_replicates;
};

struct ConvergenceReport {
  std::vector<ConvergenceRow> rows;
  std::optional<RateFit> total_vs_eps;
  std::optional<RateFit> therm_vs_beta;
  std::optional<RateFit> approx_vs_eps;
  TransversalityCertificate certificate;
  Schedule schedule;
  StudyOptions options;

  bool budget_ok() const;
  std::string to_csv() const;
  std::string to_json() const;
};

/// For each level: grid-discretize at eps_h, thermalize at beta_h, and compute
/// the three flat-norm distances on oracle clouds. The certificate is taken
/// at beta0 = beta_1 / 2.
ConvergenceReport convergence_study(const Network& net, const Schedule& schedule, const StudyOptions& opts = {});

/// FN(mu_beta, mu_infty) on coupled oracle clouds for a list of betas.
ConvergenceReport thermalization_study(const Network& net, const std::vector<double>& betas,
                                       const StudyOptions& opts = {});

struct CauchyOptions {
  std::size_t k = 2000;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  double threshold = 0.1;
  double tight_radius = 5.0;
  int threads = 1;
  FlatNormOptions lp;
};

struct CauchyReport {
  Mat distances;
  Mat mc_errors;
  std::vector<double> successive;
  std::vector<double> tv_masses;
  std::vector<double> outside_fraction;  // thermal mass share with |p| > tight_radius
  bool cauchy = false;
  std::string verdict;
};

/// Pairwise FN distances of a sequence of thermalized data sets. Verdict
/// "Cauchy-consistent" iff successive distances decrease (within twice their
/// MC spread) and the last one is below the threshold.
CauchyReport cauchy_diagnostic(const std::vector<ThermalizedDiscrete>& measures, const CauchyOptions& opts = {});

}  // namespace ddinfer
