// ddinfer: command-line front end.
//
// Every run writes a provenance record (argv, working directory, resolved
// configuration, seeds, library versions and SHA-256 digests of stdout and of
// every output file). `ddinfer replay <record>` re-runs it and checks the
// digests.

#include "ddinfer/annealing.hpp"
#include "ddinfer/io.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <toml.hpp>

#include <openssl/evp.h>

#include <boost/version.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#ifndef DDINFER_VERSION
#define DDINFER_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace ddinfer;

namespace {

enum Exit { kOk = 0, kValidation = 1, kUsage = 2, kNumerical = 3 };

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NonDegeneracy:
    case ErrorKind::SubspaceDimension:
      return kValidation;
    case ErrorKind::NotFinite:
    case ErrorKind::Numerical:
      return kNumerical;
    default:
      return kUsage;
  }
}

std::string sha256(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr);
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", md[i]);
    hex += buf;
  }
  return hex;
}

std::string list(const Vec& v) {
  std::string s = "[";
  for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? ", " : "") + format_double(v[i]);
  return s + "]";
}

std::string list(const std::vector<double>& v) {
  return list(Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())));
}

struct Options {
  std::string network;
  std::string dataset;
  std::string dataset_b;
  std::string out;
  std::string record;
  std::string recipe;
  std::string qoi = "one";
  std::string study = "schedule";
  std::vector<double> eps;
  std::vector<double> beta;
  double schedule_c = 2.0;
  double beta0 = 1.0;
  double radius = -1.0;
  double ell = 1.0;
  double lattice_origin = 0.0;
  std::size_t n = 1000;
  std::size_t mc_samples = 0;
  std::size_t max_points = 10'000'000;
  std::size_t bootstrap = 0;
  std::size_t witnesses = 500;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::uint64_t seed = 1;
  int threads = 1;
};

/// What a command produced, for the provenance record.
struct Run {
  std::ostringstream out;
  std::vector<fs::path> outputs;
  json config = json::object();
  std::vector<std::string> warnings;

  void warn(const std::string& w) {
    warnings.push_back(w);
    std::cerr << "warning: " << w << "\n";
  }
  void write(const fs::path& p, const std::string& text) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    write_text(p, text);
    outputs.push_back(p);
  }
};

struct Loaded {
  Network net;
  SlidingGaussianDensity d;
  AffineSubspace e;
};

Loaded load(const Options& o) {
  require(!o.network.empty(), ErrorKind::InvalidArgument, "a network file is required (--network)");
  Network net = load_network(o.network);
  SlidingGaussianDensity d(net.coeffs, net.noise);
  AffineSubspace e = constraint_subspace(net, o.ell);
  return {std::move(net), std::move(d), std::move(e)};
}

double resolve_radius(const Options& o, const Loaded& l, Run& run) {
  if (o.radius >= 0.0) return o.radius;
  const auto cert = check_transversality(l.d.quadratic(), l.e, o.beta0);
  require(cert.ok, ErrorKind::NonDegeneracy, "no transversality certificate at beta0 = " + format_double(o.beta0) +
                                                 " to derive a default radius; pass --radius");
  const double r = default_truncation_radius(cert);
  run.out << "radius=" << format_double(r) << " (default from the certificate, c=" << format_double(cert.c) << ")\n";
  return r;
}

std::string strip_extension(const std::string& out) {
  fs::path p(out);
  if (p.extension() == ".csv" || p.extension() == ".json") p.replace_extension();
  return p.string();
}

// ---------------------------------------------------------------- commands

int cmd_validate(const Options& o, Run& run) {
  Network net = load_network(o.network);
  auto& out = run.out;
  out << "edges=" << net.n_edges << " free_nodes=" << net.n_free_nodes << "\n";
  out << "B=\n";
  for (Eigen::Index r = 0; r < net.incidence.rows(); ++r) out << "  " << list(Vec(net.incidence.row(r).transpose())) << "\n";
  out << "C=" << list(net.coeffs) << " s=" << list(net.noise) << " g=" << list(net.applied) << " f=" << list(net.sources)
      << "\n";
  const auto nd = check_nondegeneracy(net);
  out << "lambda_min=" << format_double(nd.lambda_min) << " lambda_max=" << format_double(nd.lambda_max) << "\n";
  out << "nondegenerate=" << (nd.ok ? "true" : "false") << "\n";
  run.config["nondegenerate"] = nd.ok;
  if (!nd.ok) {
    std::cerr << "error: B^T C B is not positive definite (lambda_min = " << format_double(nd.lambda_min) << ")\n";
    return kValidation;
  }
  const AffineSubspace e = constraint_subspace(net, o.ell);
  out << "dim_E=" << e.dim() << " (N=" << net.n_edges << ")\n";
  const auto sol = classical_solution(net);
  out << "u=" << list(sol.potentials) << "\n";
  out << "eps=" << list(sol.state.eps) << "\n";
  out << "sigma=" << list(sol.state.sigma) << "\n";
  const SlidingGaussianDensity d(net.coeffs, net.noise);
  const auto cert = check_transversality(d.quadratic(), e, o.beta0);
  if (!cert.ok) {
    out << "certificate=none at beta0=" << format_double(o.beta0) << ": " << cert.message << "\n";
    return kValidation;
  }
  const auto chk = verify_certificate(cert, d.quadratic(), e, 10000, o.seed);
  out << "certificate: beta0=" << format_double(cert.beta0) << " c=" << format_double(cert.c)
      << " b=" << format_double(cert.b) << " verified_samples=" << chk.samples << " violations=" << chk.violations
      << "\n";
  run.config["certificate"] = {{"beta0", cert.beta0}, {"c", cert.c}, {"b", cert.b}};
  return chk.violations == 0 ? kOk : kValidation;
}

int cmd_discretize(const Options& o, Run& run) {
  const Loaded l = load(o);
  require(!o.out.empty(), ErrorKind::InvalidArgument, "--out is required");
  require(o.eps.size() == 1 || o.eps.size() == static_cast<std::size_t>(l.net.n_edges), ErrorKind::InvalidArgument,
          "--eps takes one value or one per edge");
  Vec eps(l.net.n_edges);
  for (Eigen::Index i = 0; i < eps.size(); ++i) eps[i] = o.eps.size() == 1 ? o.eps[0] : o.eps[static_cast<std::size_t>(i)];
  const double radius = resolve_radius(o, l, run);
  DiscretizeOptions dopt;
  dopt.max_points = o.max_points;
  dopt.lattice_origin = o.lattice_origin;
  const auto m = discretize(l.d, eps, radius, classical_solution(l.net).state, dopt);
  const auto rep = verify_partition_assumptions(m, l.d, l.e, o.witnesses, o.seed);
  write_dataset(o.out, m, "ddinfer discretize");
  run.outputs.push_back(o.out);
  run.outputs.push_back(meta_path(o.out));
  run.out << "atoms=" << m.size() << " total_mass=" << format_double(m.total_weight())
          << " eps_h=" << format_double(m.meta->eps_h) << " radius=" << format_double(radius) << "\n";
  run.out << "partition_ok=" << (rep.ok() ? "true" : "false") << " delta_h=" << format_double(rep.delta_h)
          << " c_star=" << format_double(rep.c_star) << " max_second_moment_ratio="
          << format_double(rep.max_second_moment_ratio) << "\n";
  run.config["radius"] = radius;
  return rep.ok() ? kOk : kValidation;
}

int cmd_sample(const Options& o, Run& run) {
  const Loaded l = load(o);
  require(!o.out.empty(), ErrorKind::InvalidArgument, "--out is required");
  const double radius = resolve_radius(o, l, run);
  const auto m = sample_empirical(l.d, l.e, radius, o.n, o.seed);
  write_dataset(o.out, m, "ddinfer sample");
  run.outputs.push_back(o.out);
  run.outputs.push_back(meta_path(o.out));
  run.out << "atoms=" << m.size() << " total_mass=" << format_double(m.total_weight())
          << " radius=" << format_double(radius) << " seed=" << o.seed << "\n";
  run.config["radius"] = radius;
  return kOk;
}

int cmd_expect(const Options& o, Run& run) {
  const Loaded l = load(o);
  require(o.beta.size() == 1, ErrorKind::InvalidArgument, "expect takes exactly one --beta");
  const auto f = parse_qoi(o.qoi);
  if (!f.bounded()) run.warn("qoi '" + o.qoi + "' is unbounded; the value relies on the Gaussian tails of the measure");
  const auto m = read_dataset(o.dataset);
  ExpectationOptions opts;
  opts.n_samples = o.mc_samples ? o.mc_samples : 20000;
  opts.seed = o.seed;
  opts.threads = o.threads;
  opts.bootstrap = o.bootstrap;
  const auto t = discrete_thermal_mass(m, l.e, o.beta[0], o.threads);
  const auto r = expectation_h(f, t, opts);
  run.out << format_double(r.value) << " +- " << format_double(r.stderr_) << "\n";
  json res = {{"qoi", o.qoi},
              {"beta", o.beta[0]},
              {"value", r.value},
              {"stderr", r.stderr_},
              {"closed_form", r.closed_form},
              {"samples", r.samples},
              {"bounded", r.bounded},
              {"tv_mass", t.total_mass()},
              {"log_tv_mass", t.log_total},
              {"dropped_atoms", t.dropped},
              {"dropped_mass_bound", t.dropped_mass_bound}};
  run.config["result"] = res;
  if (!o.out.empty()) run.write(o.out, res.dump(2) + "\n");
  return kOk;
}

StudyOptions study_options(const Options& o, std::size_t default_k) {
  StudyOptions s;
  s.k = o.mc_samples ? o.mc_samples : default_k;
  s.seeds = o.seeds;
  s.radius = o.radius >= 0.0 ? o.radius : 4.0;
  s.ell = o.ell;
  s.threads = o.threads;
  s.partition_witnesses = o.witnesses;
  return s;
}

void print_report(const ConvergenceReport& rep, std::ostream& out) {
  out << "eps_h,beta_h,fn_therm,mc_therm,fn_approx,mc_approx,fn_total,mc_total,tv_h,atoms,budget_ok\n";
  for (const auto& r : rep.rows) {
    out << format_double(r.eps_h) << "," << format_double(r.beta_h) << "," << format_double(r.fn_therm) << ","
        << format_double(r.mc_therm) << "," << format_double(r.fn_approx) << "," << format_double(r.mc_approx) << ","
        << format_double(r.fn_total) << "," << format_double(r.mc_total) << "," << format_double(r.tv_h) << ","
        << r.atoms << "," << (r.budget_ok ? "true" : "false") << "\n";
  }
  auto fit = [&](const char* name, const std::optional<RateFit>& f) {
    if (f) {
      out << name << ": slope=" << format_double(f->slope) << " ci=[" << format_double(f->ci_low) << ", "
          << format_double(f->ci_high) << "] r2=" << format_double(f->r_squared) << "\n";
    }
  };
  fit("fit fn_therm vs beta", rep.therm_vs_beta);
  fit("fit fn_approx vs eps", rep.approx_vs_eps);
  fit("fit fn_total vs eps", rep.total_vs_eps);
}

void emit(const ConvergenceReport& rep, const std::string& prefix, Run& run) {
  print_report(rep, run.out);
  if (prefix.empty()) return;
  run.write(prefix + ".csv", rep.to_csv());
  run.write(prefix + ".json", rep.to_json());
}

int run_recipe(const Options& o, Run& run) {
  toml::table tbl;
  try {
    tbl = toml::parse_file(o.recipe);
  } catch (const toml::parse_error& err) {
    std::ostringstream msg;
    msg << "recipe " << o.recipe << ": " << err.description() << " at line " << err.source().begin.line << ", column "
        << err.source().begin.column;
    throw Error(ErrorKind::Parse, msg.str());
  }
  const fs::path base = fs::path(o.recipe).parent_path();
  Options r = o;
  if (auto net = tbl["network"].value<std::string>()) r.network = (base / *net).lexically_normal().string();
  if (!o.mc_samples) r.mc_samples = tbl["k"].value_or<std::size_t>(2000);
  if (auto seeds = tbl["seeds"].as_array()) {
    r.seeds.clear();
    for (const auto& s : *seeds) r.seeds.push_back(static_cast<std::uint64_t>(s.value_or<std::int64_t>(1)));
  }
  if (o.radius < 0.0) r.radius = tbl["radius"].value_or(4.0);
  const Network net = load_network(r.network);
  const std::string prefix = o.out.empty() ? std::string() : strip_extension(o.out);
  auto doubles = [](const toml::node_view<toml::node>& v) {
    std::vector<double> out;
    if (auto arr = v.as_array())
      for (const auto& x : *arr) out.push_back(x.value_or(0.0));
    return out;
  };
  run.config["recipe"] = {{"network", r.network}, {"k", r.mc_samples}, {"seeds", r.seeds}, {"radius", r.radius}};
  const StudyOptions so = study_options(r, 2000);

  if (tbl.contains("thermalization")) {
    const auto betas = doubles(tbl["thermalization"]["betas"]);
    run.out << "# thermalization: FN(mu_beta, mu_infty), beta = " << list(betas) << "\n";
    const auto rep = thermalization_study(net, betas, so);
    emit(rep, prefix.empty() ? prefix : prefix + "-thermalization", run);
    double logc = 0.0, worst = 0.0;
    std::vector<double> c;
    for (const auto& row : rep.rows) {
      c.push_back(row.fn_therm * std::sqrt(row.beta_h));
      logc += std::log(c.back());
    }
    const double fitted = std::exp(logc / static_cast<double>(c.size()));
    for (double ci : c) worst = std::max(worst, std::abs(ci / fitted - 1.0));
    run.out << "C1=" << format_double(fitted) << " (FN * beta^(1/2)), max deviation " << format_double(worst) << "\n\n";
  }
  if (tbl.contains("discretization")) {
    const auto eps = doubles(tbl["discretization"]["eps"]);
    const double beta = tbl["discretization"]["beta"].value_or(16.0);
    run.out << "# discretization: FN(mu_h_beta, mu_beta), beta = " << format_double(beta) << "\n";
    const auto rep = convergence_study(net, custom_schedule(eps, std::vector<double>(eps.size(), beta)), so);
    emit(rep, prefix.empty() ? prefix : prefix + "-discretization", run);
    run.out << "C (FN / (beta^(1/2) eps)) =";
    for (const auto& row : rep.rows) run.out << " " << format_double(row.fn_approx / (std::sqrt(beta) * row.eps_h));
    run.out << "\n\n";
  }
  if (tbl.contains("schedule")) {
    const auto eps = doubles(tbl["schedule"]["eps"]);
    const double c = tbl["schedule"]["c"].value_or(2.0);
    run.out << "# optimal schedule: FN(mu_h_beta_h, mu_infty), beta_h = " << format_double(c) << " / eps_h\n";
    const auto rep = convergence_study(net, make_schedule(eps, c), so);
    emit(rep, prefix.empty() ? prefix : prefix + "-schedule", run);
    run.out << "\n";
  }
  return kOk;
}

int cmd_converge(const Options& o, Run& run) {
  if (!o.recipe.empty()) return run_recipe(o, run);
  const Loaded l = load(o);
  const StudyOptions so = study_options(o, 2000);
  const std::string prefix = o.out.empty() ? std::string() : strip_extension(o.out);
  if (o.study == "thermalization") {
    require(!o.beta.empty(), ErrorKind::InvalidArgument, "thermalization study needs --beta values");
    emit(thermalization_study(l.net, o.beta, so), prefix, run);
    return kOk;
  }
  require(o.study == "schedule", ErrorKind::InvalidArgument, "--study must be 'schedule' or 'thermalization'");
  require(!o.eps.empty(), ErrorKind::InvalidArgument, "converge needs --eps values");
  const Schedule s = o.beta.empty() ? make_schedule(o.eps, o.schedule_c) : custom_schedule(o.eps, o.beta);
  const auto rep = convergence_study(l.net, s, so);
  emit(rep, prefix, run);
  run.out << "certificate: beta0=" << format_double(rep.certificate.beta0) << " c=" << format_double(rep.certificate.c)
          << " b=" << format_double(rep.certificate.b) << "\n";
  return rep.budget_ok() ? kOk : kValidation;
}

int cmd_flatnorm(const Options& o, Run& run) {
  const Loaded l = load(o);
  const auto a = read_dataset(o.dataset);
  const auto b = read_dataset(o.dataset_b);
  FnMeasuresOptions fo;
  fo.k = o.mc_samples ? o.mc_samples : 2000;
  fo.seeds = o.seeds;
  fo.threads = o.threads;
  FnMeasuresResult r;
  std::string mode;
  if (!o.beta.empty()) {
    require(o.beta.size() == 1, ErrorKind::InvalidArgument, "flatnorm takes at most one --beta");
    mode = "thermalized";
    const auto ta = discrete_thermal_mass(a, l.e, o.beta[0], o.threads);
    const auto tb = discrete_thermal_mass(b, l.e, o.beta[0], o.threads);
    r = fn_distance_measures(cloud_source(ta), cloud_source(tb), l.e.metric(), fo);
  } else {
    // Measures on Z seen as pairs (y, 0): the pair distance is then |y - y'|.
    auto as_pairs = [](const EmpiricalMeasure& m) {
      WeightedPairCloud c;
      c.y = m.points;
      c.z = Mat::Zero(m.points.rows(), m.points.cols());
      c.weights = m.weights;
      return c;
    };
    const auto da = DiscreteSignedMeasure::on_z(a.points, a.weights, l.e.metric());
    const auto db = DiscreteSignedMeasure::on_z(b.points, b.weights, l.e.metric());
    const auto diff = difference(da, db);
    if (diff.size() <= fo.cap) {
      mode = "exact";
      r.value = flat_norm(diff, fo.lp).value;
      r.replicates = {r.value};
    } else {
      mode = "subsampled";
      const auto pa = as_pairs(a), pb = as_pairs(b);
      const CloudSource sa = [pa](std::size_t k, std::uint64_t seed) { return subsample(pa, k, seed); };
      const CloudSource sb = [pb](std::size_t k, std::uint64_t seed) { return subsample(pb, k, seed); };
      r = fn_distance_measures(sa, sb, l.e.metric(), fo);
      r.subsampled = true;
    }
  }
  run.out << format_double(r.value) << " +- " << format_double(r.mc_error) << " (" << mode << ")\n";
  json res = {{"value", r.value}, {"mc_error", r.mc_error}, {"replicates", r.replicates}, {"mode", mode},
              {"subsampled", r.subsampled}};
  if (!o.beta.empty()) res["beta"] = o.beta[0];
  run.config["result"] = res;
  if (!o.out.empty()) run.write(o.out, res.dump(2) + "\n");
  return kOk;
}

// ---------------------------------------------------------------- driver

struct App {
  CLI::App app{"ddinfer: data-driven inference on transportation networks"};
  Options o;
  std::string replay_record;
  std::map<std::string, CLI::App*> subs;

  App() {
    app.require_subcommand(1);
    app.set_version_flag("--version", DDINFER_VERSION);
    auto common = [&](CLI::App* s) {
      s->add_option("--threads", o.threads, "worker threads")->check(CLI::PositiveNumber);
      s->add_option("--record", o.record, "provenance record path (default <out>.run.json)");
    };
    auto net_opt = [&](CLI::App* s, bool positional) {
      if (positional) {
        s->add_option("network", o.network, "network JSON")->required()->check(CLI::ExistingFile);
      } else {
        s->add_option("--network", o.network, "network JSON")->check(CLI::ExistingFile);
      }
      s->add_option("--ell", o.ell, "bounded-Lipschitz length scale")->check(CLI::PositiveNumber);
    };
    auto seeds = [&](CLI::App* s) {
      s->add_option("--seeds", o.seeds, "Monte Carlo seeds")->delimiter(',');
      s->add_option("--mc-samples", o.mc_samples, "Monte Carlo samples per replicate");
    };

    auto* v = app.add_subcommand("validate", "check a network and print its certificate");
    net_opt(v, true);
    v->add_option("--beta0", o.beta0, "inverse temperature for the certificate")->check(CLI::PositiveNumber);
    v->add_option("--seed", o.seed, "seed for the certificate re-check");
    common(v);

    auto* d = app.add_subcommand("discretize", "grid-discretize the material measure");
    net_opt(d, true);
    d->add_option("--eps", o.eps, "grid scale (one value or one per edge)")->required()->delimiter(',');
    d->add_option("--radius", o.radius, "truncation radius in T-coordinates (default from the certificate)");
    d->add_option("--beta0", o.beta0, "certificate beta0 for the default radius");
    d->add_option("--max-points", o.max_points, "grid size cap");
    d->add_option("--lattice-origin", o.lattice_origin, "lattice offset in T-coordinates");
    d->add_option("--witnesses", o.witnesses, "random witnesses for the partition checks");
    d->add_option("--seed", o.seed, "seed for the partition witnesses");
    d->add_option("--out", o.out, "dataset CSV")->required();
    common(d);

    auto* s = app.add_subcommand("sample", "sample an empirical material measure");
    net_opt(s, true);
    s->add_option("-n,--n", o.n, "number of points")->check(CLI::PositiveNumber);
    s->add_option("--seed", o.seed, "seed");
    s->add_option("--radius", o.radius, "truncation radius (default from the certificate)");
    s->add_option("--beta0", o.beta0, "certificate beta0 for the default radius");
    s->add_option("--out", o.out, "dataset CSV")->required();
    common(s);

    auto* e = app.add_subcommand("expect", "thermalized expectation of a quantity of interest");
    net_opt(e, true);
    e->add_option("dataset", o.dataset, "dataset CSV")->required()->check(CLI::ExistingFile);
    e->add_option("--beta", o.beta, "inverse temperature")->required();
    e->add_option("--qoi", o.qoi, "one | sigma[e] | eps[e] | gap | znorm | affine:w.. | clip[lo,hi]:q");
    e->add_option("--seed", o.seed, "Monte Carlo seed");
    e->add_option("--mc-samples", o.mc_samples, "Monte Carlo samples");
    e->add_option("--bootstrap", o.bootstrap, "bootstrap replicates for the stderr");
    e->add_option("--out", o.out, "result JSON");
    common(e);

    auto* c = app.add_subcommand("converge", "flat-norm convergence study");
    net_opt(c, false);
    c->add_option("--recipe", o.recipe, "TOML recipe")->check(CLI::ExistingFile);
    c->add_option("--study", o.study, "schedule | thermalization");
    c->add_option("--eps", o.eps, "decreasing eps_h list")->delimiter(',');
    c->add_option("--beta", o.beta, "beta_h list (custom schedule or thermalization study)")->delimiter(',');
    c->add_option("--schedule-c", o.schedule_c, "c in beta_h = c / eps_h")->check(CLI::PositiveNumber);
    c->add_option("--radius", o.radius, "truncation radius");
    c->add_option("--witnesses", o.witnesses, "random witnesses for the partition checks");
    c->add_option("--out", o.out, "report prefix (writes .csv and .json)");
    seeds(c);
    common(c);

    auto* f = app.add_subcommand("flatnorm", "flat-norm distance between two datasets");
    net_opt(f, false);
    f->add_option("dataset_a", o.dataset, "first dataset")->required()->check(CLI::ExistingFile);
    f->add_option("dataset_b", o.dataset_b, "second dataset")->required()->check(CLI::ExistingFile);
    f->add_option("--beta", o.beta, "thermalize both at this beta first");
    f->add_option("--out", o.out, "result JSON");
    seeds(f);
    common(f);

    auto* r = app.add_subcommand("replay", "re-run a provenance record and compare digests");
    r->add_option("record", replay_record, "run record")->required()->check(CLI::ExistingFile);

    for (auto* sub : {v, d, s, e, c, f, r}) subs[sub->get_name()] = sub;
    f->callback([this] { require(!o.network.empty(), ErrorKind::InvalidArgument, "flatnorm needs --network"); });
  }

  std::string selected() const {
    for (const auto& [name, sub] : subs)
      if (sub->parsed()) return name;
    return {};
  }
};

json versions() {
  return {{"ddinfer", DDINFER_VERSION},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"boost", BOOST_LIB_VERSION},
          {"compiler", __VERSION__},
          {"cplusplus", __cplusplus}};
}

json options_json(const Options& o) {
  return {{"network", o.network},   {"dataset", o.dataset},       {"dataset_b", o.dataset_b}, {"out", o.out},
          {"recipe", o.recipe},     {"qoi", o.qoi},               {"study", o.study},         {"eps", o.eps},
          {"beta", o.beta},         {"schedule_c", o.schedule_c}, {"beta0", o.beta0},         {"radius", o.radius},
          {"ell", o.ell},           {"n", o.n},                   {"mc_samples", o.mc_samples},
          {"seeds", o.seeds},       {"seed", o.seed},             {"threads", o.threads},
          {"bootstrap", o.bootstrap}, {"lattice_origin", o.lattice_origin}, {"witnesses", o.witnesses},
          {"max_points", o.max_points}};
}

struct Result {
  int code = kOk;
  std::string stdout_text;
  json record;
};

Result execute(const std::vector<std::string>& args, bool write_record);

int replay(const std::string& path) {
  json rec;
  try {
    rec = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Parse, "malformed run record " + path + ": " + e.what());
  }
  const fs::path cwd = rec.at("cwd").get<std::string>();
  const auto args = rec.at("argv").get<std::vector<std::string>>();
  const fs::path here = fs::current_path();
  fs::current_path(cwd);
  Result r = execute(args, false);
  fs::current_path(here);
  std::cout << r.stdout_text;
  std::vector<std::string> mismatches;
  if (r.code != rec.value("exit_code", 0)) mismatches.push_back("exit code");
  if (r.record["stdout_sha256"] != rec["stdout_sha256"]) mismatches.push_back("stdout");
  for (const auto& [file, digest] : rec["outputs"].items()) {
    if (!r.record["outputs"].contains(file) || r.record["outputs"][file] != digest) mismatches.push_back(file);
  }
  if (mismatches.empty()) {
    std::cout << "replay: reproduced bitwise (" << rec["outputs"].size() << " output files and stdout)\n";
    return kOk;
  }
  std::cout << "replay: mismatch in";
  for (const auto& m : mismatches) std::cout << " " << m;
  std::cout << "\n";
  return kValidation;
}

Result execute(const std::vector<std::string>& args, bool write_record) {
  App a;
  std::vector<std::string> rev(args.rbegin(), args.rend());
  Result res;
  try {
    a.app.parse(rev);
  } catch (const CLI::ParseError& e) {
    res.code = a.app.exit(e);
    if (res.code != 0) res.code = kUsage;
    return res;
  }
  const std::string sub = a.selected();
  if (sub == "replay") {
    res.code = replay(a.replay_record);
    return res;
  }
  Run run;
  using Fn = int (*)(const Options&, Run&);
  static const std::map<std::string, Fn> table = {{"validate", cmd_validate}, {"discretize", cmd_discretize},
                                                  {"sample", cmd_sample},     {"expect", cmd_expect},
                                                  {"converge", cmd_converge}, {"flatnorm", cmd_flatnorm}};
  try {
    res.code = table.at(sub)(a.o, run);
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    res.code = exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    res.code = kNumerical;
  }
  res.stdout_text = run.out.str();

  json outputs = json::object();
  for (const auto& p : run.outputs) {
    if (fs::exists(p)) outputs[p.string()] = sha256(read_text(p));
  }
  json rec = {{"tool", "ddinfer"},
              {"subcommand", sub},
              {"argv", args},
              {"cwd", fs::current_path().string()},
              {"options", options_json(a.o)},
              {"seeds", a.o.seeds},
              {"seed", a.o.seed},
              {"details", run.config},
              {"warnings", run.warnings},
              {"versions", versions()},
              {"outputs", outputs},
              {"stdout_sha256", sha256(res.stdout_text)},
              {"exit_code", res.code}};
  res.record = rec;
  if (write_record) {
    fs::path path = a.o.record;
    if (path.empty()) path = a.o.out.empty() ? fs::path("ddinfer-" + sub + ".run.json")
                                             : fs::path(strip_extension(a.o.out) + ".run.json");
    try {
      write_text(path, rec.dump(2) + "\n");
    } catch (const Error& e) {
      std::cerr << "warning: " << e.what() << "\n";
    }
  }
  return res;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    Result r = execute(args, true);
    std::cout << r.stdout_text;
    return r.code;
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumerical;
  }
}
