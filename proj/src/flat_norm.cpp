#include "ddinfer/flat_norm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ddinfer {

namespace {

void check_same_metric(const EnergyMetric& a, const EnergyMetric& b) {
  require(a.ell == b.ell, ErrorKind::InvalidArgument,
          "flat norm inputs use different ell (" + format_double(a.ell) + " vs " + format_double(b.ell) + ")");
  require(a.coeffs.size() == b.coeffs.size() && a.coeffs == b.coeffs, ErrorKind::InvalidArgument,
          "flat norm inputs use different energy metrics");
}

/// Primal network simplex for min c.x, N x = supply, x >= 0, on a graph whose
/// node `root` (the ground) is joined to every other node in both directions.
class NetworkSimplex {
 public:
  struct Arc {
    int tail;
    int head;
    double cost;
  };

  NetworkSimplex(const Vec& supply, std::size_t max_pivots) : n_(static_cast<int>(supply.size())), max_pivots_(max_pivots) {
    const int nodes = n_ + 1;
    root_ = n_;
    parent_.assign(nodes, -1);
    pred_.assign(nodes, -1);
    up_.assign(nodes, 0);
    flow_.assign(nodes, 0.0);
    depth_.assign(nodes, 0);
    pot_.assign(nodes, 0.0);
    first_child_.assign(nodes, -1);
    next_.assign(nodes, -1);
    prev_.assign(nodes, -1);
    for (int i = 0; i < n_; ++i) {
      arcs_.push_back({i, root_, 1.0});
      arcs_.push_back({root_, i, 1.0});
    }
    // Initial strongly feasible tree: zero-flow arcs point away from the root.
    for (int i = 0; i < n_; ++i) {
      const double a = supply[i];
      if (a > 0.0) {
        attach(i, root_, 2 * i, true, a);
      } else {
        attach(i, root_, 2 * i + 1, false, -a);
      }
      depth_[i] = 1;
      pot_[i] = a > 0.0 ? 1.0 : -1.0;
    }
  }

  int add_arc(int tail, int head, double cost) {
    arcs_.push_back({tail, head, cost});
    return static_cast<int>(arcs_.size()) - 1;
  }

  std::size_t arc_count() const { return arcs_.size(); }
  std::size_t pivots() const { return pivots_; }
  const std::vector<double>& potentials() const { return pot_; }

  double reduced_cost(int a) const {
    const Arc& arc = arcs_[static_cast<std::size_t>(a)];
    return arc.cost - pot_[static_cast<std::size_t>(arc.tail)] + pot_[static_cast<std::size_t>(arc.head)];
  }

  void solve(double tol) {
    const std::size_t m = arcs_.size();
    const std::size_t block = std::max<std::size_t>(64, static_cast<std::size_t>(std::sqrt(static_cast<double>(m))));
    std::size_t scanned = 0;
    while (scanned < m) {
      double best = -tol;
      int entering = -1;
      const std::size_t stop = std::min(m, scanned + block);
      for (; scanned < stop; ++scanned) {
        const int a = static_cast<int>(cursor_);
        cursor_ = cursor_ + 1 == m ? 0 : cursor_ + 1;
        const double rc = reduced_cost(a);
        if (rc < best) {
          best = rc;
          entering = a;
        }
      }
      if (entering >= 0) {
        pivot(entering);
        scanned = 0;
        if (pivots_ > max_pivots_) {
          throw Error(ErrorKind::Numerical, "flat norm solver did not converge: " + std::to_string(pivots_) +
                                                " pivots on " + std::to_string(n_) + " nodes and " +
                                                std::to_string(m) + " arcs, last reduced cost " + format_double(best));
        }
      }
    }
  }

  double dual_objective() const {
    double total = 0.0;
    for (int v = 0; v < n_; ++v) total += arcs_[static_cast<std::size_t>(pred_[v])].cost * flow_[v];
    return total;
  }

 private:
  void attach(int v, int p, int arc, bool up, double flow) {
    parent_[v] = p;
    pred_[v] = arc;
    up_[v] = up ? 1 : 0;
    flow_[v] = flow;
    prev_[v] = -1;
    next_[v] = first_child_[p];
    if (first_child_[p] >= 0) prev_[first_child_[p]] = v;
    first_child_[p] = v;
  }

  void detach(int v) {
    const int p = parent_[v];
    if (prev_[v] >= 0) {
      next_[prev_[v]] = next_[v];
    } else {
      first_child_[p] = next_[v];
    }
    if (next_[v] >= 0) prev_[next_[v]] = prev_[v];
    prev_[v] = next_[v] = -1;
  }

  void pivot(int entering) {
    ++pivots_;
    const int i = arcs_[static_cast<std::size_t>(entering)].tail;
    const int j = arcs_[static_cast<std::size_t>(entering)].head;
    int a = i;
    int b = j;
    while (a != b) {
      if (depth_[a] > depth_[b]) {
        a = parent_[a];
      } else if (depth_[b] > depth_[a]) {
        b = parent_[b];
      } else {
        a = parent_[a];
        b = parent_[b];
      }
    }
    const int join = a;

    // Cunningham's rule: the last blocking arc met when walking the cycle
    // from the join in the direction of the entering arc.
    constexpr double kInf = std::numeric_limits<double>::infinity();
    double theta_i = kInf;
    int leave_i = -1;
    for (int v = i; v != join; v = parent_[v]) {
      if (up_[v] && flow_[v] < theta_i) {
        theta_i = flow_[v];
        leave_i = v;
      }
    }
    double theta_j = kInf;
    int leave_j = -1;
    for (int v = j; v != join; v = parent_[v]) {
      if (!up_[v] && flow_[v] <= theta_j) {
        theta_j = flow_[v];
        leave_j = v;
      }
    }
    require(leave_i >= 0 || leave_j >= 0, ErrorKind::Numerical, "flat norm dual is unbounded");
    const bool j_side = theta_j <= theta_i;
    const double theta = j_side ? theta_j : theta_i;
    const int q = j_side ? leave_j : leave_i;

    if (theta > 0.0) {
      for (int v = i; v != join; v = parent_[v]) flow_[v] += up_[v] ? -theta : theta;
      for (int v = j; v != join; v = parent_[v]) flow_[v] += up_[v] ? theta : -theta;
    }
    flow_[q] = 0.0;

    // Re-hang the subtree cut off by the leaving arc from the entering arc,
    // reversing the path between its new root x and q.
    const int x = j_side ? j : i;
    int prev_node = j_side ? i : j;
    int prev_arc = entering;
    bool prev_up = !j_side;
    double prev_flow = theta;
    int v = x;
    while (true) {
      const int next = parent_[v];
      const int arc_v = pred_[v];
      const bool up_v = up_[v] != 0;
      const double flow_v = flow_[v];
      detach(v);
      attach(v, prev_node, prev_arc, prev_up, prev_flow);
      if (v == q) break;
      prev_node = v;
      prev_arc = arc_v;
      prev_up = !up_v;
      prev_flow = flow_v;
      v = next;
    }
    refresh_subtree(x);
  }

  void refresh_subtree(int top) {
    stack_.clear();
    stack_.push_back(top);
    while (!stack_.empty()) {
      const int v = stack_.back();
      stack_.pop_back();
      const int p = parent_[v];
      const double c = arcs_[static_cast<std::size_t>(pred_[v])].cost;
      depth_[v] = depth_[p] + 1;
      pot_[v] = up_[v] ? pot_[p] + c : pot_[p] - c;
      for (int ch = first_child_[v]; ch >= 0; ch = next_[ch]) stack_.push_back(ch);
    }
  }

  int n_;
  int root_;
  std::size_t max_pivots_;
  std::size_t pivots_ = 0;
  std::size_t cursor_ = 0;
  std::vector<Arc> arcs_;
  std::vector<int> parent_, pred_, depth_, first_child_, next_, prev_, stack_;
  std::vector<char> up_;
  std::vector<double> flow_, pot_;
};

}  // namespace

DiscreteSignedMeasure DiscreteSignedMeasure::on_z(Mat points, Vec weights, const EnergyMetric& metric) {
  check_same_edges(points.rows(), 2 * metric.edges(), "signed measure points");
  check_same_edges(points.cols(), weights.size(), "signed measure weights");
  DiscreteSignedMeasure nu{std::move(points), std::move(weights), metric};
  return nu;
}

DiscreteSignedMeasure DiscreteSignedMeasure::on_pairs(const WeightedPairCloud& cloud, const EnergyMetric& metric) {
  check_same_edges(cloud.y.rows(), 2 * metric.edges(), "pair cloud y");
  check_same_edges(cloud.z.rows(), 2 * metric.edges(), "pair cloud z");
  DiscreteSignedMeasure nu;
  nu.support.resize(cloud.y.rows() + cloud.z.rows(), cloud.y.cols());
  nu.support << cloud.y, cloud.z;
  nu.weights = cloud.weights;
  nu.metric = metric;
  return nu;
}

DiscreteSignedMeasure DiscreteSignedMeasure::on_pairs(const PairCloud& cloud, const EnergyMetric& metric) {
  return on_pairs(to_weighted(cloud), metric);
}

Vec DiscreteSignedMeasure::whitening() const {
  const Vec w = metric.whitening();
  require(w.size() > 0 && support.rows() % w.size() == 0, ErrorKind::DimensionMismatch,
          "signed measure dimension is not a multiple of 2N");
  return w.replicate(support.rows() / w.size(), 1);
}

double DiscreteSignedMeasure::distance(std::size_t i, std::size_t j) const {
  const Vec w = whitening();
  return (w.cwiseProduct(support.col(static_cast<Eigen::Index>(i)) - support.col(static_cast<Eigen::Index>(j))))
      .norm();
}

std::vector<Eigen::Index> DiscreteSignedMeasure::merge(double tol) {
  const Eigen::Index n = support.cols();
  std::vector<Eigen::Index> map(static_cast<std::size_t>(n), -1);
  if (n == 0) return map;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index r = 0; r < support.rows(); ++r) {
      if (support(r, a) != support(r, b)) return support(r, a) < support(r, b);
    }
    return a < b;
  });
  Mat pts(support.rows(), n);
  Vec w(n);
  Eigen::Index count = 0;
  Eigen::Index lead = -1;
  for (const Eigen::Index idx : order) {
    if (lead >= 0 && (support.col(idx) - support.col(lead)).cwiseAbs().maxCoeff() <= tol) {
      w[count - 1] += weights[idx];
      map[static_cast<std::size_t>(idx)] = count - 1;
      continue;
    }
    lead = idx;
    pts.col(count) = support.col(idx);
    w[count] = weights[idx];
    map[static_cast<std::size_t>(idx)] = count;
    ++count;
  }
  std::vector<Eigen::Index> renumber(static_cast<std::size_t>(count), -1);
  Eigen::Index kept = 0;
  for (Eigen::Index i = 0; i < count; ++i) {
    if (w[i] == 0.0) continue;
    pts.col(kept) = pts.col(i);
    w[kept] = w[i];
    renumber[static_cast<std::size_t>(i)] = kept;
    ++kept;
  }
  for (auto& m : map) m = renumber[static_cast<std::size_t>(m)];
  support = pts.leftCols(kept);
  weights = w.head(kept);
  return map;
}

DiscreteSignedMeasure difference(const DiscreteSignedMeasure& mu1, const DiscreteSignedMeasure& mu2) {
  check_same_metric(mu1.metric, mu2.metric);
  check_same_edges(mu1.support.rows(), mu2.support.rows(), "flat norm support dimension");
  DiscreteSignedMeasure nu;
  nu.metric = mu1.metric;
  nu.support.resize(mu1.support.rows(), mu1.support.cols() + mu2.support.cols());
  nu.support << mu1.support, mu2.support;
  nu.weights.resize(mu1.weights.size() + mu2.weights.size());
  nu.weights << mu1.weights, -mu2.weights;
  nu.merge();
  return nu;
}

FlatNormResult flat_norm(const DiscreteSignedMeasure& input, const FlatNormOptions& opts) {
  require(input.support.cols() == input.weights.size(), ErrorKind::DimensionMismatch,
          "flat norm: support and weights differ in size");
  require(input.support.allFinite() && input.weights.allFinite(), ErrorKind::InvalidArgument,
          "flat norm: non-finite input");
  require(input.metric.ell > 0.0, ErrorKind::InvalidArgument, "flat norm: ell must be positive");
  DiscreteSignedMeasure nu = input;
  const std::vector<Eigen::Index> map = nu.merge();
  FlatNormResult res;
  const auto n = static_cast<int>(nu.size());
  if (n == 0) {
    res.witness = Vec::Zero(input.weights.size());
    return res;
  }
  const double ell = nu.metric.ell;
  const Mat x = nu.whitening().asDiagonal() * nu.support;  // Euclidean distances
  Vec sq(n);
  for (int i = 0; i < n; ++i) sq[i] = x.col(i).squaredNorm();
  auto dist = [&](int i, int j) { return (x.col(i) - x.col(j)).norm(); };
  const double reach = 2.0 * ell;  // longer arcs can never bind

  NetworkSimplex ns(nu.weights, opts.max_pivots);
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));  // existing Lipschitz arcs by tail
  auto add_pair_arc = [&](int i, int j, double d) {
    ns.add_arc(i, j, d / ell);
    adj[static_cast<std::size_t>(i)].push_back(j);
  };

  const int k = std::min(opts.neighbors, n - 1);
  if (k > 0) {
    std::vector<std::pair<double, int>> row(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) row[static_cast<std::size_t>(j)] = {j == i ? std::numeric_limits<double>::infinity() : dist(i, j), j};
      std::nth_element(row.begin(), row.begin() + k, row.end());
      for (int t = 0; t < k; ++t) {
        const auto [d, j] = row[static_cast<std::size_t>(t)];
        if (d <= reach) {
          add_pair_arc(i, j, d);
          add_pair_arc(j, i, d);
        }
      }
    }
  }
  for (auto& a : adj) {
    std::sort(a.begin(), a.end());
    a.erase(std::unique(a.begin(), a.end()), a.end());
  }

  const double tol = 1e-12;
  std::vector<std::array<int, 2>> violated;
  for (res.rounds = 1; res.rounds <= opts.max_rounds; ++res.rounds) {
    ns.solve(tol);
    const auto& f = ns.potentials();
    violated.clear();
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        const double df = f[static_cast<std::size_t>(i)] - f[static_cast<std::size_t>(j)];
        if (std::abs(df) <= tol) continue;
        const double d = dist(i, j) / ell;
        if (df > d + tol) violated.push_back({i, j});
        if (-df > d + tol) violated.push_back({j, i});
      }
    }
    if (violated.empty()) break;
    for (const auto& [i, j] : violated) {
      auto& a = adj[static_cast<std::size_t>(i)];
      if (!std::binary_search(a.begin(), a.end(), j)) {
        ns.add_arc(i, j, dist(i, j) / ell);
        a.insert(std::upper_bound(a.begin(), a.end(), j), j);
      }
    }
  }
  require(violated.empty(), ErrorKind::Numerical,
          "flat norm constraint generation did not converge after " + std::to_string(opts.max_rounds) + " rounds");

  const auto& f = ns.potentials();
  Vec fm(n);
  for (int i = 0; i < n; ++i) fm[i] = f[static_cast<std::size_t>(i)];
  std::vector<double> terms(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) terms[static_cast<std::size_t>(i)] = nu.weights[i] * fm[i];
  res.value = pairwise_sum(terms);
  res.pivots = ns.pivots();
  res.arcs = ns.arc_count() - 2 * static_cast<std::size_t>(n);

  // Independent verification of the witness and of the duality gap.
  double viol = std::max(0.0, fm.cwiseAbs().maxCoeff() - 1.0);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double df = std::abs(fm[i] - fm[j]);
      if (df > 0.0) viol = std::max(viol, df - dist(i, j) / ell);
    }
  }

  // Back to input order; cancelled points take the McShane extension.
  const Vec scale_in = input.whitening();
  res.witness.resize(input.weights.size());
  for (Eigen::Index c = 0; c < input.weights.size(); ++c) {
    const Eigen::Index m = map[static_cast<std::size_t>(c)];
    if (m >= 0) {
      res.witness[c] = fm[m];
      continue;
    }
    const Vec xc = scale_in.asDiagonal() * input.support.col(c);
    double v = 1.0;
    for (int j = 0; j < n; ++j) v = std::min(v, fm[j] + (xc - x.col(j)).norm() / ell);
    res.witness[c] = std::max(-1.0, v);
  }
  res.max_violation = viol;
  res.duality_gap = std::abs(ns.dual_objective() - res.value);
  const double scale = 1.0 + nu.tv_norm();
  require(viol <= 1e-9, ErrorKind::Numerical, "flat norm witness infeasible by " + format_double(viol));
  require(res.duality_gap <= 1e-8 * scale, ErrorKind::Numerical,
          "flat norm duality gap " + format_double(res.duality_gap) + " exceeds tolerance");
  return res;
}

double fn_distance(const DiscreteSignedMeasure& mu1, const DiscreteSignedMeasure& mu2, const FlatNormOptions& opts) {
  return flat_norm(difference(mu1, mu2), opts).value;
}

CloudSource cloud_source(const ThermalizedDiscrete& t) {
  return [t](std::size_t k, std::uint64_t seed) { return sample_signed_cloud(t, k, seed); };
}

CloudSource cloud_source(const ThermalMoments& m) {
  return [m](std::size_t k, std::uint64_t seed) { return to_weighted(sample_thermalized(m, k, seed)); };
}

CloudSource cloud_source(const LimitMoments& m, const AffineSubspace& e) {
  return [m, e](std::size_t k, std::uint64_t seed) { return to_weighted(sample_limit(m, e, k, seed)); };
}

WeightedPairCloud subsample(const WeightedPairCloud& c, std::size_t n, std::uint64_t seed) {
  require(n >= 1, ErrorKind::InvalidArgument, "subsample: n must be >= 1");
  if (c.size() <= n) return c;
  const Vec mag = c.weights.cwiseAbs();
  const double total = mag.sum();
  WeightedPairCloud out;
  out.y.resize(c.y.rows(), static_cast<Eigen::Index>(n));
  out.z.resize(c.z.rows(), static_cast<Eigen::Index>(n));
  out.weights.resize(static_cast<Eigen::Index>(n));
  CounterRng rng(seed, 0x5eed);
  const double u0 = rng.uniform();
  double cdf = mag[0] / total;
  Eigen::Index atom = 0;
  for (std::size_t j = 0; j < n; ++j) {
    const double target = (static_cast<double>(j) + u0) / static_cast<double>(n);
    while (cdf < target && atom + 1 < mag.size()) cdf += mag[++atom] / total;
    const auto col = static_cast<Eigen::Index>(j);
    out.y.col(col) = c.y.col(atom);
    out.z.col(col) = c.z.col(atom);
    out.weights[col] = std::copysign(total / static_cast<double>(n), c.weights[atom]);
  }
  return out;
}

FnMeasuresResult fn_distance_measures(const CloudSource& a, const CloudSource& b, const EnergyMetric& metric,
                                      const FnMeasuresOptions& opts) {
  require(opts.k >= 10, ErrorKind::InvalidArgument, "fn_distance_measures: k must be >= 10");
  require(!opts.seeds.empty(), ErrorKind::InvalidArgument, "fn_distance_measures: need at least one seed");
  FnMeasuresResult res;
  res.replicates.assign(opts.seeds.size(), 0.0);
  std::vector<char> sub(opts.seeds.size(), 0);
  parallel_for(opts.seeds.size(), opts.threads, [&](std::size_t r) {
    const std::uint64_t seed = opts.seeds[r];
    WeightedPairCloud ca = a(opts.k, seed);
    WeightedPairCloud cb = b(opts.k, seed);
    const std::size_t half = std::max<std::size_t>(1, opts.cap / 2);
    if (ca.size() + cb.size() > opts.cap) {
      sub[r] = 1;
      if (ca.size() > half) ca = subsample(ca, half, seed);
      if (cb.size() > half) cb = subsample(cb, half, seed + 1);
    }
    res.replicates[r] = fn_distance(DiscreteSignedMeasure::on_pairs(ca, metric),
                                    DiscreteSignedMeasure::on_pairs(cb, metric), opts.lp);
  });
  res.subsampled = std::any_of(sub.begin(), sub.end(), [](char s) { return s != 0; });
  const double n = static_cast<double>(res.replicates.size());
  res.value = pairwise_sum(res.replicates) / n;
  if (res.replicates.size() >= 2) {
    double acc = 0.0;
    for (double v : res.replicates) acc += (v - res.value) * (v - res.value);
    res.mc_error = std::sqrt(acc / (n - 1.0));
  }
  return res;
}

}  // namespace ddinfer
