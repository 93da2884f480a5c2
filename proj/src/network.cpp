#include "ddinfer/network.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace ddinfer {

namespace {

using json = nlohmann::json;

std::string line_column(const std::string& text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

EdgeEnd parse_end(const json& j, int n, const char* field, std::size_t edge) {
  const std::string where = "edge " + std::to_string(edge) + " '" + field + "'";
  if (j.is_string()) {
    if (j.get<std::string>() == "ground") return EdgeEnd{};
    throw Error(ErrorKind::Parse, where + ": expected a node index or \"ground\"");
  }
  if (!j.is_number_integer()) throw Error(ErrorKind::Parse, where + ": expected an integer");
  const int idx = j.get<int>();
  if (idx < 0 || idx >= n) {
    throw Error(ErrorKind::Parse, where + ": node index " + std::to_string(idx) + " out of range");
  }
  return EdgeEnd{idx};
}

double number_or(const json& obj, const char* key, double fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number()) throw Error(ErrorKind::Parse, std::string("'") + key + "' must be a number");
  return obj[key].get<double>();
}

}  // namespace

void Network::validate_shapes() const {
  require(n_free_nodes >= 1, ErrorKind::InvalidArgument, "network needs at least one free node");
  require(n_edges >= 1, ErrorKind::InvalidArgument, "network needs at least one edge");
  check_same_edges(incidence.rows(), n_edges, "incidence rows");
  check_same_edges(incidence.cols(), n_free_nodes, "incidence columns vs free nodes");
  check_same_edges(coeffs.size(), n_edges, "coefficients");
  check_same_edges(applied.size(), n_edges, "applied potential differences");
  check_same_edges(noise.size(), n_edges, "noise scales");
  check_same_edges(sources.size(), n_free_nodes, "sources");
  require(incidence.allFinite() && sources.allFinite() && applied.allFinite(),
          ErrorKind::InvalidArgument, "network data must be finite");
  for (int e = 0; e < n_edges; ++e) {
    require(std::isfinite(coeffs[e]) && coeffs[e] > 0.0, ErrorKind::InvalidArgument,
            "edge coefficients must be positive");
    require(std::isfinite(noise[e]) && noise[e] > 0.0, ErrorKind::InvalidArgument,
            "edge noise scales must be positive");
  }
}

Network Network::from_matrices(Mat incidence, Vec coeffs, Vec sources, Vec applied, Vec noise) {
  Network net;
  net.n_edges = static_cast<int>(incidence.rows());
  net.n_free_nodes = static_cast<int>(incidence.cols());
  net.incidence = std::move(incidence);
  net.coeffs = std::move(coeffs);
  net.sources = std::move(sources);
  net.applied = std::move(applied);
  net.noise = std::move(noise);
  net.validate_shapes();
  return net;
}

Network Network::from_edges(int n_free_nodes, std::vector<EdgeSpec> edges, Vec sources) {
  const auto n_edges = static_cast<Eigen::Index>(edges.size());
  Mat b = Mat::Zero(n_edges, n_free_nodes);
  Vec c(n_edges), g(n_edges), s(n_edges);
  for (Eigen::Index e = 0; e < n_edges; ++e) {
    const EdgeSpec& spec = edges[static_cast<std::size_t>(e)];
    if (spec.to.node) b(e, *spec.to.node) += 1.0;
    if (spec.from.node) b(e, *spec.from.node) -= 1.0;
    c[e] = spec.coeff;
    s[e] = spec.noise;
    g[e] = spec.applied;
  }
  Network net = from_matrices(std::move(b), std::move(c), std::move(sources), std::move(g), std::move(s));
  net.edges = std::move(edges);
  return net;
}

EnergyMetric Network::metric(double ell) const { return EnergyMetric(coeffs, ell); }

Network parse_network_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& err) {
    throw Error(ErrorKind::Parse, "malformed network JSON at " + line_column(text, err.byte) + ": " + err.what());
  }
  if (!doc.is_object()) throw Error(ErrorKind::Parse, "network JSON must be an object");
  if (!doc.contains("nodes") || !doc["nodes"].is_number_integer()) {
    throw Error(ErrorKind::Parse, "'nodes' must be an integer");
  }
  const int n = doc["nodes"].get<int>();
  if (n < 1) throw Error(ErrorKind::Parse, "'nodes' must be positive");
  if (!doc.contains("edges") || !doc["edges"].is_array() || doc["edges"].empty()) {
    throw Error(ErrorKind::Parse, "'edges' must be a non-empty array");
  }
  std::vector<EdgeSpec> edges;
  std::size_t k = 0;
  for (const json& e : doc["edges"]) {
    if (!e.is_object() || !e.contains("from") || !e.contains("to")) {
      throw Error(ErrorKind::Parse, "edge " + std::to_string(k) + " needs 'from' and 'to'");
    }
    EdgeSpec spec;
    spec.from = parse_end(e["from"], n, "from", k);
    spec.to = parse_end(e["to"], n, "to", k);
    spec.coeff = number_or(e, "C", 1.0);
    spec.noise = number_or(e, "s", 1.0);
    spec.applied = number_or(e, "g", 0.0);
    edges.push_back(spec);
    ++k;
  }
  Vec f = Vec::Zero(n);
  if (doc.contains("sources")) {
    const json& src = doc["sources"];
    if (!src.is_array() || static_cast<int>(src.size()) != n) {
      throw Error(ErrorKind::Parse, "'sources' must be an array with one entry per free node");
    }
    for (int i = 0; i < n; ++i) {
      if (!src[static_cast<std::size_t>(i)].is_number()) throw Error(ErrorKind::Parse, "'sources' entries must be numbers");
      f[i] = src[static_cast<std::size_t>(i)].get<double>();
    }
  }
  try {
    return Network::from_edges(n, std::move(edges), std::move(f));
  } catch (const Error& err) {
    throw Error(ErrorKind::Parse, std::string("invalid network: ") + err.what());
  }
}

Network load_network(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Parse, "cannot open network file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_network_json(buf.str());
}

Eigen::Index numerical_rank(const Mat& a) {
  if (a.size() == 0) return 0;
  Eigen::JacobiSVD<Mat> svd(a);
  const Vec& sv = svd.singularValues();
  if (sv.size() == 0 || sv[0] == 0.0) return 0;
  const double tol = 1e-10 * sv[0];
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) r += sv[i] > tol ? 1 : 0;
  return r;
}

NondegeneracyReport check_nondegeneracy(const Network& net) {
  net.validate_shapes();
  const Mat k = net.incidence.transpose() * net.coeffs.asDiagonal() * net.incidence;
  Eigen::SelfAdjointEigenSolver<Mat> eig(k);
  NondegeneracyReport rep;
  rep.lambda_min = eig.eigenvalues().minCoeff();
  rep.lambda_max = eig.eigenvalues().maxCoeff();
  rep.ok = rep.lambda_max > 0.0 && rep.lambda_min > 1e-10 * rep.lambda_max;
  return rep;
}

ClassicalSolution classical_solution(const Network& net) {
  const NondegeneracyReport rep = check_nondegeneracy(net);
  if (!rep.ok) {
    throw Error(ErrorKind::NonDegeneracy,
                "B^T C B is not positive definite (lambda_min = " + format_double(rep.lambda_min) + ")");
  }
  const Mat& b = net.incidence;
  const Mat k = b.transpose() * net.coeffs.asDiagonal() * b;
  const Vec rhs = net.sources - b.transpose() * net.coeffs.cwiseProduct(net.applied);
  Eigen::LLT<Mat> llt(k);
  if (llt.info() != Eigen::Success) throw Error(ErrorKind::NonDegeneracy, "B^T C B factorization failed");
  ClassicalSolution sol;
  sol.potentials = llt.solve(rhs);
  Vec eps = b * sol.potentials + net.applied;
  Vec sigma = net.coeffs.cwiseProduct(eps);
  sol.state = PhaseVector(std::move(eps), std::move(sigma));
  return sol;
}

FieldResidual field_residual(const Network& net, const PhaseVector& z) {
  check_same_edges(z.edges(), net.n_edges, "field_residual");
  FieldResidual r;
  r.conservation = (net.incidence.transpose() * z.sigma - net.sources).cwiseAbs().maxCoeff();
  const Vec d = z.eps - net.applied;
  const Vec u = net.incidence.colPivHouseholderQr().solve(d);
  r.compatibility = (net.incidence * u - d).cwiseAbs().maxCoeff();
  return r;
}

AffineSubspace constraint_subspace(const Network& net, double ell) {
  const NondegeneracyReport rep = check_nondegeneracy(net);
  if (!rep.ok) {
    throw Error(ErrorKind::NonDegeneracy,
                "B^T C B is not positive definite (lambda_min = " + format_double(rep.lambda_min) + ")");
  }
  const Eigen::Index n_edges = net.n_edges;
  const Eigen::Index n_nodes = net.n_free_nodes;
  const Mat& b = net.incidence;

  // Null space of B^T via the full SVD of B (N x n): trailing left singular vectors.
  Eigen::JacobiSVD<Mat> svd(b, Eigen::ComputeFullU);
  const Eigen::Index rank_bt = numerical_rank(b);
  const Eigen::Index null_dim = n_edges - rank_bt;
  const Eigen::Index dim_e0 = numerical_rank(b) + null_dim;
  // With B of full column rank (implied by B^T C B > 0) this equals n + (N - rank B^T).
  if (dim_e0 != n_edges || rank_bt != n_nodes) {
    throw Error(ErrorKind::SubspaceDimension,
                "admissible set has dimension " + std::to_string(dim_e0) + ", expected N = " +
                    std::to_string(n_edges));
  }

  Mat spanning = Mat::Zero(2 * n_edges, n_nodes + null_dim);
  spanning.topLeftCorner(n_edges, n_nodes) = b;
  if (null_dim > 0) spanning.bottomRightCorner(n_edges, null_dim) = svd.matrixU().rightCols(null_dim);

  // Particular solution: eps = g, sigma = B (B^T B)^{-1} f (minimum norm).
  const Vec sigma_p = b * (b.transpose() * b).ldlt().solve(net.sources);
  Vec point(2 * n_edges);
  point << net.applied, sigma_p;

  const EnergyMetric metric = net.metric(ell);
  AffineSubspace e = AffineSubspace::from_spanning(metric, point, spanning);
  if (e.dim() != n_edges) {
    throw Error(ErrorKind::SubspaceDimension,
                "orthonormalized admissible set has dimension " + std::to_string(e.dim()) +
                    ", expected N = " + std::to_string(n_edges));
  }
  const double scale = 1.0 + point.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < e.dim(); ++i) {
    const PhaseVector v = PhaseVector::from_stacked(e.basis().col(i));
    const double cons = (b.transpose() * v.sigma).cwiseAbs().maxCoeff();
    require(cons < 1e-9, ErrorKind::Numerical, "constraint basis violates conservation");
  }
  const FieldResidual off = field_residual(net, PhaseVector::from_stacked(e.offset()));
  require(off.conservation < 1e-10 * scale && off.compatibility < 1e-10 * scale, ErrorKind::Numerical,
          "constraint offset violates the field equations");
  return e;
}

}  // namespace ddinfer
