#pragma once

#include "ddinfer/affine.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ddinfer {

/// Endpoint of an edge in a network file: a free node index or ground.
struct EdgeEnd {
  std::optional<int> node;  // nullopt = ground
};

struct EdgeSpec {
  EdgeEnd from;
  EdgeEnd to;
  double coeff = 1.0;
  double noise = 1.0;
  double applied = 0.0;
};

/// Transportation network: B^T sigma = f, eps = B u + g.
///
/// Row e of the incidence matrix B carries +1 at the edge's head node and -1
/// at its tail, so eps_e = u_to - u_from + g_e. Grounded endpoints are
/// eliminated.
struct Network {
  int n_free_nodes = 0;
  int n_edges = 0;
  Mat incidence;  // N x n
  Vec coeffs;     // C_e
  Vec sources;    // f, length n
  Vec applied;    // g, length N
  Vec noise;      // s_e
  std::vector<EdgeSpec> edges;  // as read; empty when built from matrices

  static Network from_matrices(Mat incidence, Vec coeffs, Vec sources, Vec applied, Vec noise);
  static Network from_edges(int n_free_nodes, std::vector<EdgeSpec> edges, Vec sources);

  EnergyMetric metric(double ell = 1.0) const;
  void validate_shapes() const;
};

Network parse_network_json(const std::string& text);
Network load_network(const std::filesystem::path& path);

struct NondegeneracyReport {
  bool ok = false;
  double lambda_min = 0.0;
  double lambda_max = 0.0;
};

/// Positive definiteness of B^T C B, with tolerance 1e-10 * lambda_max.
NondegeneracyReport check_nondegeneracy(const Network& net);

struct ClassicalSolution {
  Vec potentials;  // u
  PhaseVector state;
};

/// The unique admissible state on the material line sigma = C eps.
ClassicalSolution classical_solution(const Network& net);

/// Residuals of the field equations (conservation, compatibility) at z.
struct FieldResidual {
  double conservation = 0.0;   // |B^T sigma - f|_inf
  double compatibility = 0.0;  // distance of eps - g from range(B), inf-norm
};
FieldResidual field_residual(const Network& net, const PhaseVector& z);

/// Admissible set E = {(eps, sigma): eps = B u + g, B^T sigma = f}, an
/// N-dimensional affine subspace of Z.
AffineSubspace constraint_subspace(const Network& net, double ell = 1.0);

/// Numerical rank via SVD, threshold 1e-10 * largest singular value.
Eigen::Index numerical_rank(const Mat& a);

}  // namespace ddinfer
