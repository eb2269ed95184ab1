#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "graphsmooth/errors.hpp"
#include "graphsmooth/tolerances.hpp"

namespace graphsmooth {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Edge {
  int src = 0;
  int dst = 0;
  double weight = 0.0;
};

/// Undirected weighted graph stored as an edge list. One entry per unordered
/// node pair; the adjacency matrix is symmetrized on materialization.
class WeightedGraph {
 public:
  WeightedGraph(int n_nodes, std::vector<Edge> edges)
      : n_nodes_(n_nodes), edges_(std::move(edges)) {
    if (n_nodes_ <= 0) {
      fail(ErrorCode::InvalidParameter, "graph needs at least one node");
    }
    std::set<std::pair<int, int>> seen;
    for (const Edge& e : edges_) {
      if (e.src < 0 || e.src >= n_nodes_ || e.dst < 0 || e.dst >= n_nodes_) {
        fail(ErrorCode::InvalidEdge,
             "node id out of range: (" + std::to_string(e.src) + ", " +
                 std::to_string(e.dst) + ")");
      }
      if (e.src == e.dst) {
        fail(ErrorCode::InvalidEdge, "self-loop at node " + std::to_string(e.src));
      }
      if (!(e.weight > 0.0) || !std::isfinite(e.weight)) {
        fail(ErrorCode::InvalidEdge,
             "edge weight must be a positive finite real, got " +
                 std::to_string(e.weight));
      }
      auto key = std::minmax(e.src, e.dst);
      if (!seen.insert(key).second) {
        fail(ErrorCode::InvalidEdge,
             "duplicate edge (" + std::to_string(key.first) + ", " +
                 std::to_string(key.second) + ")");
      }
    }
  }

  int n_nodes() const { return n_nodes_; }
  const std::vector<Edge>& edges() const { return edges_; }

  Matrix adjacency_matrix() const {
    Matrix w = Matrix::Zero(n_nodes_, n_nodes_);
    for (const Edge& e : edges_) {
      w(e.src, e.dst) = e.weight;
      w(e.dst, e.src) = e.weight;
    }
    return w;
  }

 private:
  int n_nodes_;
  std::vector<Edge> edges_;
};

/// L = diag(W 1) - W.
inline Matrix laplacian_matrix(const WeightedGraph& g) {
  Matrix w = g.adjacency_matrix();
  Matrix l = -w;
  l.diagonal() += w.rowwise().sum();
  return l;
}

/// A graph together with the full eigendecomposition of its Laplacian.
/// Immutable after construction; the single source of truth for (lambda, V).
class SpectralGraph {
 public:
  SpectralGraph(WeightedGraph graph, Matrix laplacian, Vector eigenvalues,
                Matrix eigenvectors)
      : graph_(std::move(graph)),
        laplacian_(std::move(laplacian)),
        eigenvalues_(std::move(eigenvalues)),
        eigenvectors_(std::move(eigenvectors)),
        lambda_avg_(eigenvalues_.mean()) {}

  int n_nodes() const { return graph_.n_nodes(); }
  const WeightedGraph& graph() const { return graph_; }
  const Matrix& laplacian() const { return laplacian_; }
  const Vector& eigenvalues() const { return eigenvalues_; }
  const Matrix& eigenvectors() const { return eigenvectors_; }
  double lambda_avg() const { return lambda_avg_; }
  double lambda_max() const { return eigenvalues_(eigenvalues_.size() - 1); }

  /// Absolute tolerance below which two eigenvalues count as equal.
  double group_tolerance() const { return tol::kGroupRel * lambda_max(); }

  /// Partition of {0..N-1} into runs of equal eigenvalues (within tol_abs
  /// between neighbors in the sorted order; tol_abs < 0 selects the default
  /// group_tolerance()).
  std::vector<std::vector<int>> eigenvalue_groups(double tol_abs = -1.0) const {
    std::vector<std::vector<int>> groups;
    if (tol_abs < 0.0) tol_abs = group_tolerance();
    for (int n = 0; n < eigenvalues_.size(); ++n) {
      if (groups.empty() ||
          eigenvalues_(n) - eigenvalues_(groups.back().back()) > tol_abs) {
        groups.emplace_back();
      }
      groups.back().push_back(n);
    }
    return groups;
  }

 private:
  WeightedGraph graph_;
  Matrix laplacian_;
  Vector eigenvalues_;
  Matrix eigenvectors_;
  double lambda_avg_;
};

/// Builds the Laplacian spectrum of a connected graph.
///
/// Eigenvalues come out ascending with tiny magnitudes snapped to exact zero;
/// each eigenvector is sign-fixed so its largest-magnitude entry is positive.
/// tol_connect < 0 selects the default lambda_2 > 1e-8 * lambda_max check.
inline SpectralGraph build_spectral_graph(const WeightedGraph& g,
                                          double tol_connect = -1.0) {
  Matrix laplacian = laplacian_matrix(g);
  Eigen::SelfAdjointEigenSolver<Matrix> solver(laplacian);
  if (solver.info() != Eigen::Success) {
    fail(ErrorCode::NumericalFailure, "eigendecomposition did not converge");
  }
  Vector lambda = solver.eigenvalues();
  Matrix vecs = solver.eigenvectors();

  const int n = g.n_nodes();
  const double lambda_max = std::max(lambda(n - 1), 0.0);
  for (int i = 0; i < n; ++i) {
    if (std::abs(lambda(i)) <= tol::kEigZeroRel * std::max(lambda_max, 1.0)) {
      lambda(i) = 0.0;
    }
    int arg_max = 0;
    vecs.col(i).cwiseAbs().maxCoeff(&arg_max);
    if (vecs(arg_max, i) < 0.0) vecs.col(i) = -vecs.col(i);
  }

  if (n == 1) {
    fail(ErrorCode::DisconnectedGraph, "single-node graph has no spectrum gap");
  }
  if (tol_connect < 0.0) tol_connect = tol::kConnectRel * lambda_max;
  if (!(lambda(1) > tol_connect)) {
    fail(ErrorCode::DisconnectedGraph,
         "lambda_2 = " + std::to_string(lambda(1)) + " <= " +
             std::to_string(tol_connect));
  }
  return SpectralGraph(g, std::move(laplacian), std::move(lambda),
                       std::move(vecs));
}

/// GFT: projection onto the Laplacian eigenbasis, V^T x.
inline Vector gft(const SpectralGraph& sg, const Vector& x) {
  if (x.size() != sg.n_nodes()) {
    fail(ErrorCode::DimensionMismatch,
         "signal length " + std::to_string(x.size()) + " != " +
             std::to_string(sg.n_nodes()) + " nodes");
  }
  return sg.eigenvectors().transpose() * x;
}

inline Vector inverse_gft(const SpectralGraph& sg, const Vector& x_tilde) {
  if (x_tilde.size() != sg.n_nodes()) {
    fail(ErrorCode::DimensionMismatch,
         "spectrum length " + std::to_string(x_tilde.size()) + " != " +
             std::to_string(sg.n_nodes()) + " nodes");
  }
  return sg.eigenvectors() * x_tilde;
}

/// Total variation x^T L x.
inline double total_variation(const SpectralGraph& sg, const Vector& x) {
  if (x.size() != sg.n_nodes()) {
    fail(ErrorCode::DimensionMismatch,
         "signal length " + std::to_string(x.size()) + " != " +
             std::to_string(sg.n_nodes()) + " nodes");
  }
  return x.dot(sg.laplacian() * x);
}

}  // namespace graphsmooth
