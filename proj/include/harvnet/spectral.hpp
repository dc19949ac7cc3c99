#pragma once

// Normalized-association spectral partitioning: eigendecomposition of the
// normalized adjacency, eigengap model selection, continuous relaxation and
// rotation-based discretization.

#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "harvnet/graph.hpp"

namespace harvnet {

struct EigenOptions {
  double tol = 1e-8;                 // residual norm ||A v - lambda v|| per pair
  std::size_t dense_threshold = 500;  // M at or below this uses a dense solver
  std::size_t max_restarts = 2000;
};

/// Top eigenpairs of A = D^{-1/2} W D^{-1/2}.
struct SpectralSolution {
  Eigen::VectorXd eigenvalues;   // descending
  Eigen::MatrixXd eigenvectors;  // orthonormal columns, matching eigenvalues
  Eigen::VectorXd degrees;       // d_i = sum_j w_ij

  /// D^{-1/2} times the first `count` eigenvectors: generalized eigenvectors of
  /// (W, D).
  Eigen::MatrixXd generalized_eigenvectors(Eigen::Index count) const;
};

/// Throws InvalidInputError on a non-positive degree or m outside [1, M],
/// ConvergenceError (carrying residual norms) if the iterative solver stalls.
/// Eigenvector signs are fixed so the largest-magnitude entry is positive.
SpectralSolution eigendecompose(const SparseMatrix& w, std::size_t m, const EigenOptions& options = {});

/// Dense path, exposed for cross-checking the iterative one.
SpectralSolution eigendecompose_dense(const SparseMatrix& w, std::size_t m);
/// Iterative path (block Krylov with thick restarts).
SpectralSolution eigendecompose_iterative(const SparseMatrix& w, std::size_t m, const EigenOptions& options = {});

inline constexpr double kDefaultLambdaFloor = 0.5;

/// K in [1, K_max) maximizing lambda_K - lambda_{K+1} among K with
/// lambda_K >= lambda_floor; ties go to the smallest K. Throws
/// InvalidInputError with fewer than two eigenvalues.
std::size_t eigengap_choose_k(const Eigen::VectorXd& eigenvalues, std::size_t k_max,
                              double lambda_floor = kDefaultLambdaFloor);

/// D^{-1/2} V_K with rows scaled to unit length.
Eigen::MatrixXd continuous_partition(const SpectralSolution& solution, std::size_t k);

struct Partition {
  std::vector<std::size_t> assignment;  // node -> cluster in [0, k)
  std::size_t k = 0;

  std::size_t size() const noexcept { return assignment.size(); }
  Eigen::MatrixXd indicator() const;  // M x K 0/1 matrix X
  std::vector<std::size_t> cluster_sizes() const;
};

/// Renumbers clusters in order of first appearance.
Partition canonical(Partition p);

struct DiscretizeOptions {
  double tol = 1e-10;
  std::size_t max_iterations = 100;
};

struct Discretization {
  Partition partition;
  Eigen::MatrixXd rotation;        // K x K orthogonal R
  std::vector<double> objective;  // trace(Omega) after each iteration of the accepted run
  std::size_t restarts = 0;
};

/// Alternates X = rowwise argmax(Z R) and R = V U^T from the SVD
/// X^T Z = U Omega V^T. R starts from rows of Z picked greedily to be
/// mutually far apart, beginning with row 0; a run ending with an empty
/// cluster is restarted from a different first row (up to K restarts) before
/// DegeneratePartitionError is thrown.
Discretization discretize(const Eigen::MatrixXd& z, const DiscretizeOptions& options = {});

/// (1/K) sum_k links(V_k, V_k) / deg(V_k). Throws InvalidInputError on a
/// zero-degree or empty cluster.
double knassoc(const SparseMatrix& w, const Partition& partition);

struct ClusterOptions {
  std::optional<std::size_t> k;  // nullopt selects K by the eigengap
  std::size_t k_max = 100;
  double lambda_floor = kDefaultLambdaFloor;
  std::size_t min_component_size = 10;
  EigenOptions eigen;
  DiscretizeOptions discretize;
  std::size_t threads = 1;
};

struct ComponentClustering {
  std::vector<std::size_t> nodes;  // global node ids, ascending
  std::size_t k = 1;
  std::size_t first_cluster = 0;   // global id of local cluster 0
  bool spectral = false;           // false: kept whole (small component)
  Eigen::VectorXd eigenvalues;     // computed spectrum when spectral
};

struct Clustering {
  Partition partition;                       // over all M nodes
  std::vector<ComponentClustering> components;  // in component order
  std::vector<std::size_t> component_of;        // node -> component id
};

/// Clusters each connected component independently: components smaller than
/// min_component_size become one cluster, larger ones are split into K
/// clusters (given, or by the eigengap). Local ids are offset into one global
/// id space in component order.
Clustering cluster(const AdjacencyGraph& graph, const ClusterOptions& options = {});

/// Spectral partition of a single graph into exactly k clusters.
Partition spectral_partition(const SparseMatrix& w, std::size_t k, const ClusterOptions& options = {});

}  // namespace harvnet
