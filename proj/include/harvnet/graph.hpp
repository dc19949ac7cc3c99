#pragma once

// k-nearest-neighbor similarity graphs and their connected components.

#include <cstddef>
#include <ostream>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "harvnet/types.hpp"

namespace harvnet {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Connected-component partition. Components are numbered in order of their
/// lowest node index, so two equal partitions have equal labels.
struct Components {
  std::vector<std::size_t> label;  // node -> component id
  std::size_t count = 0;

  std::vector<std::vector<std::size_t>> members() const;
  bool operator==(const Components&) const = default;
};

struct AdjacencyGraph {
  SparseMatrix w;  // symmetric, unit diagonal; stores every selected edge, even zero-weight ones
  std::size_t k = 0;
  Components components;

  Eigen::Index size() const { return w.rows(); }
};

/// k = max(1, ceil(ln M)) capped at M - 1. Throws InvalidInputError if M < 2.
std::size_t default_k(std::size_t num_nodes);

/// Union k-NN graph over S': each node links to its k most similar other
/// nodes (ties toward the lower index); an edge exists if either endpoint
/// selected it and carries weight S'_ij; self-edges carry weight 1.
/// Throws InvalidInputError unless 1 <= k <= M - 1.
AdjacencyGraph knn_graph(const Eigen::MatrixXd& s_prime, std::size_t k, std::size_t threads = 1);

/// Components over strictly positive off-diagonal weights.
Components connected_components(const SparseMatrix& w);
/// Components of the graph whose edges are the positive off-diagonal entries
/// of a dense similarity matrix.
Components connected_components(const Eigen::MatrixXd& s_prime);

struct ConnectivityChoice {
  std::size_t k = 0;
  bool satisfied = true;  // false: k_max reached without matching components
};

/// Smallest k in [k0, k_max] whose k-NN graph has the same components as the
/// graph of all positive similarities. k_max is capped at M - 1.
ConnectivityChoice ensure_connectivity_k(const Eigen::MatrixXd& s_prime, std::size_t k0, std::size_t k_max,
                                         std::size_t threads = 1);

/// TSV `source_ip<TAB>target_ip<TAB>weight`, one undirected positive-weight
/// edge per line (i < j), self-edges omitted.
void write_edge_list(std::ostream& out, const SparseMatrix& w, std::span<const Ipv4> nodes);

}  // namespace harvnet
