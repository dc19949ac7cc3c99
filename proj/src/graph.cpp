#include "harvnet/graph.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>

#include "harvnet/error.hpp"
#include "harvnet/parallel.hpp"

namespace harvnet {

namespace {

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n), sets_(n) { std::iota(parent_.begin(), parent_.end(), 0); }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (a > b) std::swap(a, b);
    parent_[b] = a;
    --sets_;
  }

  std::size_t sets() const noexcept { return sets_; }

  Components components() {
    Components c;
    c.label.resize(parent_.size());
    std::vector<std::size_t> id(parent_.size(), SIZE_MAX);
    for (std::size_t i = 0; i < parent_.size(); ++i) {
      const std::size_t root = find(i);
      if (id[root] == SIZE_MAX) id[root] = c.count++;
      c.label[i] = id[root];
    }
    return c;
  }

 private:
  std::vector<std::size_t> parent_;
  std::size_t sets_;
};

// Top `depth` neighbors of every node by descending similarity, ties toward
// the lower index.
std::vector<std::vector<std::size_t>> rank_neighbors(const Eigen::MatrixXd& s_prime, std::size_t depth,
                                                     std::size_t threads) {
  const auto m = static_cast<std::size_t>(s_prime.rows());
  std::vector<std::vector<std::size_t>> ranked(m);
  parallel_for(m, threads, [&](std::size_t i) {
    std::vector<std::size_t> others;
    others.reserve(m - 1);
    for (std::size_t j = 0; j < m; ++j) {
      if (j != i) others.push_back(j);
    }
    const auto col = s_prime.col(static_cast<Eigen::Index>(i));
    auto before = [&](std::size_t a, std::size_t b) {
      const double sa = col[static_cast<Eigen::Index>(a)];
      const double sb = col[static_cast<Eigen::Index>(b)];
      return sa != sb ? sa > sb : a < b;
    };
    const std::size_t keep = std::min(depth, others.size());
    std::partial_sort(others.begin(), others.begin() + static_cast<std::ptrdiff_t>(keep), others.end(), before);
    others.resize(keep);
    ranked[i] = std::move(others);
  });
  return ranked;
}

void check_square(const Eigen::MatrixXd& s_prime) {
  if (s_prime.rows() != s_prime.cols()) throw InvalidInputError("similarity matrix must be square");
}

}  // namespace

std::vector<std::vector<std::size_t>> Components::members() const {
  std::vector<std::vector<std::size_t>> out(count);
  for (std::size_t i = 0; i < label.size(); ++i) out[label[i]].push_back(i);
  return out;
}

std::size_t default_k(std::size_t num_nodes) {
  if (num_nodes < 2) throw InvalidInputError("k-NN graph needs at least 2 nodes");
  const auto k = static_cast<std::size_t>(std::ceil(std::log(static_cast<double>(num_nodes))));
  return std::min(std::max<std::size_t>(1, k), num_nodes - 1);
}

AdjacencyGraph knn_graph(const Eigen::MatrixXd& s_prime, std::size_t k, std::size_t threads) {
  check_square(s_prime);
  const auto m = static_cast<std::size_t>(s_prime.rows());
  if (k < 1 || k + 1 > m) throw InvalidInputError("k must be in [1, M-1]");

  const auto ranked = rank_neighbors(s_prime, k, threads);
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(m * (2 * k + 1));
  for (std::size_t i = 0; i < m; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    entries.emplace_back(ii, ii, 1.0);
    for (const std::size_t j : ranked[i]) {
      const auto jj = static_cast<Eigen::Index>(j);
      entries.emplace_back(ii, jj, s_prime(ii, jj));
      entries.emplace_back(jj, ii, s_prime(ii, jj));
    }
  }
  AdjacencyGraph g;
  g.k = k;
  g.w.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  // Mutually selected edges appear twice; keep one copy instead of summing.
  g.w.setFromTriplets(entries.begin(), entries.end(), [](double a, double) { return a; });
  g.components = connected_components(g.w);
  return g;
}

Components connected_components(const SparseMatrix& w) {
  DisjointSets sets(static_cast<std::size_t>(w.rows()));
  for (Eigen::Index j = 0; j < w.outerSize(); ++j) {
    for (SparseMatrix::InnerIterator it(w, j); it; ++it) {
      if (it.row() != it.col() && it.value() > 0.0) {
        sets.unite(static_cast<std::size_t>(it.row()), static_cast<std::size_t>(it.col()));
      }
    }
  }
  return sets.components();
}

Components connected_components(const Eigen::MatrixXd& s_prime) {
  check_square(s_prime);
  DisjointSets sets(static_cast<std::size_t>(s_prime.rows()));
  for (Eigen::Index j = 0; j < s_prime.cols(); ++j) {
    for (Eigen::Index i = 0; i < j; ++i) {
      if (s_prime(i, j) > 0.0 || s_prime(j, i) > 0.0) {
        sets.unite(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
      }
    }
  }
  return sets.components();
}

ConnectivityChoice ensure_connectivity_k(const Eigen::MatrixXd& s_prime, std::size_t k0, std::size_t k_max,
                                         std::size_t threads) {
  check_square(s_prime);
  if (k0 < 1) throw InvalidInputError("k0 must be at least 1");
  const auto m = static_cast<std::size_t>(s_prime.rows());
  if (m < 2) return {k0, true};
  k_max = std::min(k_max, m - 1);
  k0 = std::min(k0, k_max);

  const std::size_t target = connected_components(s_prime).count;
  const auto ranked = rank_neighbors(s_prime, k_max, threads);

  // The positive k-NN graph only uses positive similarities, so its
  // components refine the target partition; equal counts mean equal
  // partitions. Edge sets grow with k, so scan ranks incrementally.
  DisjointSets sets(m);
  for (std::size_t rank = 0; rank < k_max; ++rank) {
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t j = ranked[i][rank];
      if (s_prime(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) > 0.0) sets.unite(i, j);
    }
    const std::size_t k = rank + 1;
    if (k >= k0 && sets.sets() == target) return {k, true};
  }
  return {k_max, false};
}

void write_edge_list(std::ostream& out, const SparseMatrix& w, std::span<const Ipv4> nodes) {
  if (static_cast<std::size_t>(w.rows()) != nodes.size()) {
    throw InvalidInputError("edge list: node metadata does not match the graph size");
  }
  out << std::setprecision(17);
  for (Eigen::Index j = 0; j < w.outerSize(); ++j) {
    for (SparseMatrix::InnerIterator it(w, j); it; ++it) {
      if (it.row() < it.col() && it.value() > 0.0) {
        out << nodes[static_cast<std::size_t>(it.row())].to_string() << '\t'
            << nodes[static_cast<std::size_t>(it.col())].to_string() << '\t' << it.value() << '\n';
      }
    }
  }
}

}  // namespace harvnet
