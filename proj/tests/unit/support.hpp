#pragma once

#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "harvnet/graph.hpp"
#include "harvnet/ingest.hpp"

namespace testing {

inline harvnet::Ipv4 ip(const char* text) { return *harvnet::Ipv4::parse(text); }
inline harvnet::UtcTime at(const char* text) { return *harvnet::parse_utc_timestamp(text); }

inline harvnet::EmailEvent event(const char* when, const char* harvester, const char* server,
                                 std::string subject = "hello", std::uint64_t delta = 0) {
  return {at(when), ip(harvester), ip(server), std::move(subject), delta};
}

inline harvnet::SparseMatrix to_sparse(const Eigen::MatrixXd& m) { return m.sparseView(0.0, 0.0); }

// Symmetric random graph with unit self-edges: each off-diagonal pair is an
// edge with probability p and weight U(0, 1).
inline Eigen::MatrixXd random_graph(std::mt19937_64& rng, int m, double p) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixXd w = Eigen::MatrixXd::Identity(m, m);
  for (int i = 0; i < m; ++i) {
    for (int j = i + 1; j < m; ++j) {
      if (u(rng) < p) w(i, j) = w(j, i) = u(rng);
    }
  }
  return w;
}

// Plain DFS over positive off-diagonal entries; labels in order of lowest node.
inline std::vector<std::size_t> dfs_components(const Eigen::MatrixXd& w) {
  const auto n = static_cast<std::size_t>(w.rows());
  std::vector<std::size_t> label(n, SIZE_MAX);
  std::size_t next = 0;
  for (std::size_t s = 0; s < n; ++s) {
    if (label[s] != SIZE_MAX) continue;
    std::vector<std::size_t> stack{s};
    label[s] = next;
    while (!stack.empty()) {
      const auto v = stack.back();
      stack.pop_back();
      for (std::size_t u = 0; u < n; ++u) {
        if (u != v && w(v, u) > 0 && label[u] == SIZE_MAX) {
          label[u] = next;
          stack.push_back(u);
        }
      }
    }
    ++next;
  }
  return label;
}

// Direct formula: (1/K) sum_k (x_k^T W x_k) / (x_k^T D x_k).
inline double knassoc_oracle(const Eigen::MatrixXd& w, const std::vector<std::size_t>& assignment, std::size_t k) {
  const Eigen::VectorXd d = w.rowwise().sum();
  double total = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(w.rows());
    for (std::size_t i = 0; i < assignment.size(); ++i) x(i) = assignment[i] == c ? 1.0 : 0.0;
    total += x.dot(w * x) / x.dot(d.asDiagonal() * x);
  }
  return total / static_cast<double>(k);
}

}  // namespace testing
