#include <doctest.h>

#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "harvnet/graph.hpp"
#include "support.hpp"

using namespace harvnet;

namespace {

std::set<std::pair<int, int>> edge_set(const SparseMatrix& w) {
  std::set<std::pair<int, int>> out;
  for (int c = 0; c < w.outerSize(); ++c) {
    for (SparseMatrix::InnerIterator it(w, c); it; ++it) {
      if (it.row() < it.col()) out.emplace(static_cast<int>(it.row()), static_cast<int>(it.col()));
    }
  }
  return out;
}

Eigen::MatrixXd random_similarity(std::mt19937_64& rng, int m, double zero_fraction) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixXd s = Eigen::MatrixXd::Identity(m, m);
  for (int i = 0; i < m; ++i) {
    for (int j = i + 1; j < m; ++j) s(i, j) = s(j, i) = u(rng) < zero_fraction ? 0.0 : u(rng);
  }
  return s;
}

// Brute force: smallest k >= k0 whose k-NN graph has the target components.
std::size_t brute_force_k(const Eigen::MatrixXd& s, std::size_t k0) {
  const auto target = testing::dfs_components(s);
  for (std::size_t k = k0; k < static_cast<std::size_t>(s.rows()); ++k) {
    const auto g = knn_graph(s, k);
    if (testing::dfs_components(Eigen::MatrixXd(g.w)) == target) return k;
  }
  return s.rows() - 1;
}

}  // namespace

TEST_CASE("default k is the ceiling of ln M, capped at M - 1") {
  CHECK(default_k(1000) == 7);
  CHECK(default_k(2) == 1);
  CHECK(default_k(3) == 2);
  CHECK(default_k(200) == 6);
  CHECK_THROWS_AS(default_k(1), InvalidInputError);
  CHECK_THROWS_AS(default_k(0), InvalidInputError);
}

TEST_CASE("zero similarities give weightless edges and M components") {
  const Eigen::MatrixXd s = Eigen::MatrixXd::Identity(5, 5);
  const auto g = knn_graph(s, 1);
  CHECK(g.components.count == 5);
  CHECK(g.w.nonZeros() > 5);  // selected zero-weight edges are still stored
  for (int i = 0; i < 5; ++i) CHECK(g.w.coeff(i, i) == 1.0);
}

TEST_CASE("duplicate nodes share a unit edge") {
  Eigen::MatrixXd s(3, 3);
  s << 1, 1, 0.2, 1, 1, 0.2, 0.2, 0.2, 1;
  const auto g = knn_graph(s, 1);
  CHECK(g.w.coeff(0, 1) == 1.0);
  CHECK(g.w.coeff(1, 0) == 1.0);
}

TEST_CASE("union symmetrization keeps both strong pairs") {
  Eigen::MatrixXd s(4, 4);
  // Nodes 1..4 of the example map to 0..3.
  s << 1, 0.9, 0.8, 0.1,  //
      0.9, 1, 0.2, 0.3,   //
      0.8, 0.2, 1, 0.9,   //
      0.1, 0.3, 0.9, 1;
  const auto g = knn_graph(s, 1);
  const auto edges = edge_set(g.w);
  CHECK(edges.count({0, 1}));
  CHECK(edges.count({2, 3}));
  CHECK(edges.size() == 2);
  CHECK(g.w.coeff(0, 1) == 0.9);
  CHECK(g.w.coeff(3, 2) == 0.9);
}

TEST_CASE("ties go to the lower index") {
  Eigen::MatrixXd s = Eigen::MatrixXd::Constant(4, 4, 0.5);
  s.diagonal().setOnes();
  const auto g = knn_graph(s, 1);
  // Node 0 picks 1; nodes 1, 2, 3 all pick 0.
  CHECK(edge_set(g.w) == std::set<std::pair<int, int>>{{0, 1}, {0, 2}, {0, 3}});
}

TEST_CASE("k outside [1, M-1] is rejected") {
  const Eigen::MatrixXd s = Eigen::MatrixXd::Identity(3, 3);
  CHECK_THROWS_AS(knn_graph(s, 0), InvalidInputError);
  CHECK_THROWS_AS(knn_graph(s, 3), InvalidInputError);
}

TEST_CASE("k-NN graph invariants on random similarities") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 40; ++trial) {
    const int m = 3 + static_cast<int>(rng() % 25);
    const auto s = random_similarity(rng, m, 0.3);
    const std::size_t k = 1 + rng() % (m - 1);
    const auto g = knn_graph(s, k);
    const Eigen::MatrixXd w(g.w);
    CHECK(w == w.transpose());
    CHECK(w.diagonal() == Eigen::VectorXd::Ones(m));
    std::vector<std::size_t> degree(m, 0);
    for (const auto& [a, b] : edge_set(g.w)) {
      ++degree[a];
      ++degree[b];
      CHECK(w(a, b) == s(a, b));
    }
    for (int i = 0; i < m; ++i) CHECK(degree[i] >= k);
    CHECK(g.components.label == testing::dfs_components(w));

    // Strictly monotone transform of the off-diagonals keeps the neighbor sets.
    Eigen::MatrixXd t = s.array().square().matrix();
    t.diagonal().setOnes();
    CHECK(edge_set(knn_graph(t, k).w) == edge_set(g.w));

    // Dropping self-edges changes no components.
    Eigen::MatrixXd no_self = w;
    no_self.diagonal().setZero();
    CHECK(testing::dfs_components(no_self) == g.components.label);

    // Threads do not change the graph.
    CHECK(Eigen::MatrixXd(knn_graph(s, k, 3).w) == w);
  }
}

TEST_CASE("connected components against a DFS oracle") {
  Eigen::MatrixXd blocks = Eigen::MatrixXd::Zero(5, 5);
  blocks.topLeftCorner(3, 3).setConstant(0.5);
  blocks.bottomRightCorner(2, 2).setConstant(0.5);
  CHECK(connected_components(testing::to_sparse(blocks)).count == 2);
  CHECK(connected_components(testing::to_sparse(Eigen::MatrixXd::Constant(4, 4, 0.1))).count == 1);

  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const int m = 1 + static_cast<int>(rng() % 30);
    const auto w = testing::random_graph(rng, m, 2.0 / m);
    const auto c = connected_components(testing::to_sparse(w));
    CHECK(c.label == testing::dfs_components(w));
    CHECK(connected_components(w).label == c.label);
  }
}

TEST_CASE("connectivity repair on a 6-node chain") {
  // Chain 0-1-2-3-4-5 with strong local similarities; k = 1 splits it.
  Eigen::MatrixXd s = Eigen::MatrixXd::Identity(6, 6);
  const double link[5] = {0.9, 0.3, 0.8, 0.2, 0.7};
  for (int i = 0; i < 5; ++i) s(i, i + 1) = s(i + 1, i) = link[i];
  // A weak long-range similarity that k-NN never prefers.
  s(0, 5) = s(5, 0) = 0.05;
  REQUIRE(connected_components(s).count == 1);
  CHECK(connected_components(knn_graph(s, 1).w).count > 1);
  const auto expected = brute_force_k(s, 1);
  const auto choice = ensure_connectivity_k(s, 1, 5);
  CHECK(choice.satisfied);
  CHECK(choice.k == expected);
  CHECK(connected_components(knn_graph(s, choice.k).w).count == 1);
}

TEST_CASE("connectivity repair keeps genuine components apart and returns k0 when enough") {
  Eigen::MatrixXd s = Eigen::MatrixXd::Identity(9, 9);
  for (int b = 0; b < 3; ++b) s.block(3 * b, 3 * b, 3, 3).setConstant(0.6 + 0.1 * b);
  s.diagonal().setOnes();
  const auto choice = ensure_connectivity_k(s, 2, 8);
  CHECK(choice.k == 2);
  CHECK(choice.satisfied);
  CHECK(connected_components(knn_graph(s, 2).w).count == 3);

  const Eigen::MatrixXd full = Eigen::MatrixXd::Constant(5, 5, 0.3) + 0.7 * Eigen::MatrixXd::Identity(5, 5);
  CHECK(ensure_connectivity_k(full, 4, 4).k == 4);
}

TEST_CASE("connectivity repair matches brute force and is monotone in k0") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 40; ++trial) {
    const int m = 3 + static_cast<int>(rng() % 14);
    const auto s = random_similarity(rng, m, 0.6);
    std::size_t previous = 0;
    for (std::size_t k0 = 1; k0 < static_cast<std::size_t>(m); ++k0) {
      const auto choice = ensure_connectivity_k(s, k0, m - 1);
      CHECK(choice.k == brute_force_k(s, k0));
      CHECK(choice.k >= previous);
      previous = choice.k;
    }
  }
}

TEST_CASE("connectivity repair flags an unreachable limit") {
  Eigen::MatrixXd s = Eigen::MatrixXd::Identity(6, 6);
  const double link[5] = {0.9, 0.3, 0.8, 0.2, 0.7};
  for (int i = 0; i < 5; ++i) s(i, i + 1) = s(i + 1, i) = link[i];
  REQUIRE(connected_components(knn_graph(s, 1).w).count > 1);
  const auto limited = ensure_connectivity_k(s, 1, 1);
  CHECK_FALSE(limited.satisfied);
  CHECK(limited.k == 1);
}

TEST_CASE("edge list export omits self-edges and zero weights") {
  Eigen::MatrixXd w(3, 3);
  w << 1, 0.5, 0, 0.5, 1, 0.25, 0, 0.25, 1;
  const std::vector<Ipv4> nodes{testing::ip("10.0.0.1"), testing::ip("10.0.0.2"), testing::ip("10.0.0.3")};
  std::ostringstream out;
  write_edge_list(out, testing::to_sparse(w), nodes);
  CHECK(out.str() == "10.0.0.1\t10.0.0.2\t0.5\n10.0.0.2\t10.0.0.3\t0.25\n");
}
