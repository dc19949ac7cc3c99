#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "harvnet/spectral.hpp"
#include "harvnet/validation.hpp"
#include "support.hpp"

using namespace harvnet;

namespace {

// Independent normalized-adjacency spectrum, descending.
Eigen::VectorXd direct_spectrum(const Eigen::MatrixXd& w) {
  const Eigen::VectorXd d = w.rowwise().sum();
  const Eigen::VectorXd inv = d.array().rsqrt();
  const Eigen::MatrixXd a = inv.asDiagonal() * w * inv.asDiagonal();
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a);
  return solver.eigenvalues().reverse();
}

Eigen::MatrixXd block_graph(const std::vector<int>& sizes, double within, double noise, std::mt19937_64& rng) {
  const int m = std::accumulate(sizes.begin(), sizes.end(), 0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(m, m);
  int start = 0;
  for (const int s : sizes) {
    for (int i = start; i < start + s; ++i) {
      for (int j = i + 1; j < start + s; ++j) w(i, j) = w(j, i) = within * (0.5 + 0.5 * u(rng));
    }
    start += s;
  }
  if (noise > 0) {
    for (int i = 0; i < m; ++i) {
      for (int j = i + 1; j < m; ++j) {
        if (w(i, j) == 0.0 && u(rng) < 0.2) w(i, j) = w(j, i) = noise * u(rng);
      }
    }
  }
  w.diagonal().setOnes();
  return w;
}

std::vector<std::size_t> block_labels(const std::vector<int>& sizes) {
  std::vector<std::size_t> out;
  for (std::size_t b = 0; b < sizes.size(); ++b) out.insert(out.end(), sizes[b], b);
  return out;
}

}  // namespace

TEST_CASE("identity graph has an all-one spectrum") {
  const auto sol = eigendecompose(testing::to_sparse(Eigen::MatrixXd::Identity(6, 6)), 6);
  for (int i = 0; i < 6; ++i) CHECK(sol.eigenvalues[i] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("two disjoint blocks have eigenvalue 1 twice") {
  std::mt19937_64 rng(1);
  const auto w = block_graph({5, 7}, 1.0, 0.0, rng);
  const auto sol = eigendecompose(testing::to_sparse(w), 3);
  CHECK(sol.eigenvalues[0] == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(sol.eigenvalues[1] == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(sol.eigenvalues[2] < 1.0 - 1e-6);
}

TEST_CASE("triangle with self-edges matches a direct dense solve") {
  const Eigen::MatrixXd w = Eigen::MatrixXd::Ones(3, 3);
  const auto sol = eigendecompose(testing::to_sparse(w), 3);
  const auto expected = direct_spectrum(w);
  for (int i = 0; i < 3; ++i) CHECK(sol.eigenvalues[i] == doctest::Approx(expected[i]).epsilon(1e-12));
  CHECK(sol.eigenvalues[0] == doctest::Approx(1.0));
  CHECK(std::abs(sol.eigenvalues[1]) < 1e-12);
  CHECK(std::abs(sol.eigenvalues[2]) < 1e-12);
}

TEST_CASE("spectrum bounds, orthonormality and generalized eigenvectors") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const int m = 2 + static_cast<int>(rng() % 40);
    const auto w = testing::random_graph(rng, m, 0.3);
    const auto sp = testing::to_sparse(w);
    const auto sol = eigendecompose(sp, m);
    const auto expected = direct_spectrum(w);
    CHECK((sol.eigenvalues - expected).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(sol.eigenvalues.maxCoeff() <= 1.0 + 1e-10);
    CHECK(sol.eigenvalues.minCoeff() >= -1.0 - 1e-10);
    CHECK(sol.eigenvalues[0] == doctest::Approx(1.0).epsilon(1e-10));
    const Eigen::MatrixXd gram = sol.eigenvectors.transpose() * sol.eigenvectors;
    CHECK((gram - Eigen::MatrixXd::Identity(m, m)).cwiseAbs().maxCoeff() <= 1e-10);
    // Multiplicity of eigenvalue 1 equals the number of components.
    const auto comps = connected_components(sp);
    int ones = 0;
    for (int i = 0; i < m; ++i) ones += sol.eigenvalues[i] > 1.0 - 1e-9;
    CHECK(ones == static_cast<int>(comps.count));
    // W y = lambda D y for the generalized vectors.
    const Eigen::MatrixXd y = sol.generalized_eigenvectors(m);
    const Eigen::VectorXd d = w.rowwise().sum();
    for (int i = 0; i < m; ++i) {
      CHECK((w * y.col(i) - sol.eigenvalues[i] * d.asDiagonal() * y.col(i)).norm() <= 1e-9);
    }
  }
}

TEST_CASE("iterative solver agrees with the dense one") {
  std::mt19937_64 rng(3);
  for (const int m : {60, 150, 320}) {
    auto w = block_graph({m / 4, m / 4, m / 4, m - 3 * (m / 4)}, 1.0, 0.3, rng);
    const auto sp = testing::to_sparse(w);
    const std::size_t want = 8;
    const auto dense = eigendecompose_dense(sp, want);
    const auto iter = eigendecompose_iterative(sp, want);
    REQUIRE(iter.eigenvalues.size() == static_cast<Eigen::Index>(want));
    CHECK((dense.eigenvalues - iter.eigenvalues).cwiseAbs().maxCoeff() <= 1e-8);
    // Same invariant subspace; the residual meets the tolerance.
    const Eigen::VectorXd d = w.rowwise().sum();
    const Eigen::VectorXd inv = d.array().rsqrt();
    const Eigen::MatrixXd a = inv.asDiagonal() * w * inv.asDiagonal();
    for (std::size_t i = 0; i < want; ++i) {
      const auto v = iter.eigenvectors.col(static_cast<Eigen::Index>(i));
      CHECK((a * v - iter.eigenvalues[static_cast<Eigen::Index>(i)] * v).norm() <= 1e-7);
    }
    const Eigen::MatrixXd overlap = dense.eigenvectors.transpose() * iter.eigenvectors;
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(overlap);
    CHECK(svd.singularValues().minCoeff() >= 1.0 - 1e-6);
  }
}

TEST_CASE("iterative path handles a degenerate top eigenvalue") {
  std::mt19937_64 rng(4);
  const auto w = block_graph(std::vector<int>(6, 30), 1.0, 0.0, rng);  // six components
  const auto iter = eigendecompose_iterative(testing::to_sparse(w), 8);
  for (int i = 0; i < 6; ++i) CHECK(iter.eigenvalues[i] == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(iter.eigenvalues[6] < 1.0 - 1e-6);
}

TEST_CASE("eigendecompose input validation") {
  const Eigen::MatrixXd w = Eigen::MatrixXd::Ones(3, 3);
  CHECK_THROWS_AS(eigendecompose(testing::to_sparse(w), 0), InvalidInputError);
  CHECK_THROWS_AS(eigendecompose(testing::to_sparse(w), 4), InvalidInputError);
  Eigen::MatrixXd z = w;
  z.row(2).setZero();
  z.col(2).setZero();
  CHECK_THROWS_AS(eigendecompose(testing::to_sparse(z), 2), InvalidInputError);
}

TEST_CASE("eigengap choice") {
  Eigen::VectorXd e(5);
  e << 1.0, 1.0, 0.99, 0.4, 0.35;
  CHECK(eigengap_choose_k(e, 5) == 3);
  Eigen::VectorXd f(3);
  f << 1.0, 0.2, 0.19;
  CHECK(eigengap_choose_k(f, 3) == 1);
  Eigen::VectorXd one(1);
  one << 1.0;
  CHECK_THROWS_AS(eigengap_choose_k(one, 5), InvalidInputError);
  // K_max bounds the search: K < K_max.
  CHECK(eigengap_choose_k(e, 3) == 2);
  // Ties resolve to the smallest K.
  Eigen::VectorXd t(5);
  t << 1.0, 0.7, 0.7, 0.4, 0.3;
  CHECK(eigengap_choose_k(t, 5) == 1);
  // The floor excludes gaps deep in the spectrum.
  Eigen::VectorXd deep(5);
  deep << 1.0, 0.95, 0.45, 0.44, -0.9;
  CHECK(eigengap_choose_k(deep, 5) == 2);
  CHECK(eigengap_choose_k(deep, 5, -1.0) == 4);

  std::mt19937_64 rng(5);
  const auto w = block_graph({6, 6, 6, 6, 6}, 1.0, 0.0, rng);
  const auto sol = eigendecompose(testing::to_sparse(w), 10);
  CHECK(eigengap_choose_k(sol.eigenvalues, 10) == 5);
}

TEST_CASE("continuous partition rows") {
  std::mt19937_64 rng(6);
  const auto w = block_graph({8, 12}, 1.0, 0.0, rng);
  const auto sol = eigendecompose(testing::to_sparse(w), 2);
  const auto z = continuous_partition(sol, 2);
  for (int i = 0; i < z.rows(); ++i) CHECK(z.row(i).norm() == doctest::Approx(1.0).epsilon(1e-12));
  std::vector<Eigen::RowVector2d> distinct;
  for (int i = 0; i < z.rows(); ++i) {
    const Eigen::RowVector2d r = z.row(i);
    if (std::none_of(distinct.begin(), distinct.end(), [&](const auto& d) { return (d - r).norm() < 1e-9; })) {
      distinct.push_back(r);
    }
  }
  CHECK(distinct.size() == 2);

  // K = 1 on a connected graph: every row is (1).
  const auto connected = block_graph({20}, 1.0, 0.0, rng);
  const auto z1 = continuous_partition(eigendecompose(testing::to_sparse(connected), 1), 1);
  for (int i = 0; i < z1.rows(); ++i) CHECK(z1(i, 0) == doctest::Approx(1.0).epsilon(1e-12));

  const auto noisy = block_graph({10, 10}, 1.0, 0.1, rng);
  const auto zn = continuous_partition(eigendecompose(testing::to_sparse(noisy), 2), 2);
  for (int b = 0; b < 2; ++b) {
    for (int i = 10 * b; i < 10 * b + 10; ++i) {
      for (int j = i + 1; j < 10 * b + 10; ++j) CHECK(zn.row(i).dot(zn.row(j)) >= 0.99);
    }
  }
  CHECK_THROWS_AS(continuous_partition(sol, 3), InvalidInputError);
}

TEST_CASE("discretize: indicator fixed point and K = 1") {
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(6, 3);
  const int cls[6] = {2, 0, 1, 1, 2, 0};
  for (int i = 0; i < 6; ++i) z(i, cls[i]) = 1.0;
  const auto d = discretize(z);
  CHECK(d.objective.size() <= 2);
  const std::vector<std::size_t> expected{0, 1, 2, 2, 0, 1};  // canonical relabeling of cls
  CHECK(d.partition.assignment == expected);
  CHECK(d.partition.k == 3);

  const auto one = discretize(Eigen::MatrixXd::Ones(5, 1));
  CHECK(one.partition.assignment == std::vector<std::size_t>(5, 0));
  CHECK(one.partition.k == 1);
}

TEST_CASE("discretize recovers an exact 3-block partition") {
  std::mt19937_64 rng(8);
  const std::vector<int> sizes{7, 5, 9};
  const auto w = block_graph(sizes, 1.0, 0.0, rng);
  const auto sol = eigendecompose(testing::to_sparse(w), 3);
  const auto d = discretize(continuous_partition(sol, 3));
  CHECK(adjusted_rand_index(block_labels(sizes), d.partition.assignment) == 1.0);
}

TEST_CASE("discretize objective is monotone and the rotation orthogonal") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const auto w = block_graph({6, 8, 10, 7}, 1.0, 0.6, rng);
    const auto z = continuous_partition(eigendecompose(testing::to_sparse(w), 4), 4);
    const auto d = discretize(z);
    for (std::size_t i = 1; i < d.objective.size(); ++i) CHECK(d.objective[i] >= d.objective[i - 1] - 1e-12);
    const Eigen::MatrixXd rtr = d.rotation.transpose() * d.rotation;
    CHECK((rtr - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() <= 1e-10);
    const auto sizes = d.partition.cluster_sizes();
    CHECK(std::all_of(sizes.begin(), sizes.end(), [](auto s) { return s > 0; }));
    const Eigen::MatrixXd x = d.partition.indicator();
    CHECK(x.rowwise().sum() == Eigen::VectorXd::Ones(x.rows()));
  }
}

TEST_CASE("discretize rejects more clusters than nodes") {
  CHECK_THROWS_AS(discretize(Eigen::MatrixXd::Identity(2, 3)), InvalidInputError);
}

TEST_CASE("knassoc values") {
  std::mt19937_64 rng(10);
  const std::vector<int> sizes{4, 3, 5};
  const auto w = block_graph(sizes, 1.0, 0.0, rng);
  Partition blocks{block_labels(sizes), 3};
  CHECK(knassoc(testing::to_sparse(w), blocks) == doctest::Approx(1.0).epsilon(1e-14));
  Partition all{std::vector<std::size_t>(12, 0), 1};
  const auto noisy = block_graph(sizes, 1.0, 0.5, rng);
  CHECK(knassoc(testing::to_sparse(noisy), all) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK_THROWS_AS(knassoc(testing::to_sparse(noisy), Partition{std::vector<std::size_t>(12, 0), 2}),
                  InvalidInputError);
}

TEST_CASE("knassoc matches the direct formula and the relaxation bound on 8-node graphs") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const int m = 8;
    const auto w = testing::random_graph(rng, m, 0.5);
    const auto sp = testing::to_sparse(w);
    const auto sol = eigendecompose(sp, 2);
    const double bound = (sol.eigenvalues[0] + sol.eigenvalues[1]) / 2.0;
    double best = -1.0;
    for (unsigned mask = 1; mask < (1u << (m - 1)); ++mask) {  // node 7 fixed in cluster 0
      std::vector<std::size_t> a(m);
      for (int i = 0; i < m; ++i) a[i] = (mask >> i) & 1u;
      const Partition p{a, 2};
      const double v = knassoc(sp, p);
      CHECK(v == doctest::Approx(testing::knassoc_oracle(w, a, 2)).epsilon(1e-12));
      CHECK(v <= bound + 1e-9);
      best = std::max(best, v);
    }
    const auto part = spectral_partition(sp, 2);
    CHECK(knassoc(sp, part) <= best + 1e-12);
  }
}

TEST_CASE("two-way partition is near the exhaustive optimum on most graphs with M <= 10") {
  std::mt19937_64 rng(2024);
  int near = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int m = 6 + static_cast<int>(rng() % 5);  // 6..10
    auto w = testing::random_graph(rng, m, 0.5);
    // spectral splits only ever run on one connected component
    for (auto c = testing::dfs_components(w); *std::max_element(c.begin(), c.end()) > 0;
         c = testing::dfs_components(w)) {
      w = testing::random_graph(rng, m, 0.5);
    }
    double best = 0.0;
    for (unsigned mask = 1; mask < (1u << (m - 1)); ++mask) {
      std::vector<std::size_t> a(m);
      for (int i = 0; i < m; ++i) a[i] = (mask >> i) & 1u;
      best = std::max(best, testing::knassoc_oracle(w, a, 2));
    }
    const auto part = spectral_partition(testing::to_sparse(w), 2);
    near += testing::knassoc_oracle(w, part.assignment, 2) >= 0.95 * best;
  }
  MESSAGE("near-optimal on " << near << "/100");
  CHECK(near >= 90);
}

TEST_CASE("cluster: small components stay whole") {
  std::mt19937_64 rng(13);
  const auto w = block_graph({3, 2, 4, 1, 5}, 1.0, 0.0, rng);
  AdjacencyGraph g{testing::to_sparse(w), 1, {}};
  g.components = connected_components(g.w);
  const auto c = cluster(g);
  CHECK(c.partition.k == 5);
  CHECK(c.partition.assignment == block_labels({3, 2, 4, 1, 5}));
  for (const auto& comp : c.components) CHECK_FALSE(comp.spectral);
}

TEST_CASE("cluster: one 40-node 4-block component plus two pairs") {
  std::mt19937_64 rng(14);
  auto big = block_graph({10, 10, 10, 10}, 1.0, 0.0, rng);
  // Connect the blocks weakly so they form one component.
  for (int b = 0; b < 3; ++b) big(10 * b + 9, 10 * b + 10) = big(10 * b + 10, 10 * b + 9) = 0.01;
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(44, 44);
  w.topLeftCorner(40, 40) = big;
  w.block(40, 40, 2, 2).setOnes();
  w.block(42, 42, 2, 2).setOnes();
  AdjacencyGraph g{testing::to_sparse(w), 1, {}};
  g.components = connected_components(g.w);
  REQUIRE(g.components.count == 3);
  const auto c = cluster(g);
  CHECK(c.partition.k == 6);
  CHECK(adjusted_rand_index(block_labels({10, 10, 10, 10, 2, 2}), c.partition.assignment) == 1.0);
  CHECK(c.components[0].spectral);
  CHECK(c.components[0].k == 4);

  ClusterOptions seven;
  seven.k = 7;
  const auto c7 = cluster(g, seven);
  std::set<std::size_t> ids;
  for (int i = 0; i < 40; ++i) ids.insert(c7.partition.assignment[i]);
  CHECK(ids.size() == 7);
  CHECK(c7.partition.k == 9);
}

TEST_CASE("cluster is invariant to node permutation and thread count") {
  std::mt19937_64 rng(15);
  for (int trial = 0; trial < 10; ++trial) {
    const auto w = block_graph({12, 15, 11}, 1.0, 0.5, rng);
    const int m = static_cast<int>(w.rows());
    std::vector<int> perm(m);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Eigen::MatrixXd pw(m, m);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < m; ++j) pw(i, j) = w(perm[i], perm[j]);
    }
    AdjacencyGraph g{testing::to_sparse(w), 1, {}};
    g.components = connected_components(g.w);
    AdjacencyGraph pg{testing::to_sparse(pw), 1, {}};
    pg.components = connected_components(pg.w);
    const auto a = cluster(g);
    const auto b = cluster(pg);
    std::vector<std::size_t> back(m);
    for (int i = 0; i < m; ++i) back[perm[i]] = b.partition.assignment[i];
    CHECK(adjusted_rand_index(a.partition.assignment, back) == doctest::Approx(1.0));

    ClusterOptions threaded;
    threaded.threads = 4;
    CHECK(cluster(g, threaded).partition.assignment == a.partition.assignment);
  }
}
