#include "harvnet/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "harvnet/error.hpp"
#include "harvnet/parallel.hpp"

namespace harvnet {

namespace {

Eigen::VectorXd degrees_of(const SparseMatrix& w) {
  Eigen::VectorXd d = Eigen::VectorXd::Zero(w.rows());
  for (Eigen::Index j = 0; j < w.outerSize(); ++j) {
    for (SparseMatrix::InnerIterator it(w, j); it; ++it) d[it.row()] += it.value();
  }
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (!(d[i] > 0.0)) {
      throw InvalidInputError("node " + std::to_string(i) + " has non-positive degree");
    }
  }
  return d;
}

SparseMatrix normalized_adjacency(const SparseMatrix& w, const Eigen::VectorXd& degrees) {
  const Eigen::VectorXd inv_root = degrees.cwiseSqrt().cwiseInverse();
  SparseMatrix a = w;
  for (Eigen::Index j = 0; j < a.outerSize(); ++j) {
    for (SparseMatrix::InnerIterator it(a, j); it; ++it) {
      it.valueRef() *= inv_root[it.row()] * inv_root[it.col()];
    }
  }
  return a;
}

void check_request(const SparseMatrix& w, std::size_t m) {
  if (w.rows() != w.cols()) throw InvalidInputError("adjacency matrix must be square");
  if (m < 1 || m > static_cast<std::size_t>(w.rows())) {
    throw InvalidInputError("requested eigenpair count must be in [1, M]");
  }
}

// Largest-magnitude entry (lowest index on ties) made positive.
void fix_signs(Eigen::MatrixXd& vectors) {
  for (Eigen::Index c = 0; c < vectors.cols(); ++c) {
    Eigen::Index best = 0;
    for (Eigen::Index r = 1; r < vectors.rows(); ++r) {
      if (std::abs(vectors(r, c)) > std::abs(vectors(best, c)) + 1e-12) best = r;
    }
    if (vectors(best, c) < 0.0) vectors.col(c) *= -1.0;
  }
}

// Orthonormalizes the columns of `block` against `basis` and each other
// (modified Gram-Schmidt, two passes). Columns that collapse are replaced by
// fresh random directions.
void orthonormalize_against(Eigen::MatrixXd& block, const Eigen::MatrixXd& basis, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  for (Eigen::Index c = 0; c < block.cols(); ++c) {
    for (int attempt = 0;; ++attempt) {
      auto v = block.col(c);
      const double original = v.norm();
      for (int pass = 0; pass < 2; ++pass) {
        if (basis.cols() > 0) v -= basis * (basis.transpose() * v);
        for (Eigen::Index p = 0; p < c; ++p) v -= block.col(p) * block.col(p).dot(v);
      }
      const double norm = v.norm();
      if (original > 0.0 && norm > 1e-10 * original && norm > 1e-300) {
        v /= norm;
        break;
      }
      if (attempt > 8) throw ConvergenceError("could not extend the Krylov basis", {});
      for (Eigen::Index r = 0; r < v.size(); ++r) v[r] = normal(rng);
    }
  }
}

}  // namespace

Eigen::MatrixXd SpectralSolution::generalized_eigenvectors(Eigen::Index count) const {
  return degrees.cwiseSqrt().cwiseInverse().asDiagonal() * eigenvectors.leftCols(count);
}

SpectralSolution eigendecompose_dense(const SparseMatrix& w, std::size_t m) {
  check_request(w, m);
  SpectralSolution sol;
  sol.degrees = degrees_of(w);
  const Eigen::MatrixXd a = Eigen::MatrixXd(normalized_adjacency(w, sol.degrees));
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a);
  if (solver.info() != Eigen::Success) throw ConvergenceError("dense eigensolver failed", {});
  const auto count = static_cast<Eigen::Index>(m);
  sol.eigenvalues = solver.eigenvalues().tail(count).reverse();
  sol.eigenvectors = solver.eigenvectors().rightCols(count).rowwise().reverse();
  fix_signs(sol.eigenvectors);
  return sol;
}

SpectralSolution eigendecompose_iterative(const SparseMatrix& w, std::size_t m, const EigenOptions& options) {
  check_request(w, m);
  SpectralSolution sol;
  sol.degrees = degrees_of(w);
  const SparseMatrix a = normalized_adjacency(w, sol.degrees);
  const Eigen::Index n = a.rows();
  const auto wanted = static_cast<Eigen::Index>(m);
  const Eigen::Index block_size = wanted;
  const Eigen::Index capacity = std::min<Eigen::Index>(n, std::max<Eigen::Index>(3 * wanted, wanted + 20));
  if (capacity < wanted + block_size || capacity >= n) return eigendecompose_dense(w, m);
  const Eigen::Index keep = wanted + (capacity - wanted - block_size) / 2;

  std::mt19937_64 rng(0x5eedULL);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd block(n, block_size);
  for (Eigen::Index i = 0; i < block.size(); ++i) block.data()[i] = normal(rng);

  Eigen::MatrixXd basis(n, 0);
  Eigen::MatrixXd image(n, 0);  // a * basis
  std::vector<double> residuals(static_cast<std::size_t>(wanted), 0.0);

  for (std::size_t restart = 0; restart <= options.max_restarts; ++restart) {
    while (basis.cols() < capacity) {
      const Eigen::Index take = std::min(block_size, capacity - basis.cols());
      Eigen::MatrixXd fresh = block.leftCols(take);
      orthonormalize_against(fresh, basis, rng);
      const Eigen::MatrixXd fresh_image = a * fresh;
      basis.conservativeResize(Eigen::NoChange, basis.cols() + take);
      basis.rightCols(take) = fresh;
      image.conservativeResize(Eigen::NoChange, image.cols() + take);
      image.rightCols(take) = fresh_image;
      block = fresh_image;
    }

    Eigen::MatrixXd projected = basis.transpose() * image;
    projected = 0.5 * (projected + projected.transpose()).eval();
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> small(projected);
    const Eigen::VectorXd theta = small.eigenvalues().reverse();
    const Eigen::MatrixXd coeffs = small.eigenvectors().rowwise().reverse();

    const Eigen::MatrixXd ritz = basis * coeffs.leftCols(keep);
    const Eigen::MatrixXd ritz_image = image * coeffs.leftCols(keep);
    const Eigen::MatrixXd residual = ritz_image - ritz * theta.head(keep).asDiagonal();
    bool converged = true;
    for (Eigen::Index i = 0; i < wanted; ++i) {
      residuals[static_cast<std::size_t>(i)] = residual.col(i).norm();
      converged = converged && residuals[static_cast<std::size_t>(i)] <= options.tol;
    }
    if (converged) {
      sol.eigenvalues = theta.head(wanted);
      sol.eigenvectors = ritz.leftCols(wanted);
      fix_signs(sol.eigenvectors);
      return sol;
    }

    // Thick restart: keep the leading Ritz vectors, continue the Krylov
    // sequence from their residuals.
    basis = ritz;
    image = a * basis;
    block = residual.leftCols(block_size);
  }

  std::ostringstream msg;
  msg << "eigensolver did not converge after " << options.max_restarts << " restarts; residuals:";
  for (const double r : residuals) msg << ' ' << r;
  throw ConvergenceError(msg.str(), residuals);
}

SpectralSolution eigendecompose(const SparseMatrix& w, std::size_t m, const EigenOptions& options) {
  check_request(w, m);
  if (static_cast<std::size_t>(w.rows()) <= options.dense_threshold) return eigendecompose_dense(w, m);
  return eigendecompose_iterative(w, m, options);
}

std::size_t eigengap_choose_k(const Eigen::VectorXd& eigenvalues, std::size_t k_max, double lambda_floor) {
  if (eigenvalues.size() < 2) throw InvalidInputError("eigengap needs at least two eigenvalues");
  if (k_max < 1) throw ConfigError("K_max must be at least 1");
  const auto upper = std::min<std::size_t>(k_max - 1, static_cast<std::size_t>(eigenvalues.size()) - 1);
  std::size_t best = 1;
  double best_gap = -1.0;
  for (std::size_t k = 1; k <= upper; ++k) {
    const double lambda_k = eigenvalues[static_cast<Eigen::Index>(k - 1)];
    if (lambda_k < lambda_floor) continue;
    const double gap = lambda_k - eigenvalues[static_cast<Eigen::Index>(k)];
    if (gap > best_gap) {
      best_gap = gap;
      best = k;
    }
  }
  return best;
}

Eigen::MatrixXd continuous_partition(const SpectralSolution& solution, std::size_t k) {
  if (k < 1 || k > static_cast<std::size_t>(solution.eigenvectors.cols())) {
    throw InvalidInputError("K exceeds the number of available eigenpairs");
  }
  Eigen::MatrixXd z = solution.generalized_eigenvectors(static_cast<Eigen::Index>(k));
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double norm = z.row(i).norm();
    if (!(norm > 0.0)) throw InvalidInputError("zero row " + std::to_string(i) + " in the relaxed partition");
    z.row(i) /= norm;
  }
  return z;
}

Eigen::MatrixXd Partition::indicator() const {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(assignment.size()), static_cast<Eigen::Index>(k));
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(assignment[i])) = 1.0;
  }
  return x;
}

std::vector<std::size_t> Partition::cluster_sizes() const {
  std::vector<std::size_t> sizes(k, 0);
  for (const auto c : assignment) ++sizes[c];
  return sizes;
}

Partition canonical(Partition p) {
  std::vector<std::size_t> relabel(p.k, SIZE_MAX);
  std::size_t next = 0;
  for (auto& c : p.assignment) {
    if (relabel[c] == SIZE_MAX) relabel[c] = next++;
    c = relabel[c];
  }
  p.k = next;
  return p;
}

Discretization discretize(const Eigen::MatrixXd& z, const DiscretizeOptions& options) {
  const Eigen::Index n = z.rows();
  const Eigen::Index k = z.cols();
  if (n == 0 || k < 1) throw InvalidInputError("discretize needs a non-empty M x K matrix");
  if (k > n) throw InvalidInputError("cannot split fewer nodes than clusters");

  for (Eigen::Index attempt = 0; attempt <= k; ++attempt) {
    const Eigen::Index first = attempt == 0 ? 0 : std::min<Eigen::Index>(n - 1, attempt * n / (k + 1));

    Eigen::MatrixXd rotation(k, k);
    rotation.col(0) = z.row(first).transpose();
    Eigen::VectorXd closeness = Eigen::VectorXd::Zero(n);
    for (Eigen::Index j = 1; j < k; ++j) {
      closeness += (z * rotation.col(j - 1)).cwiseAbs();
      Eigen::Index pick = 0;
      for (Eigen::Index i = 1; i < n; ++i) {
        if (closeness[i] < closeness[pick]) pick = i;
      }
      rotation.col(j) = z.row(pick).transpose();
    }

    std::vector<std::size_t> assignment(static_cast<std::size_t>(n));
    std::vector<double> objective;
    double last = 0.0;
    for (std::size_t iter = 0; iter < options.max_iterations; ++iter) {
      const Eigen::MatrixXd projected = z * rotation;
      Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, k);
      for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::Index best = 0;
        for (Eigen::Index j = 1; j < k; ++j) {
          if (projected(i, j) > projected(i, best)) best = j;
        }
        x(i, best) = 1.0;
        assignment[static_cast<std::size_t>(i)] = static_cast<std::size_t>(best);
      }
      const Eigen::JacobiSVD<Eigen::MatrixXd> svd(x.transpose() * z, Eigen::ComputeFullU | Eigen::ComputeFullV);
      const double value = svd.singularValues().sum();
      objective.push_back(value);
      if (std::abs(value - last) < options.tol) break;
      last = value;
      rotation = svd.matrixV() * svd.matrixU().transpose();
    }

    Partition p{std::move(assignment), static_cast<std::size_t>(k)};
    const auto sizes = p.cluster_sizes();
    if (std::find(sizes.begin(), sizes.end(), 0) != sizes.end()) continue;
    return {canonical(std::move(p)), std::move(rotation), std::move(objective), static_cast<std::size_t>(attempt)};
  }
  throw DegeneratePartitionError("discretization produced an empty cluster after " + std::to_string(k) +
                                 " restarts");
}

double knassoc(const SparseMatrix& w, const Partition& partition) {
  if (static_cast<std::size_t>(w.rows()) != partition.size()) {
    throw InvalidInputError("partition size does not match the graph");
  }
  if (partition.k == 0) throw InvalidInputError("partition has no clusters");
  std::vector<double> links(partition.k, 0.0);
  std::vector<double> degree(partition.k, 0.0);
  for (Eigen::Index j = 0; j < w.outerSize(); ++j) {
    for (SparseMatrix::InnerIterator it(w, j); it; ++it) {
      const auto ci = partition.assignment[static_cast<std::size_t>(it.row())];
      degree[ci] += it.value();
      if (ci == partition.assignment[static_cast<std::size_t>(it.col())]) links[ci] += it.value();
    }
  }
  double total = 0.0;
  for (std::size_t c = 0; c < partition.k; ++c) {
    if (!(degree[c] > 0.0)) throw InvalidInputError("cluster " + std::to_string(c) + " has zero degree");
    total += links[c] / degree[c];
  }
  return total / static_cast<double>(partition.k);
}

namespace {

SparseMatrix submatrix(const SparseMatrix& w, const std::vector<std::size_t>& nodes) {
  std::vector<Eigen::Index> local(static_cast<std::size_t>(w.rows()), -1);
  for (std::size_t i = 0; i < nodes.size(); ++i) local[nodes[i]] = static_cast<Eigen::Index>(i);
  std::vector<Eigen::Triplet<double>> entries;
  for (const std::size_t node : nodes) {
    for (SparseMatrix::InnerIterator it(w, static_cast<Eigen::Index>(node)); it; ++it) {
      const Eigen::Index r = local[static_cast<std::size_t>(it.row())];
      if (r >= 0) entries.emplace_back(r, local[node], it.value());
    }
  }
  const auto size = static_cast<Eigen::Index>(nodes.size());
  SparseMatrix sub(size, size);
  sub.setFromTriplets(entries.begin(), entries.end());
  return sub;
}

Partition partition_from_solution(const SpectralSolution& solution, std::size_t k, const ClusterOptions& options) {
  if (k == 1) return {std::vector<std::size_t>(static_cast<std::size_t>(solution.degrees.size()), 0), 1};
  return discretize(continuous_partition(solution, k), options.discretize).partition;
}

}  // namespace

Partition spectral_partition(const SparseMatrix& w, std::size_t k, const ClusterOptions& options) {
  if (k < 1 || k > static_cast<std::size_t>(w.rows())) throw ConfigError("K must be in [1, M]");
  return partition_from_solution(eigendecompose(w, k, options.eigen), k, options);
}

Clustering cluster(const AdjacencyGraph& graph, const ClusterOptions& options) {
  const auto m = static_cast<std::size_t>(graph.size());
  if (options.k && *options.k < 1) throw ConfigError("K must be at least 1");

  Clustering result;
  result.component_of = graph.components.label;
  auto members = graph.components.members();
  result.components.resize(members.size());

  std::vector<Partition> local(members.size());
  parallel_for(members.size(), options.threads, [&](std::size_t c) {
    auto& comp = result.components[c];
    comp.nodes = std::move(members[c]);
    const std::size_t size = comp.nodes.size();
    if (size < options.min_component_size || size < 2) {
      comp.k = 1;
      local[c] = {std::vector<std::size_t>(size, 0), 1};
      return;
    }
    comp.spectral = true;
    const SparseMatrix sub = submatrix(graph.w, comp.nodes);
    std::size_t k;
    SpectralSolution solution;
    if (options.k) {
      k = *options.k;
      if (k > size) {
        throw ConfigError("K = " + std::to_string(k) + " exceeds the size of a " + std::to_string(size) +
                          "-node component");
      }
      solution = eigendecompose(sub, k, options.eigen);
    } else {
      const std::size_t wanted = std::min(size, std::max<std::size_t>(2, options.k_max));
      solution = eigendecompose(sub, wanted, options.eigen);
      k = eigengap_choose_k(solution.eigenvalues, options.k_max, options.lambda_floor);
    }
    comp.eigenvalues = solution.eigenvalues;
    comp.k = k;
    local[c] = partition_from_solution(solution, k, options);
  });

  result.partition.assignment.assign(m, 0);
  std::size_t offset = 0;
  for (std::size_t c = 0; c < result.components.size(); ++c) {
    auto& comp = result.components[c];
    comp.first_cluster = offset;
    for (std::size_t i = 0; i < comp.nodes.size(); ++i) {
      result.partition.assignment[comp.nodes[i]] = offset + local[c].assignment[i];
    }
    offset += comp.k;
  }
  result.partition.k = offset;
  return result;
}

}  // namespace harvnet
