#pragma once

// Coincidence matrices H and their projection onto pairwise similarities.

#include <chrono>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "harvnet/ingest.hpp"

namespace harvnet {

using SparseRowMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

enum class CoincidenceKind { kServerUsage, kTemporal };

std::string_view to_string(CoincidenceKind kind);
std::optional<CoincidenceKind> parse_coincidence_kind(std::string_view name);

/// M x N harvester-by-resource matrix.
struct CoincidenceMatrix {
  CoincidenceKind kind = CoincidenceKind::kServerUsage;
  SparseRowMatrix entries;
  std::vector<Ipv4> harvesters;  // row metadata
  /// Column metadata: server addresses (server-usage) or bin start instants
  /// (temporal).
  std::variant<std::vector<Ipv4>, std::vector<UtcTime>> columns;

  Eigen::Index rows() const { return entries.rows(); }
  Eigen::Index cols() const { return entries.cols(); }
};

/// h_ij = p_ij / (d_j * e_i): emails from harvester i through server j,
/// divided by server j's monthly total and harvester i's address count.
CoincidenceMatrix server_coincidence(const EventWindow& window);

/// h_ij = s_ij / e_i over consecutive UTC bins of `bin_width` covering the
/// whole month. Throws ConfigError unless bin_width evenly divides one day.
CoincidenceMatrix temporal_coincidence(const EventWindow& window,
                                       std::chrono::seconds bin_width = std::chrono::hours{1});

struct SimilarityMatrix {
  Eigen::MatrixXd s;        // H H^T
  Eigen::MatrixXd s_prime;  // D_S^{-1/2} S D_S^{-1/2}, unit diagonal
  Eigen::VectorXd d_s;      // diag(S)
};

/// Computes S and S'. Rows are processed in parallel (`threads` = 0 means all
/// cores); the result does not depend on the thread count. Throws
/// InvalidInputError naming the harvester of an all-zero row.
SimilarityMatrix similarity_from_coincidence(const CoincidenceMatrix& h, std::size_t threads = 1);

/// Writes `i j value` lines (0-based) for every stored entry of H.
void write_coordinate(std::ostream& out, const SparseRowMatrix& m);
/// Writes `i j value` lines for every nonzero entry of a dense matrix.
void write_coordinate(std::ostream& out, const Eigen::MatrixXd& m);

/// Reads an `i j value` file, skipping blank and '#' lines. The result has
/// at least rows x cols dimensions.
SparseRowMatrix read_coordinate(std::istream& in, Eigen::Index rows = 0, Eigen::Index cols = 0);

}  // namespace harvnet
