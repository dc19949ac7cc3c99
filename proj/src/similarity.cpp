#include "harvnet/similarity.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "harvnet/parallel.hpp"

namespace harvnet {

std::string_view to_string(CoincidenceKind kind) {
  return kind == CoincidenceKind::kServerUsage ? "server-usage" : "temporal";
}

std::optional<CoincidenceKind> parse_coincidence_kind(std::string_view name) {
  if (name == "server-usage") return CoincidenceKind::kServerUsage;
  if (name == "temporal") return CoincidenceKind::kTemporal;
  return std::nullopt;
}

CoincidenceMatrix server_coincidence(const EventWindow& window) {
  const auto m = static_cast<Eigen::Index>(window.num_harvesters());
  const auto n = static_cast<Eigen::Index>(window.num_servers());

  // p_ij accumulates through duplicate triplets.
  std::vector<Eigen::Triplet<double>> counts;
  counts.reserve(window.events.size());
  std::vector<double> server_totals(window.num_servers(), 0.0);
  for (std::size_t e = 0; e < window.events.size(); ++e) {
    counts.emplace_back(static_cast<Eigen::Index>(window.event_harvester[e]),
                        static_cast<Eigen::Index>(window.event_server[e]), 1.0);
    server_totals[window.event_server[e]] += 1.0;
  }
  SparseRowMatrix h(m, n);
  h.setFromTriplets(counts.begin(), counts.end());
  for (Eigen::Index i = 0; i < h.outerSize(); ++i) {
    const double e_i = static_cast<double>(window.addresses_acquired[static_cast<std::size_t>(i)]);
    for (SparseRowMatrix::InnerIterator it(h, i); it; ++it) {
      it.valueRef() = it.value() / (server_totals[static_cast<std::size_t>(it.col())] * e_i);
    }
  }
  return {CoincidenceKind::kServerUsage, std::move(h), window.harvesters, window.servers};
}

CoincidenceMatrix temporal_coincidence(const EventWindow& window, std::chrono::seconds bin_width) {
  using namespace std::chrono;
  if (bin_width <= seconds{0} || seconds{days{1}}.count() % bin_width.count() != 0) {
    throw ConfigError("temporal bin width must evenly divide 24 hours");
  }
  const auto m = static_cast<Eigen::Index>(window.num_harvesters());
  const auto n = static_cast<Eigen::Index>(window.month.length() / bin_width);
  const UtcTime start = window.month.begin();

  std::vector<Eigen::Triplet<double>> counts;
  counts.reserve(window.events.size());
  for (std::size_t e = 0; e < window.events.size(); ++e) {
    const auto bin = static_cast<Eigen::Index>((window.events[e].timestamp - start) / bin_width);
    counts.emplace_back(static_cast<Eigen::Index>(window.event_harvester[e]), bin, 1.0);
  }
  SparseRowMatrix h(m, n);
  h.setFromTriplets(counts.begin(), counts.end());
  for (Eigen::Index i = 0; i < h.outerSize(); ++i) {
    const double e_i = static_cast<double>(window.addresses_acquired[static_cast<std::size_t>(i)]);
    for (SparseRowMatrix::InnerIterator it(h, i); it; ++it) it.valueRef() /= e_i;
  }

  std::vector<UtcTime> bins;
  bins.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < n; ++j) bins.push_back(start + bin_width * j);
  return {CoincidenceKind::kTemporal, std::move(h), window.harvesters, std::move(bins)};
}

SimilarityMatrix similarity_from_coincidence(const CoincidenceMatrix& h, std::size_t threads) {
  const Eigen::Index m = h.rows();
  for (Eigen::Index i = 0; i < m; ++i) {
    bool positive = false;
    for (SparseRowMatrix::InnerIterator it(h.entries, i); it; ++it) positive = positive || it.value() > 0.0;
    if (!positive) {
      const auto who = static_cast<std::size_t>(i) < h.harvesters.size()
                           ? h.harvesters[static_cast<std::size_t>(i)].to_string()
                           : "row " + std::to_string(i);
      throw InvalidInputError("coincidence row of harvester " + who + " is all zero");
    }
  }

  const Eigen::SparseMatrix<double, Eigen::ColMajor> by_column = h.entries;
  SimilarityMatrix out;
  out.s.resize(m, m);
  // Row i of S accumulates h_ij * h_kj over the nonzeros of row i in
  // ascending j, so S(i,k) and S(k,i) see identical products in identical
  // order and S is exactly symmetric.
  parallel_for(static_cast<std::size_t>(m), threads, [&](std::size_t row) {
    const auto i = static_cast<Eigen::Index>(row);
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(m);
    for (SparseRowMatrix::InnerIterator it(h.entries, i); it; ++it) {
      const double hij = it.value();
      for (decltype(by_column)::InnerIterator col(by_column, it.col()); col; ++col) {
        acc[col.row()] += hij * col.value();
      }
    }
    out.s.row(i) = acc.transpose();
  });

  out.d_s = out.s.diagonal();
  const Eigen::VectorXd root = out.d_s.cwiseSqrt();
  out.s_prime.resize(m, m);
  for (Eigen::Index k = 0; k < m; ++k) {
    for (Eigen::Index i = 0; i < m; ++i) {
      out.s_prime(i, k) = i == k ? 1.0 : std::clamp(out.s(i, k) / (root[i] * root[k]), 0.0, 1.0);
    }
  }
  return out;
}

void write_coordinate(std::ostream& out, const SparseRowMatrix& m) {
  out << std::setprecision(17);
  for (Eigen::Index i = 0; i < m.outerSize(); ++i) {
    for (SparseRowMatrix::InnerIterator it(m, i); it; ++it) {
      out << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
    }
  }
}

void write_coordinate(std::ostream& out, const Eigen::MatrixXd& m) {
  out << std::setprecision(17);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (m(i, j) != 0.0) out << i << ' ' << j << ' ' << m(i, j) << '\n';
    }
  }
}

SparseRowMatrix read_coordinate(std::istream& in, Eigen::Index rows, Eigen::Index cols) {
  std::vector<Eigen::Triplet<double>> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    long long i = -1, j = -1;
    double v = 0.0;
    if (!(fields >> i >> j >> v) || i < 0 || j < 0) {
      throw InvalidInputError("coordinate file line " + std::to_string(line_no) + ": expected 'i j value'");
    }
    rows = std::max<Eigen::Index>(rows, i + 1);
    cols = std::max<Eigen::Index>(cols, j + 1);
    entries.emplace_back(i, j, v);
  }
  SparseRowMatrix m(rows, cols);
  m.setFromTriplets(entries.begin(), entries.end());
  return m;
}

}  // namespace harvnet
