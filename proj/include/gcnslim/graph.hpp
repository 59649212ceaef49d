#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gcnslim/dataset.hpp"
#include "gcnslim/parallel.hpp"

namespace gcnslim {

template <typename Real>
using DenseMatrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Real>
using DenseVector = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

// Compressed sparse rows with a fixed (sorted) column order per row, so that
// row-parallel products accumulate in the same order no matter how many
// threads run them.
template <typename Real>
struct CsrMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<std::int64_t> row_ptr;  // size rows+1
  std::vector<int> col_idx;
  std::vector<Real> values;

  DenseMatrix<Real> multiply(const DenseMatrix<Real>& x) const {
    if (static_cast<int>(x.rows()) != cols)
      throw std::invalid_argument("CsrMatrix::multiply: dimension mismatch");
    DenseMatrix<Real> out(rows, x.cols());
#pragma omp parallel for schedule(static)
    for (int r = 0; r < rows; ++r) {
      out.row(r).setZero();
      for (std::int64_t p = row_ptr[static_cast<std::size_t>(r)];
           p < row_ptr[static_cast<std::size_t>(r) + 1]; ++p) {
        out.row(r) += values[static_cast<std::size_t>(p)] * x.row(col_idx[static_cast<std::size_t>(p)]);
      }
    }
    return out;
  }
};

// Symmetric-normalized bipartite adjacency over M+N nodes: users occupy rows
// [0,M), items rows [M,M+N), and entry (u, M+i) = 1/sqrt(|N_u|*|N_i|) for each
// train pair. Both diagonal blocks are structurally zero (no self-loops, no
// user-user or item-item edges).
template <typename Real>
struct NormalizedAdjacency {
  int num_users = 0;
  int num_items = 0;
  CsrMatrix<Real> matrix;
  std::vector<std::int64_t> degree;  // train degree per node
  int zero_degree_items = 0;

  int size() const { return num_users + num_items; }

  // Sorted train items of a user / train users of an item, read straight off
  // the CSR structure (values are the normalization coefficients).
  struct NeighborSpan {
    const int* begin_ptr;
    const int* end_ptr;
    const int* begin() const { return begin_ptr; }
    const int* end() const { return end_ptr; }
    std::size_t size() const { return static_cast<std::size_t>(end_ptr - begin_ptr); }
  };
  NeighborSpan neighbors(int node) const {
    const auto lo = matrix.row_ptr[static_cast<std::size_t>(node)];
    const auto hi = matrix.row_ptr[static_cast<std::size_t>(node) + 1];
    return {matrix.col_idx.data() + lo, matrix.col_idx.data() + hi};
  }
};

// Per-layer propagated embeddings. per_layer holds layers 1..K; layer 0 is the
// untouched input. Post-activation values are kept because the LeakyReLU
// derivative can be read back off them (entry > 0 -> 1, else slope).
template <typename Real>
struct PropagationOutput {
  DenseMatrix<Real> layer0;
  std::vector<DenseMatrix<Real>> per_layer;
  DenseMatrix<Real> combined;  // filled by combine_layers callers that cache it
};

template <typename Real>
NormalizedAdjacency<Real> build_normalized_adjacency(const InteractionDataset& train) {
  if (train.num_users <= 0 || train.num_items <= 0)
    throw std::invalid_argument("build_normalized_adjacency: empty dataset");

  const int m = train.num_users;
  const int n = train.num_items;
  NormalizedAdjacency<Real> adj;
  adj.num_users = m;
  adj.num_items = n;
  adj.degree.assign(static_cast<std::size_t>(m + n), 0);

  for (int u = 0; u < m; ++u) {
    const auto& row = train.row_index[static_cast<std::size_t>(u)];
    adj.degree[static_cast<std::size_t>(u)] = static_cast<std::int64_t>(row.size());
    for (const int i : row) ++adj.degree[static_cast<std::size_t>(m + i)];
  }
  for (int i = 0; i < n; ++i)
    if (adj.degree[static_cast<std::size_t>(m + i)] == 0) ++adj.zero_degree_items;
  if (adj.zero_degree_items > 0) {
    std::cerr << "warning: " << adj.zero_degree_items
              << " item(s) have zero train degree; their propagated embeddings are zero\n";
  }

  // Item rows need user lists; visiting users in ascending order keeps every
  // item's neighbor list sorted without an extra sort.
  std::vector<std::vector<int>> item_users(static_cast<std::size_t>(n));
  for (int u = 0; u < m; ++u)
    for (const int i : train.row_index[static_cast<std::size_t>(u)])
      item_users[static_cast<std::size_t>(i)].push_back(u);

  auto coeff = [&](int u, int i) -> Real {
    const double du = static_cast<double>(adj.degree[static_cast<std::size_t>(u)]);
    const double di = static_cast<double>(adj.degree[static_cast<std::size_t>(m + i)]);
    return static_cast<Real>(1.0 / std::sqrt(du * di));
  };

  CsrMatrix<Real>& a = adj.matrix;
  a.rows = a.cols = m + n;
  a.row_ptr.assign(static_cast<std::size_t>(m + n) + 1, 0);
  const std::int64_t nnz = 2 * train.num_interactions();
  a.col_idx.reserve(static_cast<std::size_t>(nnz));
  a.values.reserve(static_cast<std::size_t>(nnz));

  std::int64_t pos = 0;
  for (int u = 0; u < m; ++u) {
    a.row_ptr[static_cast<std::size_t>(u)] = pos;
    for (const int i : train.row_index[static_cast<std::size_t>(u)]) {
      a.col_idx.push_back(m + i);
      a.values.push_back(coeff(u, i));
      ++pos;
    }
  }
  for (int i = 0; i < n; ++i) {
    a.row_ptr[static_cast<std::size_t>(m + i)] = pos;
    for (const int u : item_users[static_cast<std::size_t>(i)]) {
      a.col_idx.push_back(u);
      a.values.push_back(coeff(u, i));
      ++pos;
    }
  }
  a.row_ptr[static_cast<std::size_t>(m + n)] = pos;
  return adj;
}

template <typename Real>
PropagationOutput<Real> propagate(const NormalizedAdjacency<Real>& adj, const DenseMatrix<Real>& e0,
                                  int num_layers, bool nonlinear, Real slope) {
  if (num_layers < 0) throw std::invalid_argument("propagate: K must be >= 0");
  if (slope < Real(0) || slope >= Real(1)) throw std::invalid_argument("propagate: slope must be in [0,1)");
  if (static_cast<int>(e0.rows()) != adj.size())
    throw std::invalid_argument("propagate: E0 row count must be M+N");

  PropagationOutput<Real> out;
  out.layer0 = e0;
  out.per_layer.reserve(static_cast<std::size_t>(num_layers));
  const DenseMatrix<Real>* prev = &out.layer0;
  for (int k = 1; k <= num_layers; ++k) {
    DenseMatrix<Real> next = adj.matrix.multiply(*prev);
    if (nonlinear) {
      next = next.unaryExpr([slope](Real v) { return v > Real(0) ? v : slope * v; });
    }
    if (!next.allFinite()) {
      throw std::runtime_error("propagate: non-finite values at layer " + std::to_string(k));
    }
    out.per_layer.push_back(std::move(next));
    prev = &out.per_layer.back();
  }
  return out;
}

template <typename Real>
DenseMatrix<Real> combine_layers(const PropagationOutput<Real>& output, bool include_layer0) {
  const int k = static_cast<int>(output.per_layer.size());
  if (k == 0 && !include_layer0)
    throw std::invalid_argument("combine_layers: K=0 requires include_layer0");

  const int count = k + (include_layer0 ? 1 : 0);
  DenseMatrix<Real> sum = include_layer0
                              ? output.layer0
                              : DenseMatrix<Real>(DenseMatrix<Real>::Zero(output.layer0.rows(), output.layer0.cols()));
  for (const auto& layer : output.per_layer) sum += layer;
  return sum / static_cast<Real>(count);
}

}  // namespace gcnslim
