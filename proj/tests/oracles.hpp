#pragma once

// Reference implementations used to pin expected test values: plain nested
// loops over vector-of-vector matrices, written independently of the
// library's sparse/Eigen code paths.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "gcnslim/dataset.hpp"
#include "gcnslim/graph.hpp"

namespace oracle {

using Mat = std::vector<std::vector<double>>;

inline Mat zeros(int rows, int cols) {
  return Mat(static_cast<std::size_t>(rows), std::vector<double>(static_cast<std::size_t>(cols), 0.0));
}

inline Mat matmul(const Mat& a, const Mat& b) {
  const int rows = static_cast<int>(a.size());
  const int inner = static_cast<int>(b.size());
  const int cols = static_cast<int>(b[0].size());
  Mat out = zeros(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int k = 0; k < inner; ++k)
      for (int c = 0; c < cols; ++c) out[r][c] += a[r][k] * b[k][c];
  return out;
}

// Dense D^(-1/2) A D^(-1/2) over the (M+N)-node bipartite graph; zero-degree
// nodes keep all-zero rows/columns.
inline Mat normalized_adjacency(const std::vector<std::vector<int>>& rows, int m, int n) {
  Mat a = zeros(m + n, m + n);
  std::vector<double> degree(static_cast<std::size_t>(m + n), 0.0);
  for (int u = 0; u < m; ++u) {
    for (const int i : rows[static_cast<std::size_t>(u)]) {
      a[static_cast<std::size_t>(u)][static_cast<std::size_t>(m + i)] = 1.0;
      a[static_cast<std::size_t>(m + i)][static_cast<std::size_t>(u)] = 1.0;
      degree[static_cast<std::size_t>(u)] += 1.0;
      degree[static_cast<std::size_t>(m + i)] += 1.0;
    }
  }
  for (int r = 0; r < m + n; ++r)
    for (int c = 0; c < m + n; ++c)
      if (a[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] != 0.0)
        a[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] /=
            std::sqrt(degree[static_cast<std::size_t>(r)] * degree[static_cast<std::size_t>(c)]);
  return a;
}

inline Mat leaky_relu(const Mat& x, double slope) {
  Mat out = x;
  for (auto& row : out)
    for (auto& v : row) v = v > 0.0 ? v : slope * v;
  return out;
}

// Layers 0..K (index 0 is the input).
inline std::vector<Mat> propagate(const Mat& adj, const Mat& e0, int k, bool nonlinear, double slope) {
  std::vector<Mat> layers{e0};
  for (int layer = 1; layer <= k; ++layer) {
    Mat next = matmul(adj, layers.back());
    if (nonlinear) next = leaky_relu(next, slope);
    layers.push_back(std::move(next));
  }
  return layers;
}

inline Mat combine(const std::vector<Mat>& layers, bool include_layer0) {
  const int k = static_cast<int>(layers.size()) - 1;
  const int first = include_layer0 ? 0 : 1;
  const int count = k - first + 1;
  Mat out = zeros(static_cast<int>(layers[0].size()), static_cast<int>(layers[0][0].size()));
  for (int layer = first; layer <= k; ++layer)
    for (std::size_t r = 0; r < out.size(); ++r)
      for (std::size_t c = 0; c < out[r].size(); ++c)
        out[r][c] += layers[static_cast<std::size_t>(layer)][r][c] / count;
  return out;
}

// Pairwise dot products with the diagonal forced to zero.
inline Mat item_similarity(const Mat& items) {
  const int n = static_cast<int>(items.size());
  Mat b = zeros(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      for (std::size_t c = 0; c < items[static_cast<std::size_t>(i)].size(); ++c)
        b[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] +=
            items[static_cast<std::size_t>(i)][c] * items[static_cast<std::size_t>(j)][c];
    }
  return b;
}

// X * B with X the binary train matrix given as per-user item lists.
inline Mat predict_full(const std::vector<std::vector<int>>& rows, int n, const Mat& b) {
  const int m = static_cast<int>(rows.size());
  Mat out = zeros(m, n);
  for (int u = 0; u < m; ++u)
    for (const int j : rows[static_cast<std::size_t>(u)])
      for (int i = 0; i < n; ++i)
        out[static_cast<std::size_t>(u)][static_cast<std::size_t>(i)] +=
            b[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
  return out;
}

// (U U^T - diag) X.
inline Mat user_predict(const std::vector<std::vector<int>>& rows, int n, const Mat& users) {
  const int m = static_cast<int>(users.size());
  Mat s = zeros(m, m);
  for (int u = 0; u < m; ++u)
    for (int v = 0; v < m; ++v) {
      if (u == v) continue;
      for (std::size_t c = 0; c < users[static_cast<std::size_t>(u)].size(); ++c)
        s[static_cast<std::size_t>(u)][static_cast<std::size_t>(v)] +=
            users[static_cast<std::size_t>(u)][c] * users[static_cast<std::size_t>(v)][c];
    }
  Mat out = zeros(m, n);
  for (int u = 0; u < m; ++u)
    for (int v = 0; v < m; ++v)
      for (const int i : rows[static_cast<std::size_t>(v)])
        out[static_cast<std::size_t>(u)][static_cast<std::size_t>(i)] +=
            s[static_cast<std::size_t>(u)][static_cast<std::size_t>(v)];
  return out;
}

inline Mat mf_predict(const Mat& users, const Mat& items) {
  const int m = static_cast<int>(users.size());
  const int n = static_cast<int>(items.size());
  Mat out = zeros(m, n);
  for (int u = 0; u < m; ++u)
    for (int i = 0; i < n; ++i)
      for (std::size_t c = 0; c < users[static_cast<std::size_t>(u)].size(); ++c)
        out[static_cast<std::size_t>(u)][static_cast<std::size_t>(i)] +=
            users[static_cast<std::size_t>(u)][c] * items[static_cast<std::size_t>(i)][c];
  return out;
}

// Exhaustive k-core by repeated full rescans, deleting one node class per
// pass. `users_first` flips the deletion schedule, to check fixed-point
// uniqueness against the library's queue-based implementation.
inline std::vector<gcnslim::RawInteraction> kcore(std::vector<gcnslim::RawInteraction> pairs, int k,
                                                  bool users_first) {
  bool changed = true;
  while (changed) {
    changed = false;
    for (int phase = 0; phase < 2; ++phase) {
      const bool filter_users = (phase == 0) == users_first;
      std::unordered_map<std::string, int> deg;
      for (const auto& p : pairs) ++deg[filter_users ? p.user_key : p.item_key];
      std::vector<gcnslim::RawInteraction> kept;
      for (const auto& p : pairs)
        if (deg[filter_users ? p.user_key : p.item_key] >= k) kept.push_back(p);
      if (kept.size() != pairs.size()) {
        changed = true;
        pairs = std::move(kept);
      }
    }
  }
  return pairs;
}

}  // namespace oracle

namespace test_util {

// InteractionDataset straight from row lists (IDs already contiguous).
inline gcnslim::InteractionDataset make_dataset(int num_users, int num_items,
                                                std::vector<std::vector<int>> rows) {
  gcnslim::InteractionDataset ds;
  ds.num_users = num_users;
  ds.num_items = num_items;
  for (auto& row : rows) std::sort(row.begin(), row.end());
  ds.row_index = std::move(rows);
  for (int u = 0; u < num_users; ++u) {
    ds.user_keys.push_back(std::to_string(u));
    ds.user_ids.emplace(ds.user_keys.back(), u);
  }
  for (int i = 0; i < num_items; ++i) {
    ds.item_keys.push_back(std::to_string(i));
    ds.item_ids.emplace(ds.item_keys.back(), i);
  }
  return ds;
}

// Random bipartite train set where every user has >= 1 item.
inline gcnslim::InteractionDataset random_dataset(int num_users, int num_items, gcnslim::Rng& rng,
                                                  int max_degree = 0) {
  if (max_degree <= 0) max_degree = num_items;
  std::vector<std::vector<int>> rows(static_cast<std::size_t>(num_users));
  for (int u = 0; u < num_users; ++u) {
    const int degree = 1 + rng.next_int(std::min(max_degree, num_items));
    auto& row = rows[static_cast<std::size_t>(u)];
    while (static_cast<int>(row.size()) < degree) {
      const int i = rng.next_int(num_items);
      if (std::find(row.begin(), row.end(), i) == row.end()) row.push_back(i);
    }
  }
  return make_dataset(num_users, num_items, std::move(rows));
}

inline oracle::Mat random_matrix(int rows, int cols, gcnslim::Rng& rng, double lo = -1.0,
                                 double hi = 1.0) {
  oracle::Mat out = oracle::zeros(rows, cols);
  for (auto& row : out)
    for (auto& v : row) v = rng.next_range(lo, hi);
  return out;
}

inline gcnslim::DenseMatrix<double> to_eigen(const oracle::Mat& a) {
  gcnslim::DenseMatrix<double> out(static_cast<int>(a.size()), static_cast<int>(a[0].size()));
  for (std::size_t r = 0; r < a.size(); ++r)
    for (std::size_t c = 0; c < a[r].size(); ++c)
      out(static_cast<int>(r), static_cast<int>(c)) = a[r][c];
  return out;
}

inline double max_abs_diff(const gcnslim::DenseMatrix<double>& got, const oracle::Mat& want) {
  double worst = 0.0;
  for (int r = 0; r < got.rows(); ++r)
    for (int c = 0; c < got.cols(); ++c)
      worst = std::max(worst,
                       std::abs(got(r, c) - want[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)]));
  return worst;
}

}  // namespace test_util
