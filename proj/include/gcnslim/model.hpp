#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "gcnslim/graph.hpp"

namespace gcnslim {

enum class ScoreMode { slim, mf };
enum class PredictionSide { item, user };

inline std::string to_string(ScoreMode mode) { return mode == ScoreMode::slim ? "slim" : "mf"; }
inline std::string to_string(PredictionSide side) { return side == PredictionSide::item ? "item" : "user"; }

inline ScoreMode score_mode_from_string(const std::string& s) {
  if (s == "slim") return ScoreMode::slim;
  if (s == "mf") return ScoreMode::mf;
  throw std::invalid_argument("unknown mode '" + s + "' (expected slim or mf)");
}

inline PredictionSide side_from_string(const std::string& s) {
  if (s == "item") return PredictionSide::item;
  if (s == "user") return PredictionSide::user;
  throw std::invalid_argument("unknown side '" + s + "' (expected item or user)");
}

struct ModelConfig {
  int num_layers = 1;        // K
  double alpha = 0.0;        // joint MF loss weight
  double lambda = 0.0;       // L2 rate on layer-0 rows
  bool nonlinear = true;
  bool include_layer0 = false;
  ScoreMode mode = ScoreMode::slim;
  PredictionSide side = PredictionSide::item;
  int embedding_dim = 128;
  double leaky_slope = 0.01;

  void validate() const {
    if (num_layers < 0) throw std::invalid_argument("ModelConfig: K must be >= 0");
    if (alpha < 0.0) throw std::invalid_argument("ModelConfig: alpha must be >= 0");
    if (lambda < 0.0) throw std::invalid_argument("ModelConfig: lambda must be >= 0");
    if (embedding_dim < 1) throw std::invalid_argument("ModelConfig: embedding_dim must be >= 1");
    if (leaky_slope < 0.0 || leaky_slope >= 1.0)
      throw std::invalid_argument("ModelConfig: leaky_slope must be in [0,1)");
    if (mode == ScoreMode::mf && !include_layer0)
      throw std::invalid_argument("ModelConfig: mode=mf requires include_layer0");
    if (side == PredictionSide::user && mode != ScoreMode::slim)
      throw std::invalid_argument("ModelConfig: side=user is only valid with mode=slim");
    if (num_layers == 0 && !include_layer0)
      throw std::invalid_argument("ModelConfig: K=0 requires include_layer0");
  }
};

// Layer-0 embeddings are the only trainable tensor: user rows first, item
// rows after, matching the adjacency layout.
template <typename Real>
struct ModelParams {
  int num_users = 0;
  int num_items = 0;
  DenseMatrix<Real> e0;  // (M+N) x d

  int dim() const { return static_cast<int>(e0.cols()); }
};

template <typename Real>
struct FinalEmbeddings {
  DenseMatrix<Real> users;  // M x d
  DenseMatrix<Real> items;  // N x d
};

template <typename Real>
struct ItemSimilarity {
  DenseMatrix<Real> b;  // N x N, symmetric, zero diagonal
};

template <typename Real>
struct TrainSample {
  int user = 0;
  int item = 0;
  Real target = Real(0);  // 1 for observed pairs, 0 for sampled negatives
};

template <typename Real>
struct BatchLossResult {
  Real loss = Real(0);
  DenseMatrix<Real> grad_e0;  // (M+N) x d
};

template <typename Real>
FinalEmbeddings<Real> final_embeddings(const ModelParams<Real>& params,
                                       const NormalizedAdjacency<Real>& adj,
                                       const ModelConfig& config) {
  config.validate();
  const auto prop = propagate(adj, params.e0, config.num_layers, config.nonlinear,
                              static_cast<Real>(config.leaky_slope));
  const DenseMatrix<Real> combined = combine_layers(prop, config.include_layer0);
  FinalEmbeddings<Real> out;
  out.users = combined.topRows(params.num_users);
  out.items = combined.bottomRows(params.num_items);
  return out;
}

// B = I_final * I_final^T with the diagonal forced to exactly zero and the
// lower triangle mirrored from the upper one so symmetry is exact, not a
// floating-point accident.
template <typename Real>
ItemSimilarity<Real> item_similarity(const DenseMatrix<Real>& i_final) {
  ItemSimilarity<Real> sim;
  sim.b.noalias() = i_final * i_final.transpose();
  const int n = static_cast<int>(sim.b.rows());
  for (int i = 0; i < n; ++i) {
    sim.b(i, i) = Real(0);
    for (int j = i + 1; j < n; ++j) sim.b(j, i) = sim.b(i, j);
  }
  return sim;
}

// X_hat = X * B, accumulated row-wise: user u's scores are the sum of B rows
// of their train items (ascending item order for determinism).
template <typename Real>
DenseMatrix<Real> predict_full(const InteractionDataset& train, const ItemSimilarity<Real>& sim) {
  const int m = train.num_users;
  const int n = static_cast<int>(sim.b.rows());
  DenseMatrix<Real> scores = DenseMatrix<Real>::Zero(m, n);
#pragma omp parallel for schedule(static)
  for (int u = 0; u < m; ++u)
    for (const int j : train.row_index[static_cast<std::size_t>(u)]) scores.row(u) += sim.b.row(j);
  return scores;
}

// Sampled entry of X(II^T - diag): (sum of e_j over the user's train items)
// dot e_i, minus the self term when i itself is a train item.
template <typename Real>
Real score_pair_slim(int u, int i, const InteractionDataset& train,
                     const FinalEmbeddings<Real>& finals) {
  const auto& row = train.row_index[static_cast<std::size_t>(u)];
  DenseVector<Real> h = DenseVector<Real>::Zero(finals.items.cols());
  for (const int j : row) h += finals.items.row(j).transpose();
  Real score = h.dot(finals.items.row(i).transpose());
  if (std::binary_search(row.begin(), row.end(), i))
    score -= finals.items.row(i).dot(finals.items.row(i));
  return score;
}

template <typename Real>
Real score_pair_mf(int u, int i, const FinalEmbeddings<Real>& finals) {
  return finals.users.row(u).dot(finals.items.row(i));
}

// Scores every user against every item via S = U U^T with zero diagonal,
// prediction S * X (the user-side expansion): computed as U (U^T X) minus the
// per-user self term ||U_u||^2 on the user's own train items.
template <typename Real>
DenseMatrix<Real> user_similarity_predict(const InteractionDataset& train,
                                          const DenseMatrix<Real>& u_final) {
  const int m = train.num_users;
  const int n = train.num_items;
  const int d = static_cast<int>(u_final.cols());
  DenseMatrix<Real> w = DenseMatrix<Real>::Zero(d, n);  // U^T X
  for (int v = 0; v < m; ++v)
    for (const int i : train.row_index[static_cast<std::size_t>(v)])
      w.col(i) += u_final.row(v).transpose();
  DenseMatrix<Real> scores = u_final * w;
  for (int u = 0; u < m; ++u) {
    const Real self = u_final.row(u).dot(u_final.row(u));
    for (const int i : train.row_index[static_cast<std::size_t>(u)]) scores(u, i) -= self;
  }
  return scores;
}

// Scores an arbitrary interaction history against a frozen similarity matrix.
// Rows are accumulated in the order given; passing a user's (sorted) train
// item list reproduces that user's predict_full row bit for bit.
template <typename Real>
DenseVector<Real> cold_score(const std::vector<int>& interaction_items, const ItemSimilarity<Real>& sim) {
  const int n = static_cast<int>(sim.b.rows());
  DenseVector<Real> scores = DenseVector<Real>::Zero(n);
  for (const int j : interaction_items) {
    if (j < 0 || j >= n)
      throw std::invalid_argument("cold_score: unknown item ID " + std::to_string(j));
    scores += sim.b.row(j).transpose();
  }
  return scores;
}

namespace detail {

// Groups batch samples by anchor node (the user for side=item, the item for
// side=user) in first-encounter order, which keeps gradient accumulation
// order independent of thread count.
struct AnchorSlots {
  std::unordered_map<int, int> slot_of;
  std::vector<int> anchors;  // slot -> anchor node id

  int slot(int anchor) {
    auto [it, inserted] = slot_of.emplace(anchor, static_cast<int>(anchors.size()));
    if (inserted) anchors.push_back(anchor);
    return it->second;
  }
};

}  // namespace detail

// Sampled squared loss of the joint objective plus the per-batch L2 term over
// the layer-0 rows of the batch's users and items, with exact analytic
// gradients through layer combination and propagation. Train incidence is
// read off the adjacency structure (users: rows [0,M), items: rows [M,M+N)).
template <typename Real>
BatchLossResult<Real> batch_loss(const std::vector<TrainSample<Real>>& batch,
                                 const ModelParams<Real>& params,
                                 const NormalizedAdjacency<Real>& adj,
                                 const ModelConfig& config) {
  config.validate();
  if (batch.empty()) throw std::invalid_argument("batch_loss: empty batch");

  const int m = params.num_users;
  const int n = params.num_items;
  const int d = params.dim();
  const int k = config.num_layers;
  const Real slope = static_cast<Real>(config.leaky_slope);
  const Real alpha = static_cast<Real>(config.alpha);

  const auto prop = propagate(adj, params.e0, k, config.nonlinear, slope);
  const DenseMatrix<Real> combined = combine_layers(prop, config.include_layer0);
  const auto u_final = combined.topRows(m);
  const auto i_final = combined.bottomRows(n);

  auto sample_error = [](const TrainSample<Real>& s) {
    return std::runtime_error("batch_loss: non-finite score for sample (user " +
                              std::to_string(s.user) + ", item " + std::to_string(s.item) +
                              ", target " + std::to_string(static_cast<double>(s.target)) + ")");
  };

  Real loss = Real(0);
  DenseMatrix<Real> d_final = DenseMatrix<Real>::Zero(m + n, d);

  if (config.mode == ScoreMode::mf) {
    for (const auto& s : batch) {
      const Real score = u_final.row(s.user).dot(i_final.row(s.item));
      if (!std::isfinite(static_cast<double>(score))) throw sample_error(s);
      const Real r = s.target - score;
      loss += r * r;
      const Real g = Real(-2) * r;
      d_final.row(s.user) += g * i_final.row(s.item);
      d_final.row(m + s.item) += g * u_final.row(s.user);
    }
  } else {
    // SLIM scoring around anchor histories. For side=item the anchor is the
    // user and the history lives in item rows; side=user swaps both roles.
    const bool item_side = config.side == PredictionSide::item;

    detail::AnchorSlots slots;
    std::vector<int> sample_slot(batch.size());
    for (std::size_t s = 0; s < batch.size(); ++s) {
      const int anchor = item_side ? batch[s].user : m + batch[s].item;
      sample_slot[s] = slots.slot(anchor);
    }

    // h[slot] = sum of history embeddings for the anchor's train neighbors.
    DenseMatrix<Real> h = DenseMatrix<Real>::Zero(static_cast<int>(slots.anchors.size()), d);
    for (std::size_t t = 0; t < slots.anchors.size(); ++t) {
      for (const int node : adj.neighbors(slots.anchors[t]))
        h.row(static_cast<int>(t)) += combined.row(node);
    }

    // c[slot] accumulates sum of g * e_target, scattered to every neighbor
    // of the anchor after the sample loop.
    DenseMatrix<Real> c = DenseMatrix<Real>::Zero(static_cast<int>(slots.anchors.size()), d);

    for (std::size_t s = 0; s < batch.size(); ++s) {
      const auto& smp = batch[s];
      const int slot = sample_slot[s];
      const int anchor = slots.anchors[static_cast<std::size_t>(slot)];
      const int target_node = item_side ? m + smp.item : smp.user;
      const auto neigh = adj.neighbors(anchor);
      const bool self = std::binary_search(neigh.begin(), neigh.end(), target_node);

      const auto e_t = combined.row(target_node);
      Real score = h.row(slot).dot(e_t);
      if (self) score -= e_t.dot(e_t);
      if (!std::isfinite(static_cast<double>(score))) throw sample_error(smp);

      const Real r = smp.target - score;
      loss += r * r;
      const Real g = Real(-2) * r;
      // d score / d e_t = h - [self] * e_t, and d score / d e_j = e_t for
      // every neighbor j of the anchor. The scatter below adds g * e_t to all
      // neighbors including t itself when self, hence the -2 here.
      d_final.row(target_node) += g * h.row(slot);
      if (self) d_final.row(target_node) -= Real(2) * g * e_t;
      c.row(slot) += g * e_t;

      if (alpha != Real(0)) {
        const Real mf_score = u_final.row(smp.user).dot(i_final.row(smp.item));
        if (!std::isfinite(static_cast<double>(mf_score))) throw sample_error(smp);
        const Real r2 = smp.target - mf_score;
        loss += alpha * r2 * r2;
        const Real g2 = Real(-2) * alpha * r2;
        d_final.row(smp.user) += g2 * i_final.row(smp.item);
        d_final.row(m + smp.item) += g2 * u_final.row(smp.user);
      }
    }

    for (std::size_t t = 0; t < slots.anchors.size(); ++t) {
      for (const int node : adj.neighbors(slots.anchors[t]))
        d_final.row(node) += c.row(static_cast<int>(t));
    }
  }

  // Backpropagate the combined-embedding gradient down to layer 0. Each
  // included layer receives coefficient 1/count; the adjacency is symmetric
  // so its transpose product reuses multiply().
  const int count = k + (config.include_layer0 ? 1 : 0);
  const Real coeff = Real(1) / static_cast<Real>(count);
  DenseMatrix<Real> g = DenseMatrix<Real>::Zero(m + n, d);
  for (int layer = k; layer >= 1; --layer) {
    g += coeff * d_final;
    if (config.nonlinear) {
      const auto& post = prop.per_layer[static_cast<std::size_t>(layer - 1)];
      g = g.binaryExpr(post, [slope](Real gv, Real pv) { return pv > Real(0) ? gv : slope * gv; });
    }
    g = adj.matrix.multiply(g);
  }
  if (config.include_layer0) g += coeff * d_final;

  // Per-batch L2 on the layer-0 rows of the batch's users and items.
  if (config.lambda != 0.0) {
    std::vector<int> touched;
    touched.reserve(batch.size() * 2);
    for (const auto& s : batch) {
      touched.push_back(s.user);
      touched.push_back(m + s.item);
    }
    std::sort(touched.begin(), touched.end());
    touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
    const Real rate = static_cast<Real>(config.lambda) / static_cast<Real>(batch.size());
    for (const int row : touched) {
      loss += rate * params.e0.row(row).dot(params.e0.row(row));
      g.row(row) += Real(2) * rate * params.e0.row(row);
    }
  }

  if (!std::isfinite(static_cast<double>(loss)))
    throw std::runtime_error("batch_loss: non-finite total loss");

  BatchLossResult<Real> out;
  out.loss = loss;
  out.grad_e0 = std::move(g);
  return out;
}

}  // namespace gcnslim
