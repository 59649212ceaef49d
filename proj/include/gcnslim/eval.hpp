#pragma once

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "gcnslim/model.hpp"

namespace gcnslim {

enum class EvalPhase { valid, test };

inline std::string to_string(EvalPhase phase) { return phase == EvalPhase::valid ? "valid" : "test"; }

struct MetricsReport {
  double recall_at_n = 0.0;
  double ndcg_at_n = 0.0;
  int n = 10;
  int users_evaluated = 0;
};

// |topn ∩ truth| / |truth|. Throws on empty truth (such users are skipped by
// the evaluator, never scored).
double recall_at_n(const std::vector<int>& topn, const std::vector<int>& truth);

// Binary-relevance NDCG: DCG sums 1/log2(rank+1) over hit ranks (1-based),
// IDCG truncates the ideal list at min(|truth|, n).
double ndcg_at_n(const std::vector<int>& topn, const std::vector<int>& truth, int n);

// Full-ranking top-n: drops masked (train) items, sorts the rest by score
// descending with ties broken by ascending item ID. Returns all candidates
// when fewer than n remain.
template <typename Real>
std::vector<int> rank_topn(const Real* scores, int num_items, const std::vector<int>& mask, int n) {
  if (n < 1) throw std::invalid_argument("rank_topn: n must be >= 1");
  std::vector<int> sorted_mask = mask;
  std::sort(sorted_mask.begin(), sorted_mask.end());

  std::vector<int> candidates;
  candidates.reserve(static_cast<std::size_t>(num_items));
  std::size_t mpos = 0;
  for (int i = 0; i < num_items; ++i) {
    if (mpos < sorted_mask.size() && sorted_mask[mpos] == i) {
      ++mpos;
      continue;
    }
    candidates.push_back(i);
  }

  const int top = std::min<int>(n, static_cast<int>(candidates.size()));
  std::partial_sort(candidates.begin(), candidates.begin() + top, candidates.end(),
                    [scores](int a, int b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      return a < b;
                    });
  candidates.resize(static_cast<std::size_t>(top));
  return candidates;
}

template <typename Real>
std::vector<int> rank_topn(const std::vector<Real>& scores, const std::vector<int>& mask, int n) {
  return rank_topn(scores.data(), static_cast<int>(scores.size()), mask, n);
}

namespace detail {

// Averages Recall@n / NDCG@n of a precomputed M x N score matrix over users
// with at least one ground-truth item; train items are masked from ranking.
template <typename Real>
MetricsReport aggregate_metrics(const DenseMatrix<Real>& scores, const InteractionDataset& train,
                                const InteractionDataset& truth, int n) {
  const int m = train.num_users;
  std::vector<double> recalls(static_cast<std::size_t>(m), 0.0);
  std::vector<double> ndcgs(static_cast<std::size_t>(m), 0.0);
  std::vector<char> counted(static_cast<std::size_t>(m), 0);

#pragma omp parallel for schedule(static)
  for (int u = 0; u < m; ++u) {
    const auto& truth_row = truth.row_index[static_cast<std::size_t>(u)];
    if (truth_row.empty()) continue;
    const auto topn = rank_topn(&scores(u, 0), train.num_items,
                                train.row_index[static_cast<std::size_t>(u)], n);
    recalls[static_cast<std::size_t>(u)] = recall_at_n(topn, truth_row);
    ndcgs[static_cast<std::size_t>(u)] = ndcg_at_n(topn, truth_row, n);
    counted[static_cast<std::size_t>(u)] = 1;
  }

  MetricsReport report;
  report.n = n;
  double recall_sum = 0.0, ndcg_sum = 0.0;
  for (int u = 0; u < m; ++u) {
    if (!counted[static_cast<std::size_t>(u)]) continue;
    recall_sum += recalls[static_cast<std::size_t>(u)];
    ndcg_sum += ndcgs[static_cast<std::size_t>(u)];
    ++report.users_evaluated;
  }
  if (report.users_evaluated > 0) {
    report.recall_at_n = recall_sum / report.users_evaluated;
    report.ndcg_at_n = ndcg_sum / report.users_evaluated;
  }
  return report;
}

}  // namespace detail

// Builds final embeddings (and B for SLIM scoring) once, scores every user,
// and averages the ranking metrics over the chosen phase split.
template <typename Real>
MetricsReport evaluate(const ModelParams<Real>& params, const NormalizedAdjacency<Real>& adj,
                       const SplitBundle& data, EvalPhase phase, const ModelConfig& config,
                       int n = 10) {
  config.validate();
  const auto finals = final_embeddings(params, adj, config);
  const InteractionDataset& truth = phase == EvalPhase::valid ? data.valid : data.test;

  DenseMatrix<Real> scores;
  if (config.mode == ScoreMode::mf) {
    scores.noalias() = finals.users * finals.items.transpose();
  } else if (config.side == PredictionSide::user) {
    scores = user_similarity_predict(data.train, finals.users);
  } else {
    const auto sim = item_similarity(finals.items);
    scores = predict_full(data.train, sim);
  }
  return detail::aggregate_metrics(scores, data.train, truth, n);
}

// Same aggregation against a frozen similarity matrix (e.g. re-loaded from a
// B export) without re-deriving embeddings.
template <typename Real>
MetricsReport evaluate_with_b(const ItemSimilarity<Real>& sim, const SplitBundle& data,
                              EvalPhase phase, int n = 10) {
  const InteractionDataset& truth = phase == EvalPhase::valid ? data.valid : data.test;
  const DenseMatrix<Real> scores = predict_full(data.train, sim);
  return detail::aggregate_metrics(scores, data.train, truth, n);
}

}  // namespace gcnslim
