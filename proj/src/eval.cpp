#include "gcnslim/eval.hpp"

#include <cmath>

namespace gcnslim {

double recall_at_n(const std::vector<int>& topn, const std::vector<int>& truth) {
  if (truth.empty()) throw std::invalid_argument("recall_at_n: empty truth set");
  std::vector<int> sorted_truth = truth;
  std::sort(sorted_truth.begin(), sorted_truth.end());
  int hits = 0;
  for (const int item : topn)
    if (std::binary_search(sorted_truth.begin(), sorted_truth.end(), item)) ++hits;
  return static_cast<double>(hits) / static_cast<double>(sorted_truth.size());
}

double ndcg_at_n(const std::vector<int>& topn, const std::vector<int>& truth, int n) {
  if (truth.empty()) throw std::invalid_argument("ndcg_at_n: empty truth set");
  if (n < 1) throw std::invalid_argument("ndcg_at_n: n must be >= 1");
  std::vector<int> sorted_truth = truth;
  std::sort(sorted_truth.begin(), sorted_truth.end());

  double dcg = 0.0;
  for (std::size_t pos = 0; pos < topn.size(); ++pos) {
    if (std::binary_search(sorted_truth.begin(), sorted_truth.end(), topn[pos]))
      dcg += 1.0 / std::log2(static_cast<double>(pos) + 2.0);
  }
  const int ideal = std::min<int>(static_cast<int>(sorted_truth.size()), n);
  double idcg = 0.0;
  for (int pos = 0; pos < ideal; ++pos) idcg += 1.0 / std::log2(static_cast<double>(pos) + 2.0);
  return dcg / idcg;
}

}  // namespace gcnslim
