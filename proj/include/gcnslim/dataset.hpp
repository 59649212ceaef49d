#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "gcnslim/rng.hpp"

namespace gcnslim {

// One record of the raw interaction log. Demographic columns of the source
// files are ignored at parse time.
struct RawInteraction {
  std::string user_key;
  std::string item_key;
  std::optional<double> rating;
  std::optional<std::int64_t> timestamp;
};

// Deduplicated implicit-feedback pairs over contiguous 0-based IDs, held as a
// sparse row-oriented matrix (one sorted item list per user).
struct InteractionDataset {
  int num_users = 0;
  int num_items = 0;
  std::vector<std::vector<int>> row_index;  // per-user sorted item IDs
  std::vector<std::string> user_keys;       // id -> original key
  std::vector<std::string> item_keys;
  std::unordered_map<std::string, int> user_ids;  // original key -> id
  std::unordered_map<std::string, int> item_ids;

  std::int64_t num_interactions() const;
  double density() const;
  bool has_pair(int user, int item) const;
};

// Three disjoint views over the same ID space. Every user keeps at least one
// train pair; valid/test rows may be empty for low-degree users.
struct SplitBundle {
  InteractionDataset train;
  InteractionDataset valid;
  InteractionDataset test;
  std::uint64_t seed = 0;
};

// Stand-in generator for user-heavy interaction logs: power-law item
// popularity, exact interaction count, and a 10-core-clean result.
struct SyntheticSkewConfig {
  int num_users = 0;
  int num_items = 0;
  std::int64_t target_interactions = 0;
  double popularity_exponent = 1.0;
  std::uint64_t seed = 0;
};

// Parses `user::item::rating::timestamp` lines (ML-1M), a headered
// `user,item,rating,timestamp` CSV, or header-less tab-separated rows.
// Records with rating < rating_threshold are dropped (records without a
// rating count as implicit positives); duplicate (user, item) pairs collapse
// to the first occurrence. Throws std::runtime_error with the 1-based line
// number on malformed input and on an empty result.
std::vector<RawInteraction> load_movielens(const std::string& path, double rating_threshold);

// Iteratively removes users and items with fewer than k interactions until a
// fixed point; survivors keep their input order. Throws when k < 1 or when
// the fixed point is empty.
std::vector<RawInteraction> kcore_filter(std::vector<RawInteraction> pairs, int k);

// Assigns contiguous IDs in first-seen order and builds the row index.
InteractionDataset build_dataset(const std::vector<RawInteraction>& pairs);

// Per-user stratified random split. Each user's items are shuffled with the
// seeded RNG and partitioned by the ratios, rounding remainders to train
// first, then test, then valid; every user keeps >= 1 train item.
SplitBundle split(const InteractionDataset& dataset, const std::array<double, 3>& ratios,
                  std::uint64_t seed);

// `count` IDs drawn uniformly from the items absent from the user's train
// row (independent draws; train items are rejection-resampled). Throws when
// the user has interacted with every item.
std::vector<int> sample_negatives(int user, int count, const InteractionDataset& train_view,
                                  Rng& rng);

InteractionDataset generate_synthetic(const SyntheticSkewConfig& config);

// Canonical on-disk processed format: {train,valid,test}.tsv with one
// `user<TAB>item` pair per line, a dataset.json sidecar carrying
// {num_users, num_items, num_interactions, seed}, and the ID maps.
void save_processed(const std::string& dir, const SplitBundle& bundle);
SplitBundle load_processed(const std::string& dir);

}  // namespace gcnslim
