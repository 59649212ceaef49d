#include "gcnslim/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace gcnslim {

namespace {

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

std::vector<std::string> split_on(const std::string& line, const std::string& sep) {
  std::vector<std::string> fields;
  std::size_t pos = 0;
  while (true) {
    const std::size_t next = line.find(sep, pos);
    if (next == std::string::npos) {
      fields.push_back(line.substr(pos));
      break;
    }
    fields.push_back(line.substr(pos, next - pos));
    pos = next + sep.size();
  }
  return fields;
}

[[noreturn]] void parse_error(const std::string& path, std::size_t line_no, const std::string& what) {
  throw std::runtime_error("parse error in " + path + " at line " + std::to_string(line_no) + ": " + what);
}

}  // namespace

std::int64_t InteractionDataset::num_interactions() const {
  std::int64_t total = 0;
  for (const auto& row : row_index) total += static_cast<std::int64_t>(row.size());
  return total;
}

double InteractionDataset::density() const {
  if (num_users == 0 || num_items == 0) return 0.0;
  return static_cast<double>(num_interactions()) /
         (static_cast<double>(num_users) * static_cast<double>(num_items));
}

bool InteractionDataset::has_pair(int user, int item) const {
  if (user < 0 || user >= num_users) return false;
  const auto& row = row_index[static_cast<std::size_t>(user)];
  return std::binary_search(row.begin(), row.end(), item);
}

std::vector<RawInteraction> load_movielens(const std::string& path, double rating_threshold) {
  std::ifstream in(path);
  if (!in.is_open()) throw std::runtime_error("cannot open interaction file: " + path);

  std::vector<RawInteraction> records;
  std::unordered_map<std::string, std::size_t> seen;  // "user\x1fitem" -> first index
  std::string line;
  std::size_t line_no = 0;
  bool csv_header = false;

  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;

    std::vector<std::string> fields;
    if (line.find("::") != std::string::npos) {
      fields = split_on(line, "::");
    } else if (line.find('\t') != std::string::npos) {
      fields = split_on(line, "\t");
    } else if (line.find(',') != std::string::npos) {
      fields = split_on(line, ",");
      if (line_no == 1 && fields.size() >= 2 && fields[0] == "user" && fields[1] == "item") {
        csv_header = true;
        continue;
      }
      if (!csv_header) parse_error(path, line_no, "comma-separated input requires a 'user,item,...' header");
    } else {
      parse_error(path, line_no, "unrecognized record format");
    }

    if (fields.size() < 2 || fields[0].empty() || fields[1].empty()) {
      parse_error(path, line_no, "expected at least user and item fields");
    }

    RawInteraction rec;
    rec.user_key = fields[0];
    rec.item_key = fields[1];
    if (fields.size() >= 3 && !fields[2].empty()) {
      try {
        std::size_t used = 0;
        rec.rating = std::stod(fields[2], &used);
        if (used != fields[2].size() || !std::isfinite(*rec.rating)) throw std::invalid_argument("");
      } catch (const std::exception&) {
        parse_error(path, line_no, "bad rating value '" + fields[2] + "'");
      }
    }
    if (fields.size() >= 4 && !fields[3].empty()) {
      try {
        rec.timestamp = std::stoll(fields[3]);
      } catch (const std::exception&) {
        parse_error(path, line_no, "bad timestamp value '" + fields[3] + "'");
      }
    }

    if (rec.rating.has_value() && *rec.rating < rating_threshold) continue;

    const std::string key = rec.user_key + '\x1f' + rec.item_key;
    if (seen.emplace(key, records.size()).second) records.push_back(std::move(rec));
  }

  if (records.empty()) {
    throw std::runtime_error("empty dataset: no record of " + path + " passed threshold " +
                             std::to_string(rating_threshold));
  }
  return records;
}

std::vector<RawInteraction> kcore_filter(std::vector<RawInteraction> pairs, int k) {
  if (k < 1) throw std::invalid_argument("kcore_filter: k must be >= 1");

  std::unordered_map<std::string, int> user_idx, item_idx;
  std::vector<int> pair_user(pairs.size()), pair_item(pairs.size());
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    pair_user[p] = user_idx.emplace(pairs[p].user_key, static_cast<int>(user_idx.size())).first->second;
    pair_item[p] = item_idx.emplace(pairs[p].item_key, static_cast<int>(item_idx.size())).first->second;
  }

  std::vector<std::vector<int>> user_pairs(user_idx.size()), item_pairs(item_idx.size());
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    user_pairs[pair_user[p]].push_back(static_cast<int>(p));
    item_pairs[pair_item[p]].push_back(static_cast<int>(p));
  }

  std::vector<int> user_deg(user_idx.size()), item_deg(item_idx.size());
  for (std::size_t u = 0; u < user_pairs.size(); ++u) user_deg[u] = static_cast<int>(user_pairs[u].size());
  for (std::size_t i = 0; i < item_pairs.size(); ++i) item_deg[i] = static_cast<int>(item_pairs[i].size());

  std::vector<char> pair_alive(pairs.size(), 1);
  std::vector<char> user_dead(user_idx.size(), 0), item_dead(item_idx.size(), 0);
  std::deque<std::pair<bool, int>> queue;  // (is_user, node)
  for (std::size_t u = 0; u < user_deg.size(); ++u)
    if (user_deg[u] < k) { user_dead[u] = 1; queue.emplace_back(true, static_cast<int>(u)); }
  for (std::size_t i = 0; i < item_deg.size(); ++i)
    if (item_deg[i] < k) { item_dead[i] = 1; queue.emplace_back(false, static_cast<int>(i)); }

  while (!queue.empty()) {
    const auto [is_user, node] = queue.front();
    queue.pop_front();
    const auto& incident = is_user ? user_pairs[node] : item_pairs[node];
    for (const int p : incident) {
      if (!pair_alive[p]) continue;
      pair_alive[p] = 0;
      const int u = pair_user[p];
      const int i = pair_item[p];
      if (!user_dead[u] && --user_deg[u] < k) { user_dead[u] = 1; queue.emplace_back(true, u); }
      if (!item_dead[i] && --item_deg[i] < k) { item_dead[i] = 1; queue.emplace_back(false, i); }
    }
  }

  std::vector<RawInteraction> result;
  result.reserve(pairs.size());
  for (std::size_t p = 0; p < pairs.size(); ++p)
    if (pair_alive[p]) result.push_back(std::move(pairs[p]));

  if (result.empty()) throw std::runtime_error("empty dataset: " + std::to_string(k) + "-core fixed point is empty");
  return result;
}

InteractionDataset build_dataset(const std::vector<RawInteraction>& pairs) {
  if (pairs.empty()) throw std::runtime_error("empty dataset: build_dataset requires at least one pair");

  InteractionDataset ds;
  for (const auto& rec : pairs) {
    auto [uit, u_new] = ds.user_ids.emplace(rec.user_key, ds.num_users);
    if (u_new) {
      ds.user_keys.push_back(rec.user_key);
      ds.row_index.emplace_back();
      ++ds.num_users;
    }
    auto [iit, i_new] = ds.item_ids.emplace(rec.item_key, ds.num_items);
    if (i_new) {
      ds.item_keys.push_back(rec.item_key);
      ++ds.num_items;
    }
    ds.row_index[uit->second].push_back(iit->second);
  }
  for (auto& row : ds.row_index) {
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
  }
  return ds;
}

SplitBundle split(const InteractionDataset& dataset, const std::array<double, 3>& ratios,
                  std::uint64_t seed) {
  double sum = 0.0;
  for (const double r : ratios) {
    if (r <= 0.0) throw std::invalid_argument("split: ratios must be positive");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("split: ratios must sum to 1");

  SplitBundle bundle;
  bundle.seed = seed;
  for (InteractionDataset* part : {&bundle.train, &bundle.valid, &bundle.test}) {
    part->num_users = dataset.num_users;
    part->num_items = dataset.num_items;
    part->row_index.assign(static_cast<std::size_t>(dataset.num_users), {});
    part->user_keys = dataset.user_keys;
    part->item_keys = dataset.item_keys;
    part->user_ids = dataset.user_ids;
    part->item_ids = dataset.item_ids;
  }

  Rng rng(seed);
  for (int u = 0; u < dataset.num_users; ++u) {
    std::vector<int> items = dataset.row_index[static_cast<std::size_t>(u)];
    rng.shuffle(items);

    const std::size_t n = items.size();
    std::size_t n_train = static_cast<std::size_t>(ratios[0] * static_cast<double>(n));
    std::size_t n_valid = static_cast<std::size_t>(ratios[1] * static_cast<double>(n));
    std::size_t n_test = static_cast<std::size_t>(ratios[2] * static_cast<double>(n));
    std::size_t leftover = n - n_train - n_valid - n_test;
    if (leftover > 0) { ++n_train; --leftover; }
    if (leftover > 0) { ++n_test; --leftover; }
    n_valid = n - n_train - n_test;

    auto assign = [&](InteractionDataset& part, std::size_t begin, std::size_t count) {
      auto& row = part.row_index[static_cast<std::size_t>(u)];
      row.assign(items.begin() + static_cast<std::ptrdiff_t>(begin),
                 items.begin() + static_cast<std::ptrdiff_t>(begin + count));
      std::sort(row.begin(), row.end());
    };
    assign(bundle.train, 0, n_train);
    assign(bundle.valid, n_train, n_valid);
    assign(bundle.test, n_train + n_valid, n_test);
  }
  return bundle;
}

std::vector<int> sample_negatives(int user, int count, const InteractionDataset& train_view, Rng& rng) {
  if (user < 0 || user >= train_view.num_users) throw std::invalid_argument("sample_negatives: bad user id");
  if (count < 0) throw std::invalid_argument("sample_negatives: count must be >= 0");
  const auto& row = train_view.row_index[static_cast<std::size_t>(user)];
  if (static_cast<int>(row.size()) >= train_view.num_items) {
    throw std::runtime_error("sample_negatives: user " + std::to_string(user) +
                             " interacted with all items, nothing to sample");
  }
  std::vector<int> result;
  result.reserve(static_cast<std::size_t>(count));
  for (int c = 0; c < count; ++c) {
    int candidate = rng.next_int(train_view.num_items);
    while (std::binary_search(row.begin(), row.end(), candidate)) {
      candidate = rng.next_int(train_view.num_items);
    }
    result.push_back(candidate);
  }
  return result;
}

InteractionDataset generate_synthetic(const SyntheticSkewConfig& config) {
  const int num_users = config.num_users;
  const int num_items = config.num_items;
  const std::int64_t target = config.target_interactions;
  constexpr int kCore = 10;

  if (num_users <= 0 || num_items <= 0 || target <= 0)
    throw std::invalid_argument("generate_synthetic: sizes must be positive");
  if (target > static_cast<std::int64_t>(num_users) * num_items ||
      target < static_cast<std::int64_t>(kCore) * num_users ||
      target < static_cast<std::int64_t>(kCore) * num_items) {
    throw std::invalid_argument("generate_synthetic: target_interactions infeasible for a " +
                                std::to_string(kCore) + "-core result");
  }

  Rng rng(config.seed);

  // Power-law popularity weights and their cumulative sums for inverse-CDF draws.
  std::vector<double> cumulative(static_cast<std::size_t>(num_items));
  double total = 0.0;
  for (int i = 0; i < num_items; ++i) {
    total += std::pow(static_cast<double>(i + 1), -config.popularity_exponent);
    cumulative[static_cast<std::size_t>(i)] = total;
  }

  auto draw_item = [&]() {
    const double x = rng.next_unit() * total;
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), x);
    return static_cast<int>(std::min<std::ptrdiff_t>(it - cumulative.begin(), num_items - 1));
  };

  // Per-user quotas: an even share of the target, remainder to the first users.
  const std::int64_t base = target / num_users;
  const std::int64_t rem = target % num_users;

  std::vector<std::vector<int>> rows(static_cast<std::size_t>(num_users));
  std::vector<std::int64_t> item_deg(static_cast<std::size_t>(num_items), 0);
  std::vector<int> stamp(static_cast<std::size_t>(num_items), -1);
  for (int u = 0; u < num_users; ++u) {
    const int quota = static_cast<int>(base + (u < rem ? 1 : 0));
    auto& row = rows[static_cast<std::size_t>(u)];
    row.reserve(static_cast<std::size_t>(quota));
    long attempts = 0;
    const long attempt_cap = 50L * num_items;
    while (static_cast<int>(row.size()) < quota && attempts < attempt_cap) {
      ++attempts;
      const int item = draw_item();
      if (stamp[static_cast<std::size_t>(item)] == u) continue;
      stamp[static_cast<std::size_t>(item)] = u;
      row.push_back(item);
      ++item_deg[static_cast<std::size_t>(item)];
    }
    // Dense users can exhaust rejection sampling; fill from the most popular
    // unused items so the quota stays exact.
    for (int i = 0; static_cast<int>(row.size()) < quota && i < num_items; ++i) {
      if (stamp[static_cast<std::size_t>(i)] == u) continue;
      stamp[static_cast<std::size_t>(i)] = u;
      row.push_back(i);
      ++item_deg[static_cast<std::size_t>(i)];
    }
    std::sort(row.begin(), row.end());
  }

  // Repair pass: swap edges toward items below the core threshold, preserving
  // both the total count and every user quota.
  auto row_erase = [](std::vector<int>& row, int item) {
    row.erase(std::lower_bound(row.begin(), row.end(), item));
  };
  auto row_insert = [](std::vector<int>& row, int item) {
    row.insert(std::lower_bound(row.begin(), row.end(), item), item);
  };
  auto row_has = [](const std::vector<int>& row, int item) {
    return std::binary_search(row.begin(), row.end(), item);
  };

  for (int item = 0; item < num_items; ++item) {
    while (item_deg[static_cast<std::size_t>(item)] < kCore) {
      int donor_user = -1, donor_item = -1;
      for (long tries = 0; tries < 8L * num_users && donor_user < 0; ++tries) {
        const int u = rng.next_int(num_users);
        if (row_has(rows[static_cast<std::size_t>(u)], item)) continue;
        for (const int j : rows[static_cast<std::size_t>(u)]) {
          if (item_deg[static_cast<std::size_t>(j)] > kCore &&
              (donor_item < 0 || item_deg[static_cast<std::size_t>(j)] > item_deg[static_cast<std::size_t>(donor_item)])) {
            donor_user = u;
            donor_item = j;
          }
        }
      }
      if (donor_user < 0) {
        for (int u = 0; u < num_users && donor_user < 0; ++u) {
          if (row_has(rows[static_cast<std::size_t>(u)], item)) continue;
          for (const int j : rows[static_cast<std::size_t>(u)]) {
            if (item_deg[static_cast<std::size_t>(j)] > kCore) {
              donor_user = u;
              donor_item = j;
              break;
            }
          }
        }
      }
      if (donor_user < 0)
        throw std::runtime_error("generate_synthetic: could not repair item degrees to the core threshold");
      row_erase(rows[static_cast<std::size_t>(donor_user)], donor_item);
      row_insert(rows[static_cast<std::size_t>(donor_user)], item);
      --item_deg[static_cast<std::size_t>(donor_item)];
      ++item_deg[static_cast<std::size_t>(item)];
    }
  }

  InteractionDataset ds;
  ds.num_users = num_users;
  ds.num_items = num_items;
  ds.row_index = std::move(rows);
  ds.user_keys.reserve(static_cast<std::size_t>(num_users));
  ds.item_keys.reserve(static_cast<std::size_t>(num_items));
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

namespace {

void write_pairs_tsv(const std::string& path, const InteractionDataset& ds) {
  std::ofstream out(path, std::ios::binary);
  if (!out.is_open()) throw std::runtime_error("cannot write " + path);
  for (int u = 0; u < ds.num_users; ++u)
    for (const int i : ds.row_index[static_cast<std::size_t>(u)]) out << u << '\t' << i << '\n';
}

void read_pairs_tsv(const std::string& path, InteractionDataset& ds) {
  std::ifstream in(path);
  if (!in.is_open()) throw std::runtime_error("cannot open " + path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    std::istringstream ss(line);
    int u = -1, i = -1;
    if (!(ss >> u >> i) || u < 0 || u >= ds.num_users || i < 0 || i >= ds.num_items)
      parse_error(path, line_no, "bad pair");
    ds.row_index[static_cast<std::size_t>(u)].push_back(i);
  }
  for (auto& row : ds.row_index) std::sort(row.begin(), row.end());
}

void write_key_map(const std::string& path, const std::vector<std::string>& keys) {
  std::ofstream out(path, std::ios::binary);
  if (!out.is_open()) throw std::runtime_error("cannot write " + path);
  for (std::size_t id = 0; id < keys.size(); ++id) out << keys[id] << '\t' << id << '\n';
}

std::vector<std::string> read_key_map(const std::string& path, int expected) {
  std::vector<std::string> keys(static_cast<std::size_t>(expected));
  std::ifstream in(path);
  if (!in.is_open()) {
    for (int id = 0; id < expected; ++id) keys[static_cast<std::size_t>(id)] = std::to_string(id);
    return keys;
  }
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    const std::size_t tab = line.rfind('\t');
    if (tab == std::string::npos) parse_error(path, line_no, "bad key map row");
    const int id = std::stoi(line.substr(tab + 1));
    if (id < 0 || id >= expected) parse_error(path, line_no, "key map id out of range");
    keys[static_cast<std::size_t>(id)] = line.substr(0, tab);
  }
  return keys;
}

}  // namespace

void save_processed(const std::string& dir, const SplitBundle& bundle) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  write_pairs_tsv(dir + "/train.tsv", bundle.train);
  write_pairs_tsv(dir + "/valid.tsv", bundle.valid);
  write_pairs_tsv(dir + "/test.tsv", bundle.test);
  write_key_map(dir + "/user_map.tsv", bundle.train.user_keys);
  write_key_map(dir + "/item_map.tsv", bundle.train.item_keys);

  const std::int64_t n_train = bundle.train.num_interactions();
  const std::int64_t n_valid = bundle.valid.num_interactions();
  const std::int64_t n_test = bundle.test.num_interactions();
  nlohmann::ordered_json sidecar;
  sidecar["num_users"] = bundle.train.num_users;
  sidecar["num_items"] = bundle.train.num_items;
  sidecar["num_interactions"] = n_train + n_valid + n_test;
  sidecar["seed"] = bundle.seed;
  sidecar["splits"] = {{"train", n_train}, {"valid", n_valid}, {"test", n_test}};
  double dens = 0.0;
  if (bundle.train.num_users > 0 && bundle.train.num_items > 0) {
    dens = static_cast<double>(n_train + n_valid + n_test) /
           (static_cast<double>(bundle.train.num_users) * static_cast<double>(bundle.train.num_items));
  }
  sidecar["density"] = dens;
  std::ofstream out(dir + "/dataset.json", std::ios::binary);
  if (!out.is_open()) throw std::runtime_error("cannot write " + dir + "/dataset.json");
  out << sidecar.dump(2) << '\n';
}

SplitBundle load_processed(const std::string& dir) {
  std::ifstream in(dir + "/dataset.json");
  if (!in.is_open()) throw std::runtime_error("cannot open " + dir + "/dataset.json");
  nlohmann::json sidecar;
  in >> sidecar;

  const int num_users = sidecar.at("num_users").get<int>();
  const int num_items = sidecar.at("num_items").get<int>();

  SplitBundle bundle;
  bundle.seed = sidecar.value("seed", 0ULL);
  const auto user_keys = read_key_map(dir + "/user_map.tsv", num_users);
  const auto item_keys = read_key_map(dir + "/item_map.tsv", num_items);
  for (InteractionDataset* part : {&bundle.train, &bundle.valid, &bundle.test}) {
    part->num_users = num_users;
    part->num_items = num_items;
    part->row_index.assign(static_cast<std::size_t>(num_users), {});
    part->user_keys = user_keys;
    part->item_keys = item_keys;
    for (int id = 0; id < num_users; ++id) part->user_ids.emplace(user_keys[static_cast<std::size_t>(id)], id);
    for (int id = 0; id < num_items; ++id) part->item_ids.emplace(item_keys[static_cast<std::size_t>(id)], id);
  }
  read_pairs_tsv(dir + "/train.tsv", bundle.train);
  read_pairs_tsv(dir + "/valid.tsv", bundle.valid);
  read_pairs_tsv(dir + "/test.tsv", bundle.test);
  return bundle;
}

}  // namespace gcnslim
