#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "gcnslim/dataset.hpp"
#include "oracles.hpp"

using namespace gcnslim;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
  const auto path = std::filesystem::temp_directory_path() / ("gcnslim_test_" + name);
  std::ofstream out(path, std::ios::binary);
  out << content;
  return path.string();
}

std::set<std::pair<std::string, std::string>> as_pair_set(const std::vector<RawInteraction>& v) {
  std::set<std::pair<std::string, std::string>> s;
  for (const auto& p : v) s.emplace(p.user_key, p.item_key);
  return s;
}

}  // namespace

TEST_CASE("load_movielens parses :: records and applies the rating threshold") {
  const auto path = write_temp("ml.dat",
                               "1::10::5::978300760\n"
                               "1::11::2::978300761\n"
                               "2::10::3::978300762\n"
                               "2::12::4.5::978300763\n");
  const auto records = load_movielens(path, 3.0);
  REQUIRE(records.size() == 3);
  CHECK(records[0].user_key == "1");
  CHECK(records[0].item_key == "10");
  CHECK(records[0].rating == 5.0);
  CHECK(records[0].timestamp == 978300760);
  CHECK(records[1].user_key == "2");  // the 2-star row is dropped
  CHECK(records[2].rating == 4.5);
}

TEST_CASE("load_movielens keeps records without a rating column") {
  const auto path = write_temp("implicit.tsv", "a\tx\nb\ty\nb\tz\n");
  const auto records = load_movielens(path, 3.0);
  REQUIRE(records.size() == 3);
  CHECK_FALSE(records[0].rating.has_value());
}

TEST_CASE("load_movielens accepts a headered CSV") {
  const auto path = write_temp("rows.csv",
                               "user,item,rating,timestamp\n"
                               "u1,i1,4,100\n"
                               "u1,i2,1,101\n"
                               "u2,i1,5,102\n");
  const auto records = load_movielens(path, 3.0);
  REQUIRE(records.size() == 2);
  CHECK(records[0].user_key == "u1");
  CHECK(records[1].user_key == "u2");
}

TEST_CASE("load_movielens keeps the first occurrence of a duplicated pair") {
  const auto path = write_temp("dup.dat", "1::10::5::1\n1::10::4::2\n1::11::4::3\n");
  const auto records = load_movielens(path, 0.0);
  REQUIRE(records.size() == 2);
  CHECK(records[0].rating == 5.0);
}

TEST_CASE("load_movielens reports the offending line number") {
  const auto path = write_temp("bad.dat", "1::10::5::1\n2::11::not_a_rating::2\n");
  CHECK_THROWS_WITH_AS(load_movielens(path, 0.0),
                       doctest::Contains("line 2"), std::runtime_error);
  const auto headerless = write_temp("bad.csv", "1,10,5,1\n");
  CHECK_THROWS_AS(load_movielens(headerless, 0.0), std::runtime_error);
}

TEST_CASE("load_movielens rejects an empty result") {
  const auto path = write_temp("low.dat", "1::10::1::1\n2::11::2::2\n");
  CHECK_THROWS_WITH_AS(load_movielens(path, 3.0), doctest::Contains("empty"), std::runtime_error);
}

TEST_CASE("kcore_filter leaves an already-clean graph unchanged") {
  std::vector<RawInteraction> pairs;
  for (const auto& [u, i] : std::vector<std::pair<std::string, std::string>>{
           {"a", "x"}, {"a", "y"}, {"b", "x"}, {"b", "y"}}) {
    pairs.push_back({u, i, std::nullopt, std::nullopt});
  }
  const auto filtered = kcore_filter(pairs, 2);
  REQUIRE(filtered.size() == 4);
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    CHECK(filtered[p].user_key == pairs[p].user_key);
    CHECK(filtered[p].item_key == pairs[p].item_key);
  }
}

TEST_CASE("kcore_filter matches the exhaustive deletion oracle on a handcrafted graph") {
  // u3 has a single edge to z; deleting it drops z below 2, which cascades.
  std::vector<RawInteraction> pairs;
  for (const auto& [u, i] : std::vector<std::pair<std::string, std::string>>{
           {"u0", "x"}, {"u0", "y"}, {"u1", "x"}, {"u1", "y"},
           {"u2", "y"}, {"u2", "z"}, {"u3", "z"}}) {
    pairs.push_back({u, i, std::nullopt, std::nullopt});
  }
  const auto got = kcore_filter(pairs, 2);
  const auto expected = oracle::kcore(pairs, 2, true);
  CHECK(as_pair_set(got) == as_pair_set(expected));
  // Deleting u3 cascades through z and u2; the u0/u1 x/y square survives.
  CHECK(as_pair_set(got) ==
        std::set<std::pair<std::string, std::string>>{
            {"u0", "x"}, {"u0", "y"}, {"u1", "x"}, {"u1", "y"}});
}

TEST_CASE("kcore_filter fixed point is deletion-order independent on random graphs") {
  Rng rng(2024);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<RawInteraction> pairs;
    const int users = 4 + rng.next_int(6);
    const int items = 4 + rng.next_int(6);
    for (int u = 0; u < users; ++u)
      for (int i = 0; i < items; ++i)
        if (rng.next_unit() < 0.4)
          pairs.push_back({"u" + std::to_string(u), "i" + std::to_string(i), std::nullopt, std::nullopt});
    const auto user_first = oracle::kcore(pairs, 2, true);
    const auto item_first = oracle::kcore(pairs, 2, false);
    CHECK(as_pair_set(user_first) == as_pair_set(item_first));
    if (user_first.empty()) {
      CHECK_THROWS_AS(kcore_filter(pairs, 2), std::runtime_error);
    } else {
      CHECK(as_pair_set(kcore_filter(pairs, 2)) == as_pair_set(user_first));
    }
  }
}

TEST_CASE("kcore_filter input validation") {
  std::vector<RawInteraction> pairs{{"a", "x", std::nullopt, std::nullopt}};
  CHECK_THROWS_AS(kcore_filter(pairs, 0), std::invalid_argument);
  CHECK_THROWS_WITH_AS(kcore_filter(pairs, 2), doctest::Contains("empty"), std::runtime_error);
}

TEST_CASE("build_dataset assigns contiguous first-seen IDs") {
  std::vector<RawInteraction> pairs;
  for (const auto& [u, i] : std::vector<std::pair<std::string, std::string>>{
           {"carol", "zz"}, {"alice", "zz"}, {"carol", "aa"}, {"alice", "mm"}}) {
    pairs.push_back({u, i, std::nullopt, std::nullopt});
  }
  const auto ds = build_dataset(pairs);
  CHECK(ds.num_users == 2);
  CHECK(ds.num_items == 3);
  CHECK(ds.user_keys == std::vector<std::string>{"carol", "alice"});
  CHECK(ds.item_keys == std::vector<std::string>{"zz", "aa", "mm"});
  CHECK(ds.row_index[0] == std::vector<int>{0, 1});  // carol: zz, aa
  CHECK(ds.row_index[1] == std::vector<int>{0, 2});  // alice: zz, mm
  CHECK(ds.num_interactions() == 4);
  CHECK(ds.has_pair(0, 1));
  CHECK_FALSE(ds.has_pair(1, 1));
  CHECK(ds.density() == doctest::Approx(4.0 / 6.0));
}

TEST_CASE("split keeps per-user partitions disjoint and exhaustive") {
  Rng rng(11);
  const auto ds = test_util::random_dataset(25, 30, rng);
  const auto bundle = split(ds, {0.6, 0.2, 0.2}, 5);
  for (int u = 0; u < ds.num_users; ++u) {
    std::vector<int> merged = bundle.train.row_index[u];
    merged.insert(merged.end(), bundle.valid.row_index[u].begin(), bundle.valid.row_index[u].end());
    merged.insert(merged.end(), bundle.test.row_index[u].begin(), bundle.test.row_index[u].end());
    std::sort(merged.begin(), merged.end());
    CHECK(merged == ds.row_index[u]);
    CHECK(bundle.train.row_index[u].size() >= 1);
  }
}

TEST_CASE("split rounds remainders toward train then test") {
  const auto ds = test_util::make_dataset(2, 10, {{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}, {0, 1, 2, 3, 4, 5, 6}});
  const auto bundle = split(ds, {0.6, 0.2, 0.2}, 3);
  CHECK(bundle.train.row_index[0].size() == 6);
  CHECK(bundle.valid.row_index[0].size() == 2);
  CHECK(bundle.test.row_index[0].size() == 2);
  // 7 items: floors are 4/1/1, the leftover goes to train.
  CHECK(bundle.train.row_index[1].size() == 5);
  CHECK(bundle.valid.row_index[1].size() == 1);
  CHECK(bundle.test.row_index[1].size() == 1);
}

TEST_CASE("split is deterministic per seed") {
  Rng rng(12);
  const auto ds = test_util::random_dataset(15, 20, rng);
  const auto a = split(ds, {0.6, 0.2, 0.2}, 9);
  const auto b = split(ds, {0.6, 0.2, 0.2}, 9);
  const auto c = split(ds, {0.6, 0.2, 0.2}, 10);
  CHECK(a.train.row_index == b.train.row_index);
  CHECK(a.valid.row_index == b.valid.row_index);
  CHECK(a.test.row_index == b.test.row_index);
  CHECK(a.train.row_index != c.train.row_index);
}

TEST_CASE("split validates ratios") {
  const auto ds = test_util::make_dataset(1, 3, {{0, 1, 2}});
  CHECK_THROWS_AS(split(ds, {0.5, 0.2, 0.2}, 1), std::invalid_argument);
  CHECK_THROWS_AS(split(ds, {1.0, 0.0, 0.0}, 1), std::invalid_argument);
}

TEST_CASE("sample_negatives avoids train items") {
  const auto ds = test_util::make_dataset(2, 12, {{0, 3, 7}, {1}});
  Rng rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    for (const int j : sample_negatives(0, 5, ds, rng)) {
      CHECK(j >= 0);
      CHECK(j < 12);
      CHECK_FALSE(ds.has_pair(0, j));
    }
  }
}

TEST_CASE("sample_negatives rejects users with exhausted candidates") {
  const auto ds = test_util::make_dataset(1, 3, {{0, 1, 2}});
  Rng rng(1);
  CHECK_THROWS_AS(sample_negatives(0, 1, ds, rng), std::runtime_error);
  CHECK_THROWS_AS(sample_negatives(5, 1, ds, rng), std::invalid_argument);
}

TEST_CASE("sample_negatives draws uniformly over the candidate set") {
  // User 0 interacted with item 0 only; the other 10 items should be uniform.
  const auto ds = test_util::make_dataset(1, 11, {{0}});
  Rng rng(123);
  std::vector<int> counts(11, 0);
  const int draws = 20000;
  for (const int j : sample_negatives(0, draws, ds, rng)) ++counts[j];
  CHECK(counts[0] == 0);
  const double expected = draws / 10.0;
  double chi2 = 0.0;
  for (int i = 1; i <= 10; ++i) chi2 += (counts[i] - expected) * (counts[i] - expected) / expected;
  // 9 degrees of freedom; 27.88 is the 0.999 quantile.
  CHECK(chi2 < 27.88);
}

TEST_CASE("generate_synthetic hits exact counts with a 10-core-clean result") {
  SyntheticSkewConfig cfg;
  cfg.num_users = 300;
  cfg.num_items = 80;
  cfg.target_interactions = 9000;
  cfg.popularity_exponent = 1.0;
  cfg.seed = 5;
  const auto ds = generate_synthetic(cfg);
  CHECK(ds.num_users == 300);
  CHECK(ds.num_items == 80);
  CHECK(ds.num_interactions() == 9000);

  std::vector<int> item_deg(80, 0);
  for (int u = 0; u < ds.num_users; ++u) {
    CHECK(ds.row_index[u].size() >= 10);
    std::set<int> unique(ds.row_index[u].begin(), ds.row_index[u].end());
    CHECK(unique.size() == ds.row_index[u].size());
    for (const int i : ds.row_index[u]) ++item_deg[i];
  }
  for (int i = 0; i < 80; ++i) CHECK(item_deg[i] >= 10);

  // Power-law popularity: the most popular item clearly outdraws the least.
  CHECK(item_deg[0] > 2 * item_deg[79]);

  const auto again = generate_synthetic(cfg);
  CHECK(again.row_index == ds.row_index);
}

TEST_CASE("generate_synthetic validates feasibility") {
  SyntheticSkewConfig cfg;
  cfg.num_users = 10;
  cfg.num_items = 10;
  cfg.target_interactions = 50;  // below 10 per user
  CHECK_THROWS_AS(generate_synthetic(cfg), std::invalid_argument);
  cfg.target_interactions = 101;  // above M*N
  CHECK_THROWS_AS(generate_synthetic(cfg), std::invalid_argument);
}

TEST_CASE("save_processed/load_processed round-trips and reruns byte-identically") {
  Rng rng(31);
  const auto ds = test_util::random_dataset(12, 9, rng);
  const auto bundle = split(ds, {0.6, 0.2, 0.2}, 17);

  const auto dir = (std::filesystem::temp_directory_path() / "gcnslim_test_processed").string();
  std::filesystem::remove_all(dir);
  save_processed(dir, bundle);
  const auto loaded = load_processed(dir);
  CHECK(loaded.seed == 17);
  CHECK(loaded.train.row_index == bundle.train.row_index);
  CHECK(loaded.valid.row_index == bundle.valid.row_index);
  CHECK(loaded.test.row_index == bundle.test.row_index);
  CHECK(loaded.train.user_keys == bundle.train.user_keys);
  CHECK(loaded.train.item_keys == bundle.train.item_keys);

  auto slurp = [](const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  const auto first = slurp(dir + "/train.tsv") + slurp(dir + "/dataset.json");
  save_processed(dir, bundle);
  CHECK(first == slurp(dir + "/train.tsv") + slurp(dir + "/dataset.json"));
}
