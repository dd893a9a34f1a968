#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <set>
#include <sstream>

#include "doctest.h"
#include "lewisim/env.hpp"
#include "lewisim/tensor.hpp"

using namespace lewisim;

TEST_CASE("object space sizes") {
  CHECK(ObjectSpaceSpec::uniform(6, 10).size() == 1000000);
  CHECK(ObjectSpaceSpec::uniform(2, 3).size() == 9);
  CHECK(ObjectSpaceSpec::uniform(2, 3).one_hot_dim() == 6);
  CHECK_THROWS_AS(ObjectSpaceSpec(2, {3}), ConfigError);
  CHECK_THROWS_AS(ObjectSpaceSpec(1, {1}), ConfigError);
  CHECK_THROWS_AS(ObjectSpaceSpec::uniform(40, 10), ConfigError);  // index overflow
}

TEST_CASE("mixed-radix indexing: attribute 0 most significant") {
  const ObjectSpaceSpec spec = ObjectSpaceSpec::uniform(2, 3);
  const Object obj = index_to_object(spec, 4);
  CHECK(obj.attrs == std::vector<int>{1, 1});
  CHECK(object_to_index(spec, obj) == 4);
}

TEST_CASE("index round trip on random objects") {
  const ObjectSpaceSpec spec(3, {4, 7, 5});
  Rng rng(42);
  for (int i = 0; i < 1000; ++i) {
    const auto idx = static_cast<std::int64_t>(
        rng.uniform_int(static_cast<std::uint64_t>(spec.size())));
    CHECK(object_to_index(spec, index_to_object(spec, idx)) == idx);
  }
}

TEST_CASE("one-hot encoding") {
  const ObjectSpaceSpec spec = ObjectSpaceSpec::uniform(2, 2);
  const auto enc = encode_object(spec, Object{{0, 1}});
  CHECK(enc == std::vector<double>{1.0, 0.0, 0.0, 1.0});

  const ObjectSpaceSpec big(3, {4, 3, 5});
  Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    const auto idx = static_cast<std::int64_t>(
        rng.uniform_int(static_cast<std::uint64_t>(big.size())));
    const Object obj = index_to_object(big, idx);
    const auto e = encode_object(big, obj);
    double total = 0.0;
    for (double v : e) total += v;
    CHECK(total == big.num_attributes);
    CHECK(decode_one_hot(big, e) == obj);
  }
  CHECK_THROWS_AS(encode_object(spec, Object{{0, 5}}), ContractError);
}

TEST_CASE("splits: disjoint, sized, seed-deterministic") {
  const ObjectSpaceSpec spec = ObjectSpaceSpec::uniform(6, 10);
  const DatasetSplit split = split_dataset(spec, 4000, 1000, 1000, 123);
  CHECK(split.train.size() == 4000);
  CHECK(split.val.size() == 1000);
  CHECK(split.test.size() == 1000);
  std::set<std::int64_t> all(split.train.begin(), split.train.end());
  all.insert(split.val.begin(), split.val.end());
  all.insert(split.test.begin(), split.test.end());
  CHECK(all.size() == 6000);  // pairwise disjoint
  CHECK(6000 < spec.size() / 100);  // < 1% of the environment

  const DatasetSplit again = split_dataset(spec, 4000, 1000, 1000, 123);
  CHECK(split.train == again.train);
  CHECK(split.val == again.val);
  CHECK(split.test == again.test);
  const DatasetSplit other = split_dataset(spec, 4000, 1000, 1000, 124);
  CHECK(split.train != other.train);
}

TEST_CASE("splits covering the whole space partition it") {
  const ObjectSpaceSpec spec = ObjectSpaceSpec::uniform(2, 4);
  const DatasetSplit split = split_dataset(spec, 10, 3, 3, 5);
  std::set<std::int64_t> all(split.train.begin(), split.train.end());
  all.insert(split.val.begin(), split.val.end());
  all.insert(split.test.begin(), split.test.end());
  CHECK(static_cast<std::int64_t>(all.size()) == spec.size());
  CHECK(*all.begin() == 0);
  CHECK(*all.rbegin() == spec.size() - 1);
  CHECK_THROWS_AS(split_dataset(spec, 17, 0, 0, 5), ConfigError);
}

TEST_CASE("batch sampling: replacement, uniformity, determinism") {
  Rng rng(9);
  const std::vector<std::int64_t> singleton{42};
  for (std::int64_t v : sample_batch(singleton, 8, rng)) CHECK(v == 42);

  const std::vector<std::int64_t> four{10, 20, 30, 40};
  std::map<std::int64_t, int> counts;
  Rng rng2(10);
  const int draws = 100000;
  for (std::int64_t v : sample_batch(four, draws, rng2)) counts[v]++;
  for (const auto& [v, n] : counts)
    CHECK(std::abs(n / static_cast<double>(draws) - 0.25) < 0.01);

  Rng a(3), b(3);
  CHECK(sample_batch(four, 16, a) == sample_batch(four, 16, b));
  CHECK_THROWS_AS(sample_batch({}, 4, rng), ContractError);
}

TEST_CASE("split file round trip") {
  const ObjectSpaceSpec spec = ObjectSpaceSpec::uniform(3, 5);
  const DatasetSplit split = split_dataset(spec, 20, 5, 5, 77);
  std::ostringstream os;
  save_split(split, os);
  std::istringstream is(os.str());
  const DatasetSplit loaded = load_split(is);
  CHECK(loaded.train == split.train);
  CHECK(loaded.val == split.val);
  CHECK(loaded.test == split.test);
}
