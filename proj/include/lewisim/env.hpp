#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "lewisim/rng.hpp"

namespace lewisim {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Attribute-value world: K attributes, attribute i taking cardinalities[i]
// values. Objects are enumerated in mixed radix with attribute 0 most
// significant.
struct ObjectSpaceSpec {
  int num_attributes = 0;
  std::vector<int> cardinalities;

  ObjectSpaceSpec() = default;
  ObjectSpaceSpec(int k, std::vector<int> cards);
  static ObjectSpaceSpec uniform(int k, int values) {
    return ObjectSpaceSpec(k, std::vector<int>(static_cast<std::size_t>(k), values));
  }

  std::int64_t size() const;               // product of cardinalities
  int one_hot_dim() const;                 // sum of cardinalities
  bool operator==(const ObjectSpaceSpec&) const = default;
};

struct Object {
  std::vector<int> attrs;
  bool operator==(const Object&) const = default;
};

std::int64_t object_to_index(const ObjectSpaceSpec& spec, const Object& obj);
Object index_to_object(const ObjectSpaceSpec& spec, std::int64_t index);

// Concatenated one-hot encoding; length spec.one_hot_dim(), exactly K ones.
std::vector<double> encode_object(const ObjectSpaceSpec& spec, const Object& obj);
void encode_object_into(const ObjectSpaceSpec& spec, std::int64_t index, double* out);

// Recover an object from a one-hot concatenation by per-block argmax.
Object decode_one_hot(const ObjectSpaceSpec& spec, const std::vector<double>& enc);

// Disjoint uniform-without-replacement train/val/test index sets.
struct DatasetSplit {
  std::vector<std::int64_t> train, val, test;
  std::uint64_t seed = 0;
};

DatasetSplit split_dataset(const ObjectSpaceSpec& spec, std::int64_t n_train,
                           std::int64_t n_val, std::int64_t n_test,
                           std::uint64_t seed);

// i.i.d. uniform draws with replacement from `part` (the empirical
// distribution over that split).
std::vector<std::int64_t> sample_batch(const std::vector<std::int64_t>& part,
                                       int batch_size, Rng& rng);

// Plain text dump: three sections headed #train / #val / #test, one index
// per line.
void save_split(const DatasetSplit& split, std::ostream& os);
DatasetSplit load_split(std::istream& is);
void save_split_file(const DatasetSplit& split, const std::string& path);
DatasetSplit load_split_file(const std::string& path);

}  // namespace lewisim
