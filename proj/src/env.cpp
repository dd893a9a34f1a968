#include "lewisim/env.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <sstream>

#include "lewisim/tensor.hpp"

namespace lewisim {

ObjectSpaceSpec::ObjectSpaceSpec(int k, std::vector<int> cards)
    : num_attributes(k), cardinalities(std::move(cards)) {
  if (k < 1 || static_cast<int>(cardinalities.size()) != k)
    throw ConfigError("object space: need K >= 1 cardinalities");
  for (int c : cardinalities)
    if (c < 2) throw ConfigError("object space: every cardinality must be >= 2");
  std::int64_t total = 1;
  for (int c : cardinalities) {
    if (total > std::numeric_limits<std::int64_t>::max() / c)
      throw ConfigError("object space: size overflows the index type");
    total *= c;
  }
}

std::int64_t ObjectSpaceSpec::size() const {
  std::int64_t total = 1;
  for (int c : cardinalities) total *= c;
  return total;
}

int ObjectSpaceSpec::one_hot_dim() const {
  int d = 0;
  for (int c : cardinalities) d += c;
  return d;
}

std::int64_t object_to_index(const ObjectSpaceSpec& spec, const Object& obj) {
  if (static_cast<int>(obj.attrs.size()) != spec.num_attributes)
    throw ContractError("object_to_index: attribute count mismatch");
  std::int64_t idx = 0;
  for (int i = 0; i < spec.num_attributes; ++i) {
    const int a = obj.attrs[static_cast<std::size_t>(i)];
    if (a < 0 || a >= spec.cardinalities[static_cast<std::size_t>(i)])
      throw ContractError("object_to_index: attribute value out of range");
    idx = idx * spec.cardinalities[static_cast<std::size_t>(i)] + a;
  }
  return idx;
}

Object index_to_object(const ObjectSpaceSpec& spec, std::int64_t index) {
  if (index < 0 || index >= spec.size())
    throw ContractError("index_to_object: index out of range");
  Object obj;
  obj.attrs.assign(static_cast<std::size_t>(spec.num_attributes), 0);
  for (int i = spec.num_attributes - 1; i >= 0; --i) {
    const int c = spec.cardinalities[static_cast<std::size_t>(i)];
    obj.attrs[static_cast<std::size_t>(i)] = static_cast<int>(index % c);
    index /= c;
  }
  return obj;
}

std::vector<double> encode_object(const ObjectSpaceSpec& spec, const Object& obj) {
  std::vector<double> enc(static_cast<std::size_t>(spec.one_hot_dim()), 0.0);
  encode_object_into(spec, object_to_index(spec, obj), enc.data());
  return enc;
}

void encode_object_into(const ObjectSpaceSpec& spec, std::int64_t index, double* out) {
  Object obj = index_to_object(spec, index);
  int offset = 0;
  for (int i = 0; i < spec.num_attributes; ++i) {
    out[offset + obj.attrs[static_cast<std::size_t>(i)]] = 1.0;
    offset += spec.cardinalities[static_cast<std::size_t>(i)];
  }
}

Object decode_one_hot(const ObjectSpaceSpec& spec, const std::vector<double>& enc) {
  if (static_cast<int>(enc.size()) != spec.one_hot_dim())
    throw ContractError("decode_one_hot: encoding length mismatch");
  Object obj;
  obj.attrs.reserve(static_cast<std::size_t>(spec.num_attributes));
  int offset = 0;
  for (int c : spec.cardinalities) {
    int best = 0;
    for (int j = 1; j < c; ++j)
      if (enc[static_cast<std::size_t>(offset + j)] > enc[static_cast<std::size_t>(offset + best)])
        best = j;
    obj.attrs.push_back(best);
    offset += c;
  }
  return obj;
}

DatasetSplit split_dataset(const ObjectSpaceSpec& spec, std::int64_t n_train,
                           std::int64_t n_val, std::int64_t n_test,
                           std::uint64_t seed) {
  if (n_train < 0 || n_val < 0 || n_test < 0)
    throw ConfigError("split sizes must be nonnegative");
  const std::int64_t total = n_train + n_val + n_test;
  if (total > spec.size())
    throw ConfigError("split sizes exceed the object space size");
  Rng rng = Rng::stream(seed, "env");
  std::vector<std::int64_t> chosen = rng.sample_without_replacement(spec.size(), total);
  DatasetSplit split;
  split.seed = seed;
  split.train.assign(chosen.begin(), chosen.begin() + n_train);
  split.val.assign(chosen.begin() + n_train, chosen.begin() + n_train + n_val);
  split.test.assign(chosen.begin() + n_train + n_val, chosen.end());
  return split;
}

std::vector<std::int64_t> sample_batch(const std::vector<std::int64_t>& part,
                                       int batch_size, Rng& rng) {
  if (part.empty()) throw ContractError("sample_batch: empty split");
  std::vector<std::int64_t> batch(static_cast<std::size_t>(batch_size));
  for (auto& b : batch)
    b = part[static_cast<std::size_t>(rng.uniform_int(part.size()))];
  return batch;
}

void save_split(const DatasetSplit& split, std::ostream& os) {
  auto dump = [&os](const char* header, const std::vector<std::int64_t>& part) {
    os << header << "\n";
    for (std::int64_t i : part) os << i << "\n";
  };
  dump("#train", split.train);
  dump("#val", split.val);
  dump("#test", split.test);
}

DatasetSplit load_split(std::istream& is) {
  DatasetSplit split;
  std::vector<std::int64_t>* cur = nullptr;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line == "#train") {
      cur = &split.train;
    } else if (line == "#val") {
      cur = &split.val;
    } else if (line == "#test") {
      cur = &split.test;
    } else {
      if (!cur) throw ConfigError("split file: index before any section header");
      std::int64_t v = 0;
      std::istringstream ss(line);
      if (!(ss >> v)) throw ConfigError("split file: bad index line: " + line);
      cur->push_back(v);
    }
  }
  return split;
}

void save_split_file(const DatasetSplit& split, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open split file for writing: " + path);
  save_split(split, os);
}

DatasetSplit load_split_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open split file: " + path);
  return load_split(is);
}

}  // namespace lewisim
