// Test-only helpers: hand-built speakers and independent brute-force oracles
// kept deliberately separate from the library implementations they check.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <vector>

#include "lewisim/oracle.hpp"
#include "lewisim/speaker_source.hpp"

namespace lewisim::testing {

// ---- hand-built speakers -------------------------------------------------

// Deterministic object -> message lookup.
class LookupSpeaker final : public SpeakerSource {
 public:
  LookupSpeaker(ObjectSpaceSpec spec, Channel ch, std::vector<Message> table)
      : spec_(std::move(spec)), channel_(ch), table_(std::move(table)) {}
  const ObjectSpaceSpec& space() const override { return spec_; }
  Channel channel() const override { return channel_; }
  void sample_messages(std::span<const std::int64_t> objects, Rng&,
                       std::vector<Message>& out) const override {
    out.clear();
    for (std::int64_t o : objects) out.push_back(table_[static_cast<std::size_t>(o)]);
  }
  const std::vector<Message>& table() const { return table_; }

 private:
  ObjectSpaceSpec spec_;
  Channel channel_;
  std::vector<Message> table_;
};

// Same message for every object (fully ambiguous).
inline LookupSpeaker constant_speaker(const ObjectSpaceSpec& spec, Channel ch,
                                      Message msg) {
  return LookupSpeaker(spec, ch,
                       std::vector<Message>(static_cast<std::size_t>(spec.size()), msg));
}

// Messages i.i.d. uniform over fixed-length contents, independent of objects.
class RandomSpeaker final : public SpeakerSource {
 public:
  RandomSpeaker(ObjectSpaceSpec spec, Channel ch, int content_len)
      : spec_(std::move(spec)), channel_(ch), len_(content_len) {}
  const ObjectSpaceSpec& space() const override { return spec_; }
  Channel channel() const override { return channel_; }
  void sample_messages(std::span<const std::int64_t> objects, Rng& rng,
                       std::vector<Message>& out) const override {
    out.assign(objects.size(), {});
    for (auto& m : out) {
      for (int t = 0; t < len_; ++t)
        m.symbols.push_back(static_cast<std::int32_t>(
            rng.uniform_int(static_cast<std::uint64_t>(channel_.vocab - 1))));
      if (len_ < channel_.max_len) m.symbols.push_back(static_cast<std::int32_t>(channel_.eos()));
    }
  }

 private:
  ObjectSpaceSpec spec_;
  Channel channel_;
  int len_;
};

// One symbol per attribute value at a fixed position, then EoS if room.
// Requires every cardinality <= vocab - 1 and max_len >= K.
inline LookupSpeaker compositional_speaker(const ObjectSpaceSpec& spec, Channel ch) {
  std::vector<Message> table;
  table.reserve(static_cast<std::size_t>(spec.size()));
  for (std::int64_t i = 0; i < spec.size(); ++i) {
    const Object obj = index_to_object(spec, i);
    Message m;
    for (int a : obj.attrs) m.symbols.push_back(static_cast<std::int32_t>(a));
    if (static_cast<int>(m.symbols.size()) < ch.max_len)
      m.symbols.push_back(static_cast<std::int32_t>(ch.eos()));
    table.push_back(std::move(m));
  }
  return LookupSpeaker(spec, ch, std::move(table));
}

// Distinct messages per object (unambiguous), mixed-radix over content symbols.
inline LookupSpeaker bijective_speaker(const ObjectSpaceSpec& spec, Channel ch) {
  const int base = ch.vocab - 1;
  std::vector<Message> table;
  for (std::int64_t i = 0; i < spec.size(); ++i) {
    Message m;
    std::int64_t v = i;
    for (int t = 0; t < ch.max_len; ++t) {
      m.symbols.push_back(static_cast<std::int32_t>(v % base));
      v /= base;
    }
    if (v != 0) throw std::runtime_error("bijective_speaker: channel too small");
    table.push_back(std::move(m));
  }
  return LookupSpeaker(spec, ch, std::move(table));
}

// ---- exact message enumeration --------------------------------------------

// All sequences a sampler can emit: EoS-terminated prefixes plus full-length
// EoS-free sequences.
inline std::vector<Message> enumerate_messages(Channel ch) {
  std::vector<Message> out;
  std::vector<std::int32_t> prefix;
  const int eos = ch.eos();
  std::function<void()> walk = [&]() {
    {
      Message m;
      m.symbols.assign(prefix.begin(), prefix.end());
      m.symbols.push_back(static_cast<std::int32_t>(eos));
      out.push_back(std::move(m));
    }
    if (static_cast<int>(prefix.size()) + 1 == ch.max_len) {
      for (int s = 0; s < eos; ++s) {
        Message m;
        m.symbols.assign(prefix.begin(), prefix.end());
        m.symbols.push_back(static_cast<std::int32_t>(s));
        out.push_back(std::move(m));
      }
      return;
    }
    for (int s = 0; s < eos; ++s) {
      prefix.push_back(static_cast<std::int32_t>(s));
      walk();
      prefix.pop_back();
    }
  };
  walk();
  return out;
}

// Exact pi(m|x) for a policy exposed through per-step distributions.
inline double message_probability(
    const std::function<std::vector<double>(std::int64_t, std::span<const std::int32_t>)>& step_probs,
    std::int64_t object, const Message& msg) {
  double p = 1.0;
  for (std::size_t t = 0; t < msg.symbols.size(); ++t) {
    const std::vector<double> probs =
        step_probs(object, {msg.symbols.data(), t});
    p *= probs[static_cast<std::size_t>(msg.symbols[t])];
  }
  return p;
}

// Tabular speaker matrix from exact per-step distributions.
inline TabularGame tabular_from_steps(
    const ObjectSpaceSpec& spec, Channel ch,
    const std::function<std::vector<double>(std::int64_t, std::span<const std::int32_t>)>& step_probs,
    const std::vector<double>& prior) {
  const std::vector<Message> msgs = enumerate_messages(ch);
  TabularGame game;
  game.prior = prior;
  for (std::int64_t x = 0; x < spec.size(); ++x) {
    std::vector<double> row;
    row.reserve(msgs.size());
    double total = 0.0;
    for (const Message& m : msgs) {
      const double p = message_probability(step_probs, x, m);
      row.push_back(p);
      total += p;
    }
    for (double& p : row) p /= total;  // strip rounding; sums are 1 within 1e-12
    game.speaker.push_back(std::move(row));
  }
  game.listener.assign(msgs.size(),
                       std::vector<double>(static_cast<std::size_t>(spec.size()),
                                           1.0 / static_cast<double>(spec.size())));
  return game;
}

// ---- brute-force oracles ---------------------------------------------------

// Exponential-time Levenshtein recursion for short strings.
inline int naive_levenshtein(std::span<const std::int32_t> a, std::span<const std::int32_t> b) {
  if (a.empty()) return static_cast<int>(b.size());
  if (b.empty()) return static_cast<int>(a.size());
  const int del = naive_levenshtein(a.subspan(1), b) + 1;
  const int ins = naive_levenshtein(a, b.subspan(1)) + 1;
  const int sub = naive_levenshtein(a.subspan(1), b.subspan(1)) + (a[0] == b[0] ? 0 : 1);
  return std::min({del, ins, sub});
}

// Rank-then-Pearson with tie-averaged ranks, written independently.
inline double naive_spearman(const std::vector<double>& u, const std::vector<double>& v) {
  auto ranks = [](const std::vector<double>& x) {
    std::vector<double> r(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      double less = 0, equal = 0;
      for (double other : x) {
        if (other < x[i]) ++less;
        if (other == x[i]) ++equal;
      }
      r[i] = less + 0.5 * (equal + 1);  // average of rank range [less+1, less+equal]
    }
    return r;
  };
  const std::vector<double> ru = ranks(u), rv = ranks(v);
  double mu = 0, mv = 0;
  for (std::size_t i = 0; i < ru.size(); ++i) {
    mu += ru[i];
    mv += rv[i];
  }
  mu /= static_cast<double>(ru.size());
  mv /= static_cast<double>(rv.size());
  double cov = 0, su = 0, sv = 0;
  for (std::size_t i = 0; i < ru.size(); ++i) {
    cov += (ru[i] - mu) * (rv[i] - mv);
    su += (ru[i] - mu) * (ru[i] - mu);
    sv += (rv[i] - mv) * (rv[i] - mv);
  }
  return cov / std::sqrt(su * sv);
}

}  // namespace lewisim::testing
