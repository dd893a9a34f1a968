#include "lewisim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace lewisim {

int edit_distance(const Message& a, const Message& b, int eos) {
  const auto ca = content(a, eos);
  const auto cb = content(b, eos);
  const int n = static_cast<int>(ca.size());
  const int m = static_cast<int>(cb.size());
  std::vector<int> prev(static_cast<std::size_t>(m) + 1), cur(static_cast<std::size_t>(m) + 1);
  for (int j = 0; j <= m; ++j) prev[static_cast<std::size_t>(j)] = j;
  for (int i = 1; i <= n; ++i) {
    cur[0] = i;
    for (int j = 1; j <= m; ++j) {
      const int sub = prev[static_cast<std::size_t>(j - 1)] +
                      (ca[static_cast<std::size_t>(i - 1)] == cb[static_cast<std::size_t>(j - 1)] ? 0 : 1);
      cur[static_cast<std::size_t>(j)] =
          std::min({prev[static_cast<std::size_t>(j)] + 1, cur[static_cast<std::size_t>(j - 1)] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[static_cast<std::size_t>(m)];
}

int input_distance(const ObjectSpaceSpec& spec, const Object& a, const Object& b) {
  if (static_cast<int>(a.attrs.size()) != spec.num_attributes ||
      static_cast<int>(b.attrs.size()) != spec.num_attributes)
    throw ContractError("input_distance: objects do not match the spec");
  int d = 0;
  for (int i = 0; i < spec.num_attributes; ++i)
    if (a.attrs[static_cast<std::size_t>(i)] != b.attrs[static_cast<std::size_t>(i)]) ++d;
  return d;
}

namespace {

// Average ranks (ties get the mean of their rank range), 1-based.
std::vector<double> average_ranks(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
    const double r = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

std::optional<double> spearman(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size() || u.size() < 2)
    throw ContractError("spearman: need two sequences of equal length >= 2");
  const std::vector<double> ru = average_ranks(u);
  const std::vector<double> rv = average_ranks(v);
  const double n = static_cast<double>(u.size());
  double mu = 0.0, mv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    mu += ru[i];
    mv += rv[i];
  }
  mu /= n;
  mv /= n;
  double cov = 0.0, su = 0.0, sv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double du = ru[i] - mu, dv = rv[i] - mv;
    cov += du * dv;
    su += du * du;
    sv += dv * dv;
  }
  if (su <= 0.0 || sv <= 0.0) return std::nullopt;
  return cov / std::sqrt(su * sv);
}

TopoSimEstimate topographic_similarity(const SpeakerSource& speaker, Rng& rng,
                                       int repeats, int batch) {
  const ObjectSpaceSpec& space = speaker.space();
  if (batch < 2 || static_cast<std::int64_t>(batch) > space.size())
    throw ConfigError("topographic similarity: batch must be in [2, |object space|]");
  TopoSimEstimate est;
  est.repeats = repeats;
  est.batch = batch;
  const int eos = speaker.channel().eos();

  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(repeats));
  const std::size_t pairs = static_cast<std::size_t>(batch) * (batch - 1) / 2;
  std::vector<double> din(pairs), dmsg(pairs);
  for (int r = 0; r < repeats; ++r) {
    std::vector<std::int64_t> objs = rng.sample_without_replacement(space.size(), batch);
    std::vector<Message> msgs;
    speaker.sample_messages(objs, rng, msgs);
    std::vector<Object> decoded;
    decoded.reserve(objs.size());
    for (std::int64_t o : objs) decoded.push_back(index_to_object(space, o));
    std::size_t at = 0;
    for (int i = 0; i < batch; ++i)
      for (int j = i + 1; j < batch; ++j, ++at) {
        din[at] = input_distance(space, decoded[static_cast<std::size_t>(i)],
                                 decoded[static_cast<std::size_t>(j)]);
        dmsg[at] = edit_distance(msgs[static_cast<std::size_t>(i)],
                                 msgs[static_cast<std::size_t>(j)], eos);
      }
    const auto rho = spearman(din, dmsg);
    if (!rho) {
      est.defined = false;
      return est;
    }
    values.push_back(*rho);
  }
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  est.mean = mean;
  est.stddev = values.size() > 1 ? std::sqrt(var / static_cast<double>(values.size() - 1)) : 0.0;
  est.defined = true;
  return est;
}

double generalization_score(const SpeakerSource& speaker, const DatasetSplit& split,
                            const ProbeConfig& cfg, int hidden, bool layer_norm,
                            std::uint64_t master_seed, std::uint64_t probe_index) {
  ProbeTrainResult probe =
      train_probe(speaker, &split.train, ProbeDistribution::kTrain, cfg, hidden,
                  layer_norm, master_seed, probe_index, &split.val);
  Rng rng = Rng::stream(master_seed, "generalization_eval", probe_index);
  return listener_accuracy(speaker, *probe.listener, split.test, rng);
}

double listener_accuracy(const SpeakerSource& speaker, ListenerPolicy& listener,
                         std::span<const std::int64_t> objects, Rng& rng) {
  double acc_weighted = 0.0;
  std::size_t counted = 0;
  const std::size_t chunk = 512;
  std::vector<Message> msgs;
  for (std::size_t at = 0; at < objects.size(); at += chunk) {
    const std::size_t n = std::min(chunk, objects.size() - at);
    std::span<const std::int64_t> part(objects.data() + at, n);
    speaker.sample_messages(part, rng, msgs);
    Graph g;
    ListenerOutput out = listener.forward(g, msgs, part);
    acc_weighted += reconstruction_accuracy(g, out, listener.space(), part) * static_cast<double>(n);
    counted += n;
  }
  return acc_weighted / static_cast<double>(counted);
}

}  // namespace lewisim
