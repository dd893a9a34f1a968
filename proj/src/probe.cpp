#include "lewisim/probe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace lewisim {

namespace {

// x drawn i.i.d. from the requested distribution.
std::vector<std::int64_t> draw_objects(const ObjectSpaceSpec& space,
                                       const std::vector<std::int64_t>* train_objects,
                                       ProbeDistribution dist, int n, Rng& rng) {
  std::vector<std::int64_t> out(static_cast<std::size_t>(n));
  if (dist == ProbeDistribution::kTrain) {
    if (!train_objects || train_objects->empty())
      throw ContractError("probe: train distribution requested without a train split");
    for (auto& o : out)
      o = (*train_objects)[static_cast<std::size_t>(rng.uniform_int(train_objects->size()))];
  } else {
    for (auto& o : out)
      o = static_cast<std::int64_t>(rng.uniform_int(static_cast<std::uint64_t>(space.size())));
  }
  return out;
}

double eval_pairs_nll(ListenerPolicy& listener,
                      const std::vector<std::int64_t>& objects,
                      const std::vector<Message>& msgs) {
  double total = 0.0;
  const std::size_t chunk = 512;
  for (std::size_t at = 0; at < objects.size(); at += chunk) {
    const std::size_t n = std::min(chunk, objects.size() - at);
    Graph g;
    ListenerOutput out = listener.forward(
        g, {msgs.begin() + static_cast<std::ptrdiff_t>(at), msgs.begin() + static_cast<std::ptrdiff_t>(at + n)},
        std::span<const std::int64_t>(objects.data() + at, n));
    for (double lp : g.val(out.loglik).v) total -= lp;
  }
  return total / static_cast<double>(objects.size());
}

}  // namespace

ProbeTrainResult train_probe(const SpeakerSource& speaker,
                             const std::vector<std::int64_t>* train_objects,
                             ProbeDistribution dist, const ProbeConfig& cfg,
                             int hidden, bool layer_norm,
                             std::uint64_t master_seed, std::uint64_t probe_index,
                             const std::vector<std::int64_t>* early_stop_objects) {
  const std::uint64_t speaker_before = speaker.fingerprint();
  const ObjectSpaceSpec& space = speaker.space();

  Rng init_rng = Rng::stream(master_seed, "probe_init", probe_index);
  Rng data_rng = Rng::stream(master_seed, "probe_data", probe_index);
  ProbeTrainResult res;
  res.listener = std::make_unique<ListenerPolicy>(space, speaker.channel(), hidden,
                                                  layer_norm, init_rng);
  AdamConfig adam_cfg;
  adam_cfg.lr = cfg.lr;
  Adam adam(res.listener->params(), adam_cfg);

  // Fixed evaluation pairs for the stopping criterion.
  std::vector<std::int64_t> eval_objects;
  if (early_stop_objects) {
    if (early_stop_objects->empty()) throw ContractError("probe: empty early-stop set");
    eval_objects = *early_stop_objects;
  } else {
    eval_objects = draw_objects(space, train_objects, dist, cfg.eval_samples, data_rng);
  }
  std::vector<Message> eval_msgs;
  speaker.sample_messages(eval_objects, data_rng, eval_msgs);

  double best = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> best_params;
  int bad_evals = 0;
  res.stopping_reason = "max_updates";

  auto snapshot = [&]() {
    best_params.clear();
    for (Param* p : res.listener->params()) best_params.push_back(p->value.v);
  };

  for (int u = 1; u <= cfg.max_updates; ++u) {
    std::vector<std::int64_t> xb = draw_objects(space, train_objects, dist, cfg.batch, data_rng);
    std::vector<Message> msgs;
    speaker.sample_messages(xb, data_rng, msgs);
    Graph g;
    ListenerOutput out = res.listener->forward(g, msgs, xb);
    Graph::Id loss = g.scale(g.mean(out.loglik), -1.0);
    g.backward(loss);
    adam.step();
    res.updates = u;

    if (u % cfg.eval_every == 0) {
      const double cur = eval_pairs_nll(*res.listener, eval_objects, eval_msgs);
      res.curve.push_back(cur);
      if (cur < best - cfg.min_delta) {
        best = cur;
        bad_evals = 0;
        snapshot();
      } else if (++bad_evals >= cfg.patience) {
        res.stopping_reason = "early_stop";
        break;
      }
    }
  }
  if (best_params.empty()) snapshot();
  // Restore the best parameters seen.
  auto params = res.listener->params();
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value.v = best_params[i];
  res.best_eval_loss = std::isfinite(best) ? best : eval_pairs_nll(*res.listener, eval_objects, eval_msgs);

  if (speaker.fingerprint() != speaker_before)
    throw ContractError("probe: speaker parameters changed during probing");
  return res;
}

double expected_nll(const SpeakerSource& speaker, ListenerPolicy& listener,
                    std::span<const std::int64_t> objects, int samples, Rng& rng) {
  std::vector<std::int64_t> xs(static_cast<std::size_t>(samples));
  for (auto& x : xs) x = objects[static_cast<std::size_t>(rng.uniform_int(objects.size()))];
  std::vector<Message> msgs;
  speaker.sample_messages(xs, rng, msgs);
  return eval_pairs_nll(listener, xs, msgs);
}

ProbeReport estimate_decomposition(const SpeakerSource& speaker,
                                   ListenerPolicy& trained_listener,
                                   ListenerPolicy& train_probe,
                                   ListenerPolicy& full_probe,
                                   const DatasetSplit& split,
                                   const ProbeConfig& cfg,
                                   std::uint64_t master_seed,
                                   std::uint64_t probe_index) {
  const std::uint64_t speaker_before = speaker.fingerprint();
  ProbeReport rep;
  Rng rng = Rng::stream(master_seed, "probe_estimate", probe_index);

  // Train-side estimate: matched samples for the probe and the listener.
  {
    std::vector<std::int64_t> xs(static_cast<std::size_t>(cfg.samples));
    for (auto& x : xs) x = split.train[static_cast<std::size_t>(rng.uniform_int(split.train.size()))];
    std::vector<Message> msgs;
    speaker.sample_messages(xs, rng, msgs);
    rep.info_train = eval_pairs_nll(train_probe, xs, msgs);
    rep.total_train = eval_pairs_nll(trained_listener, xs, msgs);
    rep.adapt_train = rep.total_train - rep.info_train;
  }
  // Test-side estimate: x from p_test, probe trained on the full distribution.
  {
    std::vector<std::int64_t> xs(static_cast<std::size_t>(cfg.samples));
    for (auto& x : xs) x = split.test[static_cast<std::size_t>(rng.uniform_int(split.test.size()))];
    std::vector<Message> msgs;
    speaker.sample_messages(xs, rng, msgs);
    rep.info_test = eval_pairs_nll(full_probe, xs, msgs);
    rep.total_test = eval_pairs_nll(trained_listener, xs, msgs);
    rep.adapt_test = rep.total_test - rep.info_test;
  }

  if (speaker.fingerprint() != speaker_before)
    throw ContractError("probe: speaker parameters changed during estimation");
  return rep;
}

void save_probe_report(const ProbeReport& report, std::ostream& os) {
  os.precision(12);
  os << "{\n";
  os << "  \"info_train\": " << report.info_train << ",\n";
  os << "  \"adapt_train\": " << report.adapt_train << ",\n";
  os << "  \"total_train\": " << report.total_train << ",\n";
  os << "  \"info_test\": " << report.info_test << ",\n";
  os << "  \"adapt_test\": " << report.adapt_test << ",\n";
  os << "  \"total_test\": " << report.total_test << ",\n";
  os << "  \"train_probe_updates\": " << report.train_probe_updates << ",\n";
  os << "  \"full_probe_updates\": " << report.full_probe_updates << ",\n";
  os << "  \"train_stop\": \"" << report.train_stop << "\",\n";
  os << "  \"full_stop\": \"" << report.full_stop << "\",\n";
  os << "  \"train_probe_curve\": [";
  for (std::size_t i = 0; i < report.train_probe_curve.size(); ++i)
    os << (i ? ", " : "") << report.train_probe_curve[i];
  os << "],\n  \"full_probe_curve\": [";
  for (std::size_t i = 0; i < report.full_probe_curve.size(); ++i)
    os << (i ? ", " : "") << report.full_probe_curve[i];
  os << "]\n}\n";
}

}  // namespace lewisim
