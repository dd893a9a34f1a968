#include "lewisim/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>

namespace lewisim {

void RunConfig::validate() const {
  if (space.num_attributes < 1) throw ConfigError("space.attributes: must be >= 1");
  if (n_train < 1 || n_val < 0 || n_test < 0)
    throw ConfigError("splits: need n_train >= 1 and nonnegative sizes");
  if (n_train + n_val + n_test > space.size())
    throw ConfigError("splits: sizes exceed the object space size");
  if (channel.vocab < 2) throw ConfigError("channel.vocab: must be >= 2 (EoS is reserved)");
  if (channel.max_len < 1) throw ConfigError("channel.max_len: must be >= 1");
  if (hidden < 1) throw ConfigError("model.hidden: must be >= 1");
  if (lr <= 0.0) throw ConfigError("optim.lr: must be > 0");
  if (batch < 1) throw ConfigError("optim.batch: must be >= 1");
  if (alpha < 0.0 || alpha > 0.5) throw ConfigError("alpha: must lie in [0, 0.5]");
  if (regime == RegimeKind::kPartial && n_step < 1)
    throw ConfigError("regime.n_step: must be >= 1");
  if (regime == RegimeKind::kEarlyStopping && (es_patience < 1 || es_eval_every < 1))
    throw ConfigError("regime.patience / regime.eval_every: must be >= 1");
  if (game == GameKind::kDiscrimination) {
    if (candidates < 2) throw ConfigError("game.candidates: must be >= 2");
    if (candidates > n_train || (n_val > 0 && candidates > n_val) ||
        (n_test > 0 && candidates > n_test))
      throw ConfigError("game.candidates: must not exceed any nonempty split size");
    if (regime != RegimeKind::kContinuous)
      throw ConfigError("regime: the discrimination game runs with the continuous regime");
    if (alpha != 0.5) throw ConfigError("alpha: probe-balanced rewards are reconstruction-only");
  }
  if (max_speaker_updates < 1) throw ConfigError("run.max_speaker_updates: must be >= 1");
  if (eval_every < 1) throw ConfigError("run.eval_every: must be >= 1");
  if (probe.cadence < 1) throw ConfigError("probe.cadence: must be >= 1");
  if (toposim_batch < 2 || static_cast<std::int64_t>(toposim_batch) > space.size())
    throw ConfigError("toposim.batch: must be in [2, |object space|]");
  for (const auto* reg : {&reg_speaker, &reg_listener})
    if (reg->dropout < 0.0 || reg->dropout >= 1.0 || reg->weight_decay < 0.0)
      throw ConfigError("regularization: dropout in [0,1), weight_decay >= 0");
}

double alpha_balanced_reward(double probe_loglik, double listener_loglik, double alpha) {
  if (alpha < 0.0 || alpha > 0.5)
    throw ConfigError("alpha: must lie in [0, 0.5]");
  return (1.0 - 2.0 * alpha) * probe_loglik + alpha * listener_loglik;
}

std::string metrics_csv_header() {
  return "update,split_loss_train,split_loss_test,acc_train,acc_test,"
         "info_train,info_test,adapt_train,adapt_test,speaker_entropy,toposim";
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

}  // namespace

std::string metrics_csv_row(const MetricsRow& r) {
  std::string out = std::to_string(r.update);
  out += "," + fmt(r.split_loss_train) + "," + fmt(r.split_loss_test);
  out += "," + fmt(r.acc_train) + "," + fmt(r.acc_test);
  out += "," + fmt(r.info_train) + "," + fmt(r.info_test);
  out += "," + fmt(r.adapt_train) + "," + fmt(r.adapt_test);
  out += "," + fmt(r.speaker_entropy) + "," + fmt(r.toposim);
  return out;
}

void TrainResult::restore_best() {
  if (best_speaker_values.empty()) return;
  auto apply = [](std::vector<Param*> params, const std::vector<std::vector<double>>& values) {
    if (params.size() != values.size()) throw ContractError("restore_best: parameter count drift");
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->value.v = values[i];
  };
  apply(speaker->params(), best_speaker_values);
  if (listener) apply(listener->params(), best_listener_values);
  if (disc) apply(disc->params(), best_listener_values);
}

double listener_update(ListenerPolicy& listener, Adam& adam, SpeakerPolicy& speaker,
                       std::span<const std::int64_t> objects, Rng& msg_rng,
                       double dropout, Rng* noise) {
  Graph g;
  SpeakerRollout roll = speaker.sample(g, objects, msg_rng);
  ListenerOutput out = listener.forward(g, roll.messages, objects, dropout, noise);
  Graph::Id loss = g.scale(g.mean(out.loglik), -1.0);
  const double value = g.val(loss).v[0];
  if (!std::isfinite(value)) throw NumericError("listener loss is not finite", loss);
  g.backward(loss);
  // The rollout shares the graph, so clear any gradient that reached the
  // speaker's parameters; this update owns only the listener.
  for (Param* p : speaker.params()) p->zero_grad();
  adam.step();
  return value;
}

double speaker_update(SpeakerPolicy& speaker, Adam& adam,
                      std::span<const std::int64_t> objects,
                      const std::function<std::vector<double>(const std::vector<Message>&)>& rewards,
                      double entropy_coef, Rng& sample_rng, double dropout, Rng* noise) {
  Graph g;
  SpeakerRollout roll = speaker.sample(g, objects, sample_rng, dropout, noise);
  const std::vector<double> r = rewards(roll.messages);
  if (r.size() != objects.size()) throw ContractError("speaker_update: reward count mismatch");
  const double batch = static_cast<double>(objects.size());
  double baseline = 0.0;
  for (double ri : r) {
    if (!std::isfinite(ri)) throw NumericError("non-finite reward", -1);
    baseline += ri;
  }
  baseline /= batch;
  std::vector<double> w(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) w[i] = -(r[i] - baseline) / batch;
  Graph::Id surrogate = g.weighted_sum(roll.logp_total, std::move(w));
  Graph::Id bonus = g.weighted_sum(
      roll.entropy_total, std::vector<double>(r.size(), -entropy_coef / batch));
  Graph::Id loss = g.add(surrogate, bonus);
  const double value = g.val(loss).v[0];
  if (!std::isfinite(value)) throw NumericError("speaker surrogate is not finite", loss);
  g.backward(loss);
  adam.step();
  return value;
}

DatasetSplit make_split(const RunConfig& cfg) {
  return split_dataset(cfg.space, cfg.n_train, cfg.n_val, cfg.n_test, cfg.seed);
}

namespace {

// Shared run machinery for all regimes and both games.
class Trainer {
 public:
  Trainer(const RunConfig& cfg, const DatasetSplit& split)
      : cfg_(cfg),
        split_(split),
        sampling_rng_(Rng::stream(cfg.seed, "sampling")),
        speaker_noise_(Rng::stream(cfg.seed, "speaker_noise")),
        listener_noise_(Rng::stream(cfg.seed, "listener_noise")) {
    Rng speaker_init = Rng::stream(cfg_.seed, "speaker_init");
    result_.speaker = std::make_unique<SpeakerPolicy>(cfg_.space, cfg_.channel, cfg_.hidden,
                                                      cfg_.reg_speaker.layer_norm, speaker_init);
    speaker_adam_ = std::make_unique<Adam>(result_.speaker->params(), speaker_adam_config());
    make_listener();
  }

  TrainResult run() {
    try {
      loop();
    } catch (const NumericError& e) {
      result_.failed = true;
      result_.failed_update = update_;
      result_.failure = e.what();
    }
    return std::move(result_);
  }

 private:
  AdamConfig speaker_adam_config() const {
    return AdamConfig{cfg_.lr, cfg_.beta1, cfg_.beta2, 1e-8, cfg_.reg_speaker.weight_decay};
  }
  AdamConfig listener_adam_config() const {
    return AdamConfig{cfg_.lr, cfg_.beta1, cfg_.beta2, 1e-8, cfg_.reg_listener.weight_decay};
  }

  void make_listener() {
    Rng init = Rng::stream(cfg_.seed, "listener_init",
                           static_cast<std::uint64_t>(result_.listener_reinits));
    if (cfg_.game == GameKind::kReconstruction) {
      result_.listener = std::make_unique<ListenerPolicy>(
          cfg_.space, cfg_.channel, cfg_.hidden, cfg_.reg_listener.layer_norm, init);
      listener_adam_ = std::make_unique<Adam>(result_.listener->params(), listener_adam_config());
    } else {
      result_.disc = std::make_unique<DiscriminationListener>(
          cfg_.space, cfg_.channel, cfg_.hidden, cfg_.hidden, cfg_.reg_listener.layer_norm, init);
      listener_adam_ = std::make_unique<Adam>(result_.disc->params(), listener_adam_config());
    }
    ++result_.listener_reinits;
  }

  NeuralSpeakerSource speaker_source() { return NeuralSpeakerSource(*result_.speaker); }

  // ---- per-update phases ----

  void inner_train_listener() {
    const auto reinit_idx = static_cast<std::uint64_t>(result_.listener_reinits);
    make_listener();
    Rng inner = Rng::stream(cfg_.seed, "inner", reinit_idx);
    int used = 0;
    if (cfg_.regime == RegimeKind::kPartial) {
      for (int i = 0; i < cfg_.n_step; ++i) {
        auto xb = sample_batch(split_.train, cfg_.batch, inner);
        listener_update(*result_.listener, *listener_adam_, *result_.speaker, xb, inner,
                        cfg_.reg_listener.dropout,
                        cfg_.reg_listener.dropout > 0 ? &listener_noise_ : nullptr);
        ++used;
      }
    } else {  // early stopping on the validation split
      Rng eval_rng = Rng::stream(cfg_.seed, "inner_eval", reinit_idx);
      std::vector<Message> val_msgs;
      NeuralSpeakerSource src = speaker_source();
      src.sample_messages(split_.val, eval_rng, val_msgs);
      double best = std::numeric_limits<double>::infinity();
      std::vector<std::vector<double>> best_values;
      int bad = 0;
      auto snapshot = [&]() {
        best_values.clear();
        for (Param* p : result_.listener->params()) best_values.push_back(p->value.v);
      };
      for (int i = 1; i <= cfg_.es_max_inner; ++i) {
        auto xb = sample_batch(split_.train, cfg_.batch, inner);
        listener_update(*result_.listener, *listener_adam_, *result_.speaker, xb, inner,
                        cfg_.reg_listener.dropout,
                        cfg_.reg_listener.dropout > 0 ? &listener_noise_ : nullptr);
        used = i;
        if (i % cfg_.es_eval_every == 0) {
          const double cur = val_nll(val_msgs);
          if (cur < best - cfg_.es_min_delta) {
            best = cur;
            bad = 0;
            snapshot();
          } else if (++bad >= cfg_.es_patience) {
            break;
          }
        }
      }
      if (best_values.empty()) snapshot();
      auto params = result_.listener->params();
      for (std::size_t i = 0; i < params.size(); ++i) params[i]->value.v = best_values[i];
    }
    result_.inner_updates.push_back(used);
  }

  double val_nll(const std::vector<Message>& val_msgs) {
    Graph g;
    ListenerOutput out = result_.listener->forward(g, val_msgs, split_.val);
    double total = 0.0;
    for (double lp : g.val(out.loglik).v) total -= lp;
    return total / static_cast<double>(split_.val.size());
  }

  void refresh_reward_probe() {
    NeuralSpeakerSource src = speaker_source();
    ProbeTrainResult probe =
        train_probe(src, &split_.train, ProbeDistribution::kTrain, cfg_.probe, cfg_.hidden,
                    cfg_.reg_listener.layer_norm, cfg_.seed, probe_seq_++);
    reward_probe_ = std::move(probe.listener);
  }

  std::vector<double> listener_logliks(const std::vector<Message>& msgs,
                                       std::span<const std::int64_t> objects,
                                       ListenerPolicy& listener) {
    Graph g;
    ListenerOutput out = listener.forward(g, msgs, objects);
    return g.val(out.loglik).v;
  }

  // One joint interaction: speaker rollout, listener loss, REINFORCE
  // surrogate. Both Adam steps are taken for the continuous regime; partial
  // and early-stopping regimes step only the speaker.
  void joint_update(bool update_listener) {
    auto xb = sample_batch(split_.train, cfg_.batch, sampling_rng_);
    Graph g;
    SpeakerRollout roll =
        result_.speaker->sample(g, xb, sampling_rng_, cfg_.reg_speaker.dropout,
                                cfg_.reg_speaker.dropout > 0 ? &speaker_noise_ : nullptr);

    const double batch = static_cast<double>(xb.size());
    Graph::Id listener_loss = -1;
    std::vector<double> rewards;
    std::vector<std::int32_t> target_pos;  // discrimination bookkeeping

    if (cfg_.game == GameKind::kReconstruction) {
      const bool dropout_on = update_listener && cfg_.reg_listener.dropout > 0;
      ListenerOutput out =
          result_.listener->forward(g, roll.messages, xb, dropout_on ? cfg_.reg_listener.dropout : 0.0,
                                    dropout_on ? &listener_noise_ : nullptr);
      listener_loss = g.scale(g.mean(out.loglik), -1.0);
      const std::vector<double>& loglik = g.val(out.loglik).v;
      if (cfg_.alpha < 0.5) {
        Graph pg;
        ListenerOutput pout = reward_probe_->forward(pg, roll.messages, xb);
        const std::vector<double>& probe_loglik = pg.val(pout.loglik).v;
        rewards.resize(loglik.size());
        for (std::size_t i = 0; i < loglik.size(); ++i)
          rewards[i] = alpha_balanced_reward(probe_loglik[i], loglik[i], cfg_.alpha);
      } else {
        rewards = loglik;  // classic setting
      }
    } else {
      // Candidate sets: target at a uniform position among distractors drawn
      // without replacement from the train split excluding the target.
      const int nc = cfg_.candidates;
      std::vector<std::int64_t> cands(xb.size() * static_cast<std::size_t>(nc));
      target_pos.resize(xb.size());
      for (std::size_t i = 0; i < xb.size(); ++i) {
        std::int64_t* row = &cands[i * static_cast<std::size_t>(nc)];
        int filled = 0;
        while (filled < nc - 1) {
          const std::int64_t cand =
              split_.train[static_cast<std::size_t>(sampling_rng_.uniform_int(split_.train.size()))];
          if (cand == xb[i]) continue;
          bool dup = false;
          for (int j = 0; j < filled; ++j)
            if (row[j] == cand) dup = true;
          if (!dup) row[filled++] = cand;
        }
        const auto pos = static_cast<int>(sampling_rng_.uniform_int(static_cast<std::uint64_t>(nc)));
        for (int j = nc - 1; j > pos; --j) row[j] = row[j - 1];
        row[pos] = xb[i];
        target_pos[i] = static_cast<std::int32_t>(pos);
      }
      DiscriminationOutput out =
          result_.disc->forward(g, roll.messages, cands, target_pos, nc);
      listener_loss = g.scale(g.mean(out.target_loglik), -1.0);
      rewards = g.val(out.target_loglik).v;
    }

    double baseline = 0.0;
    for (double r : rewards) {
      if (!std::isfinite(r)) throw NumericError("non-finite reward", -1);
      baseline += r;
    }
    baseline /= batch;
    std::vector<double> w(rewards.size());
    for (std::size_t i = 0; i < rewards.size(); ++i) w[i] = -(rewards[i] - baseline) / batch;
    Graph::Id surrogate =
        g.add(g.weighted_sum(roll.logp_total, std::move(w)),
              g.weighted_sum(roll.entropy_total,
                             std::vector<double>(rewards.size(), -cfg_.entropy_coef / batch)));

    Graph::Id total = update_listener ? g.add(surrogate, listener_loss) : surrogate;
    if (!std::isfinite(g.val(total).v[0])) throw NumericError("non-finite loss", total);
    g.backward(total);
    if (!update_listener) {
      // Rewards are detached values, but the listener forward pass still ran
      // inside this graph; drop any accumulated listener gradient.
      if (result_.listener)
        for (Param* p : result_.listener->params()) p->zero_grad();
      if (result_.disc)
        for (Param* p : result_.disc->params()) p->zero_grad();
    }
    speaker_adam_->step();
    if (update_listener) listener_adam_->step();
  }

  // ---- evaluation & probing ----

  double split_nll_acc(std::span<const std::int64_t> objects, Rng& rng, double* acc_out,
                       double* entropy_out = nullptr) {
    double nll = 0.0, acc_w = 0.0, ent = 0.0;
    std::size_t counted = 0;
    const std::size_t chunk = 512;
    for (std::size_t at = 0; at < objects.size(); at += chunk) {
      const std::size_t n = std::min(chunk, objects.size() - at);
      std::span<const std::int64_t> part(objects.data() + at, n);
      Graph g;
      SpeakerRollout roll = result_.speaker->sample(g, part, rng);
      if (entropy_out)
        for (double h : g.val(roll.entropy_total).v) ent += h;
      if (cfg_.game == GameKind::kReconstruction) {
        ListenerOutput out = result_.listener->forward(g, roll.messages, part);
        for (double lp : g.val(out.loglik).v) nll -= lp;
        acc_w += reconstruction_accuracy(g, out, cfg_.space, part) * static_cast<double>(n);
      } else {
        // Discrimination eval: fresh candidate sets from the same split.
        const int nc = cfg_.candidates;
        std::vector<std::int64_t> cands(n * static_cast<std::size_t>(nc));
        std::vector<std::int32_t> pos(n);
        for (std::size_t i = 0; i < n; ++i) {
          std::int64_t* row = &cands[i * static_cast<std::size_t>(nc)];
          int filled = 0;
          while (filled < nc - 1) {
            const std::int64_t cand =
                objects[static_cast<std::size_t>(rng.uniform_int(objects.size()))];
            if (cand == part[i]) continue;
            bool dup = false;
            for (int j = 0; j < filled; ++j)
              if (row[j] == cand) dup = true;
            if (!dup) row[filled++] = cand;
          }
          const auto p = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(nc)));
          for (int j = nc - 1; j > p; --j) row[j] = row[j - 1];
          row[p] = part[i];
          pos[i] = static_cast<std::int32_t>(p);
        }
        DiscriminationOutput out = result_.disc->forward(g, roll.messages, cands, pos, nc);
        for (double lp : g.val(out.target_loglik).v) nll -= lp;
        acc_w += discrimination_accuracy(g, out, pos) * static_cast<double>(n);
      }
      counted += n;
    }
    *acc_out = acc_w / static_cast<double>(counted);
    if (entropy_out) *entropy_out = ent / static_cast<double>(counted);
    return nll / static_cast<double>(counted);
  }

  void evaluate(bool with_probe) {
    MetricsRow row;
    row.update = update_;
    Rng eval_rng = Rng::stream(cfg_.seed, "eval", static_cast<std::uint64_t>(update_));
    double acc = 0.0, ent = 0.0;
    row.split_loss_train = split_nll_acc(split_.train, eval_rng, &acc, &ent);
    row.acc_train = acc;
    row.speaker_entropy = ent;
    row.split_loss_test = split_nll_acc(split_.test, eval_rng, &acc);
    row.acc_test = acc;

    double val_acc = 0.0;
    if (!split_.val.empty()) split_nll_acc(split_.val, eval_rng, &val_acc);
    if (val_acc > result_.best_val_acc) {
      result_.best_val_acc = val_acc;
      result_.best_update = update_;
      result_.best_speaker_values.clear();
      for (Param* p : result_.speaker->params())
        result_.best_speaker_values.push_back(p->value.v);
      result_.best_listener_values.clear();
      auto lp = result_.listener ? result_.listener->params() : result_.disc->params();
      for (Param* p : lp) result_.best_listener_values.push_back(p->value.v);
    }

    if (with_probe) {
      NeuralSpeakerSource src = speaker_source();
      if (cfg_.game == GameKind::kReconstruction) {
        ProbeTrainResult train_p =
            train_probe(src, &split_.train, ProbeDistribution::kTrain, cfg_.probe, cfg_.hidden,
                        cfg_.reg_listener.layer_norm, cfg_.seed, probe_seq_++);
        ProbeTrainResult full_p =
            train_probe(src, nullptr, ProbeDistribution::kFull, cfg_.probe, cfg_.hidden,
                        cfg_.reg_listener.layer_norm, cfg_.seed, probe_seq_++);
        ProbeReport rep = estimate_decomposition(src, *result_.listener, *train_p.listener,
                                                 *full_p.listener, split_, cfg_.probe,
                                                 cfg_.seed, probe_seq_++);
        row.info_train = rep.info_train;
        row.adapt_train = rep.adapt_train;
        row.info_test = rep.info_test;
        row.adapt_test = rep.adapt_test;
        if (cfg_.alpha < 0.5) reward_probe_ = std::move(train_p.listener);
      }
      Rng topo_rng = Rng::stream(cfg_.seed, "toposim", static_cast<std::uint64_t>(update_));
      TopoSimEstimate topo =
          topographic_similarity(src, topo_rng, cfg_.toposim_repeats, cfg_.toposim_batch);
      if (topo.defined) row.toposim = topo.mean;
    }
    result_.log.push_back(std::move(row));
  }

  void loop() {
    if (cfg_.alpha < 0.5) refresh_reward_probe();
    for (update_ = 1; update_ <= cfg_.max_speaker_updates; ++update_) {
      if (cfg_.regime != RegimeKind::kContinuous) inner_train_listener();
      joint_update(/*update_listener=*/cfg_.regime == RegimeKind::kContinuous);
      const bool probe_tick =
          update_ % cfg_.probe.cadence == 0 || update_ == cfg_.max_speaker_updates;
      if (update_ % cfg_.eval_every == 0 || update_ == cfg_.max_speaker_updates || probe_tick)
        evaluate(probe_tick);
    }
  }

  RunConfig cfg_;
  DatasetSplit split_;
  TrainResult result_;
  std::unique_ptr<Adam> speaker_adam_, listener_adam_;
  std::unique_ptr<ListenerPolicy> reward_probe_;
  Rng sampling_rng_, speaker_noise_, listener_noise_;
  int update_ = 0;
  std::uint64_t probe_seq_ = 0;
};

}  // namespace

TrainResult run_training(const RunConfig& cfg, const DatasetSplit& split) {
  cfg.validate();
  Trainer trainer(cfg, split);
  return trainer.run();
}

}  // namespace lewisim
