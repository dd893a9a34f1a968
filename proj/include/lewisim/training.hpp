#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lewisim/metrics.hpp"
#include "lewisim/probe.hpp"

namespace lewisim {

enum class GameKind { kReconstruction, kDiscrimination };
enum class RegimeKind { kContinuous, kPartial, kEarlyStopping };

struct RegularizerConfig {
  double dropout = 0.0;
  double weight_decay = 0.0;
  bool layer_norm = true;
};

struct RunConfig {
  ObjectSpaceSpec space = ObjectSpaceSpec::uniform(6, 10);
  std::int64_t n_train = 4000, n_val = 1000, n_test = 1000;
  Channel channel{10, 10};
  int hidden = 128;
  double lr = 5e-4;
  double beta1 = 0.9, beta2 = 0.999;
  int batch = 1024;
  double entropy_coef = 0.01;
  // alpha = 0.5 is the classic setting (reward = log rho_phi); below 0.5 the
  // probe-balanced reward is used.
  double alpha = 0.5;

  GameKind game = GameKind::kReconstruction;
  int candidates = 16;  // discrimination game only

  RegimeKind regime = RegimeKind::kContinuous;
  int n_step = 50;                       // partial listener
  int es_patience = 5;                   // early-stopping listener
  int es_eval_every = 10;
  double es_min_delta = 1e-4;
  int es_max_inner = 1500;

  RegularizerConfig reg_speaker, reg_listener;

  std::uint64_t seed = 1;
  int max_speaker_updates = 3000;
  int eval_every = 25;

  ProbeConfig probe;
  int toposim_repeats = 100, toposim_batch = 1000;

  void validate() const;  // throws ConfigError naming the offending field
};

struct MetricsRow {
  int update = 0;
  double split_loss_train = 0.0, split_loss_test = 0.0;
  double acc_train = 0.0, acc_test = 0.0;
  std::optional<double> info_train, info_test, adapt_train, adapt_test;
  double speaker_entropy = 0.0;
  std::optional<double> toposim;
};

std::string metrics_csv_header();
std::string metrics_csv_row(const MetricsRow& row);

struct TrainResult {
  std::vector<MetricsRow> log;
  std::vector<int> inner_updates;        // per speaker update (partial / ES)
  bool failed = false;
  int failed_update = -1;
  std::string failure;

  std::unique_ptr<SpeakerPolicy> speaker;       // final parameters
  std::unique_ptr<ListenerPolicy> listener;     // reconstruction game
  std::unique_ptr<DiscriminationListener> disc; // discrimination game
  int listener_reinits = 0;

  double best_val_acc = -1.0;
  int best_update = -1;
  std::vector<std::vector<double>> best_speaker_values, best_listener_values;

  // Overwrites the live agents with the best-validation snapshot.
  void restore_best();
};

// Reward for the balanced speaker objective:
//   r = (1 - 2a) * log rho_probe(x|m) + a * log rho_listener(x|m).
// In expectation the speaker loss becomes (1-a)*info + a*adapt. Requires
// alpha in [0, 0.5].
double alpha_balanced_reward(double probe_loglik, double listener_loglik, double alpha);

// One supervised step on -E[log rho(x|m)] with messages sampled from the
// frozen speaker. Returns the batch loss.
double listener_update(ListenerPolicy& listener, Adam& adam, SpeakerPolicy& speaker,
                       std::span<const std::int64_t> objects, Rng& msg_rng,
                       double dropout = 0.0, Rng* noise = nullptr);

// One REINFORCE step with the minibatch-mean baseline and entropy bonus.
// `rewards` receives the sampled messages and per-sample listener log-liks
// are not computed here; the caller provides final rewards.
double speaker_update(SpeakerPolicy& speaker, Adam& adam,
                      std::span<const std::int64_t> objects,
                      const std::function<std::vector<double>(const std::vector<Message>&)>& rewards,
                      double entropy_coef, Rng& sample_rng,
                      double dropout = 0.0, Rng* noise = nullptr);

// Full training run for the configured regime. Never throws on numeric
// failure; inspect TrainResult::failed.
TrainResult run_training(const RunConfig& cfg, const DatasetSplit& split);

DatasetSplit make_split(const RunConfig& cfg);

}  // namespace lewisim
