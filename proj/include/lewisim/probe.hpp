#pragma once

#include <iosfwd>
#include <memory>
#include <string>

#include "lewisim/speaker_source.hpp"

namespace lewisim {

struct ProbeConfig {
  int cadence = 200;       // speaker updates between probe reports
  int samples = 10000;     // Monte-Carlo (x, m) pairs per estimate
  int batch = 256;         // probe training batch size
  int eval_every = 20;     // probe updates between early-stopping evaluations
  int patience = 10;       // evaluations without improvement before stopping
  double min_delta = 1e-4; // nats
  int max_updates = 4000;
  int eval_samples = 2048; // held-out evaluation pairs
  double lr = 5e-4;
};

enum class ProbeDistribution { kTrain, kFull };

struct ProbeTrainResult {
  std::unique_ptr<ListenerPolicy> listener;
  std::vector<double> curve;  // evaluation losses, in order
  std::string stopping_reason;
  int updates = 0;
  double best_eval_loss = 0.0;
};

// Trains a fresh listener against the frozen speaker on (x, m) pairs with x
// from the requested distribution, until early stopping. The test-side
// estimate uses a probe trained on the full distribution, never on p_test.
// `early_stop_objects`, when given, replaces the held-out slice by a fixed
// evaluation set drawn from those objects (used for validation-split
// stopping).
ProbeTrainResult train_probe(const SpeakerSource& speaker,
                             const std::vector<std::int64_t>* train_objects,
                             ProbeDistribution dist, const ProbeConfig& cfg,
                             int hidden, bool layer_norm,
                             std::uint64_t master_seed, std::uint64_t probe_index,
                             const std::vector<std::int64_t>* early_stop_objects = nullptr);

struct ProbeReport {
  double info_train = 0.0;
  double adapt_train = 0.0;
  double total_train = 0.0;
  double info_test = 0.0;
  double adapt_test = 0.0;
  double total_test = 0.0;
  std::vector<double> train_probe_curve, full_probe_curve;
  std::string train_stop, full_stop;
  int train_probe_updates = 0, full_probe_updates = 0;
};

// Monte-Carlo loss estimates on matched samples, so info + adapt equals the
// measured total exactly on each split.
ProbeReport estimate_decomposition(const SpeakerSource& speaker,
                                   ListenerPolicy& trained_listener,
                                   ListenerPolicy& train_probe,
                                   ListenerPolicy& full_probe,
                                   const DatasetSplit& split,
                                   const ProbeConfig& cfg,
                                   std::uint64_t master_seed,
                                   std::uint64_t probe_index);

// Mean -log rho(x|m) of a listener over sampled pairs from `objects`.
double expected_nll(const SpeakerSource& speaker, ListenerPolicy& listener,
                    std::span<const std::int64_t> objects, int samples, Rng& rng);

void save_probe_report(const ProbeReport& report, std::ostream& os);

}  // namespace lewisim
