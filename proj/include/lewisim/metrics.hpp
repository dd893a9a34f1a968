#pragma once

#include <optional>
#include <span>

#include "lewisim/probe.hpp"
#include "lewisim/speaker_source.hpp"

namespace lewisim {

// Levenshtein distance between the pre-EoS contents of two messages.
int edit_distance(const Message& a, const Message& b, int eos);

// Number of attribute slots where the two objects differ.
int input_distance(const ObjectSpaceSpec& spec, const Object& a, const Object& b);

// Spearman rank correlation with tie-averaged ranks. Empty when either
// ranked sequence has zero variance.
std::optional<double> spearman(std::span<const double> u, std::span<const double> v);

struct TopoSimEstimate {
  double mean = 0.0;
  double stddev = 0.0;
  int repeats = 0;
  int batch = 0;
  bool defined = false;  // false when the language degenerates (zero variance)
};

// Bootstrapped topographic similarity: per repeat, draw `batch` objects
// uniformly without replacement from the full space, sample one message each,
// and correlate all-pairs input distances with edit distances.
TopoSimEstimate topographic_similarity(const SpeakerSource& speaker, Rng& rng,
                                       int repeats = 100, int batch = 1000);

// Mean per-attribute argmax accuracy on the test split of a fresh probe
// listener trained on the train split with validation early stopping.
double generalization_score(const SpeakerSource& speaker, const DatasetSplit& split,
                            const ProbeConfig& cfg, int hidden, bool layer_norm,
                            std::uint64_t master_seed, std::uint64_t probe_index = 0);

// Accuracy of an already trained reconstruction listener on a set of objects
// (fresh messages from the speaker).
double listener_accuracy(const SpeakerSource& speaker, ListenerPolicy& listener,
                         std::span<const std::int64_t> objects, Rng& rng);

}  // namespace lewisim
