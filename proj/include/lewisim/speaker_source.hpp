#pragma once

#include <span>
#include <vector>

#include "lewisim/agents.hpp"

namespace lewisim {

// A frozen message source: everything probes and language metrics need to
// know about a speaker. Implementations must not mutate any learnable state.
struct SpeakerSource {
  virtual ~SpeakerSource() = default;
  virtual const ObjectSpaceSpec& space() const = 0;
  virtual Channel channel() const = 0;
  virtual void sample_messages(std::span<const std::int64_t> objects, Rng& rng,
                               std::vector<Message>& out) const = 0;
  // Fingerprint of learnable state; 0 for stateless sources.
  virtual std::uint64_t fingerprint() const { return 0; }
};

class NeuralSpeakerSource final : public SpeakerSource {
 public:
  explicit NeuralSpeakerSource(SpeakerPolicy& policy) : policy_(&policy) {}
  const ObjectSpaceSpec& space() const override { return policy_->space(); }
  Channel channel() const override { return policy_->channel(); }
  void sample_messages(std::span<const std::int64_t> objects, Rng& rng,
                       std::vector<Message>& out) const override {
    Graph g;
    out = policy_->sample(g, objects, rng).messages;
  }
  std::uint64_t fingerprint() const override {
    return params_fingerprint(policy_->params());
  }

 private:
  SpeakerPolicy* policy_;
};

}  // namespace lewisim
