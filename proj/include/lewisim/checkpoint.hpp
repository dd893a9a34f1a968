#pragma once

#include <memory>
#include <string>

#include "lewisim/agents.hpp"

namespace lewisim {

struct Checkpoint {
  std::uint64_t config_hash = 0;
  ObjectSpaceSpec space;
  Channel channel;
  int hidden = 0;
  bool speaker_layer_norm = true;
  bool listener_layer_norm = true;
  bool discrimination = false;
  int embed_dim = 0;  // discrimination listener only

  std::unique_ptr<SpeakerPolicy> speaker;
  std::unique_ptr<ListenerPolicy> listener;
  std::unique_ptr<DiscriminationListener> disc;
};

// Text format: header lines, then one `tensor <name> <rank> <dims...>` block
// per parameter with hexfloat values. Exact round trip.
void save_checkpoint(const std::string& path, std::uint64_t config_hash,
                     SpeakerPolicy& speaker, ListenerPolicy* listener,
                     DiscriminationListener* disc);

Checkpoint load_checkpoint(const std::string& path);

}  // namespace lewisim
