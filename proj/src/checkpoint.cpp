#include "lewisim/checkpoint.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace lewisim {

namespace {

void write_params(std::ostream& os, const std::vector<Param*>& params) {
  char buf[40];
  for (const Param* p : params) {
    os << "tensor " << p->name << " " << p->value.shape.size();
    for (int d : p->value.shape) os << " " << d;
    os << "\n";
    for (std::size_t i = 0; i < p->value.v.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%a", p->value.v[i]);
      os << buf << ((i + 1) % 8 == 0 || i + 1 == p->value.v.size() ? "\n" : " ");
    }
  }
}

void read_params(std::istream& is, const std::vector<Param*>& params) {
  for (Param* p : params) {
    std::string tok, name;
    std::size_t rank = 0;
    if (!(is >> tok >> name >> rank) || tok != "tensor")
      throw ConfigError("checkpoint: expected tensor block");
    if (name != p->name)
      throw ConfigError("checkpoint: tensor name mismatch: got " + name + ", want " + p->name);
    std::vector<int> shape(rank);
    for (auto& d : shape)
      if (!(is >> d)) throw ConfigError("checkpoint: truncated shape");
    if (shape != p->value.shape) throw ConfigError("checkpoint: shape mismatch for " + name);
    for (double& x : p->value.v) {
      std::string hex;
      if (!(is >> hex)) throw ConfigError("checkpoint: truncated values for " + name);
      x = std::strtod(hex.c_str(), nullptr);
    }
  }
}

}  // namespace

void save_checkpoint(const std::string& path, std::uint64_t config_hash,
                     SpeakerPolicy& speaker, ListenerPolicy* listener,
                     DiscriminationListener* disc) {
  std::ostringstream os;
  os << "lewisim-checkpoint v1\n";
  char hex[32];
  std::snprintf(hex, sizeof(hex), "%016" PRIx64, config_hash);
  os << "config_hash " << hex << "\n";
  const ObjectSpaceSpec& space = speaker.space();
  os << "space " << space.num_attributes;
  for (int c : space.cardinalities) os << " " << c;
  os << "\n";
  os << "channel " << speaker.channel().vocab << " " << speaker.channel().max_len << "\n";
  os << "hidden " << speaker.hidden() << "\n";
  os << "speaker_layer_norm " << (speaker.layer_norm() ? 1 : 0) << "\n";
  if (listener) {
    os << "listener reconstruction " << (listener->layer_norm() ? 1 : 0) << "\n";
  } else if (disc) {
    os << "listener discrimination " << (disc->layer_norm() ? 1 : 0) << " "
       << disc->embed_dim() << "\n";
  } else {
    os << "listener none 0\n";
  }
  write_params(os, speaker.params());
  if (listener) write_params(os, listener->params());
  if (disc) write_params(os, disc->params());

  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::trunc);
    if (!f) throw ConfigError("checkpoint: cannot open for writing: " + path);
    f << os.str();
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw ConfigError("checkpoint: cannot move into place: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("checkpoint: cannot open: " + path);
  std::string line;
  if (!std::getline(is, line) || line != "lewisim-checkpoint v1")
    throw ConfigError("checkpoint: bad magic line");
  Checkpoint ck;
  std::string tok;
  if (!(is >> tok) || tok != "config_hash") throw ConfigError("checkpoint: missing config hash");
  std::string hex;
  is >> hex;
  ck.config_hash = std::strtoull(hex.c_str(), nullptr, 16);
  int k = 0;
  if (!(is >> tok >> k) || tok != "space") throw ConfigError("checkpoint: missing space");
  std::vector<int> cards(static_cast<std::size_t>(k));
  for (auto& c : cards)
    if (!(is >> c)) throw ConfigError("checkpoint: truncated space");
  ck.space = ObjectSpaceSpec(k, cards);
  if (!(is >> tok >> ck.channel.vocab >> ck.channel.max_len) || tok != "channel")
    throw ConfigError("checkpoint: missing channel");
  if (!(is >> tok >> ck.hidden) || tok != "hidden")
    throw ConfigError("checkpoint: missing hidden size");
  int sln = 1;
  if (!(is >> tok >> sln) || tok != "speaker_layer_norm")
    throw ConfigError("checkpoint: missing speaker layer norm flag");
  ck.speaker_layer_norm = sln != 0;
  std::string listener_kind;
  int lln = 1;
  if (!(is >> tok >> listener_kind >> lln) || tok != "listener")
    throw ConfigError("checkpoint: missing listener header");
  ck.listener_layer_norm = lln != 0;
  if (listener_kind == "discrimination") {
    ck.discrimination = true;
    if (!(is >> ck.embed_dim)) throw ConfigError("checkpoint: missing embed dim");
  }

  Rng dummy(0);
  ck.speaker = std::make_unique<SpeakerPolicy>(ck.space, ck.channel, ck.hidden,
                                               ck.speaker_layer_norm, dummy);
  read_params(is, ck.speaker->params());
  if (listener_kind == "reconstruction") {
    ck.listener = std::make_unique<ListenerPolicy>(ck.space, ck.channel, ck.hidden,
                                                   ck.listener_layer_norm, dummy);
    read_params(is, ck.listener->params());
  } else if (listener_kind == "discrimination") {
    ck.disc = std::make_unique<DiscriminationListener>(
        ck.space, ck.channel, ck.hidden, ck.embed_dim, ck.listener_layer_norm, dummy);
    read_params(is, ck.disc->params());
  }
  return ck;
}

}  // namespace lewisim
