#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "lewisim/env.hpp"
#include "lewisim/optim.hpp"
#include "lewisim/tensor.hpp"

namespace lewisim {

// Message channel: symbols in [0, vocab), the last id reserved as EoS,
// sequences bounded by max_len and truncated there if EoS never fires.
struct Channel {
  int vocab = 10;
  int max_len = 10;
  int eos() const { return vocab - 1; }
  bool operator==(const Channel&) const = default;
};

struct Message {
  std::vector<std::int32_t> symbols;
};

// Length of the prefix strictly before the first EoS. Symbols after EoS are
// ignored by every metric and display.
int content_length(const Message& m, int eos);
std::span<const std::int32_t> content(const Message& m, int eos);

// LSTM cell, optionally with layer normalization applied separately to the
// input-to-hidden and hidden-to-hidden pre-activation sums.
struct LstmCell {
  int in_dim = 0;
  int hidden = 0;
  bool use_layer_norm = true;
  Param wx, wh, bias, gain_x, gain_h;

  LstmCell() = default;
  LstmCell(std::string prefix, int in_dim, int hidden, bool layer_norm, Rng& rng);
  // Consumes (h, c) node ids and replaces them with the next state.
  void step(Graph& g, Graph::Id x, Graph::Id& h, Graph::Id& c);
  std::vector<Param*> params();
};

struct SpeakerRollout {
  std::vector<Message> messages;
  Graph::Id logp_total = -1;     // [B], covers exactly the emitted symbols
  Graph::Id entropy_total = -1;  // [B], per-step entropies in nats, same mask
  std::vector<std::vector<double>> step_logp;      // per sample, per emitted step
  std::vector<std::vector<double>> step_entropy;   // same layout
};

// Recurrent speaker: object one-hot -> linear -> initial hidden state;
// autoregressive token feedback through a symbol embedding, starting from a
// learned constant start embedding; per-step softmax over the vocabulary.
class SpeakerPolicy {
 public:
  SpeakerPolicy(ObjectSpaceSpec spec, Channel ch, int hidden, bool layer_norm,
                Rng& init_rng);

  SpeakerRollout sample(Graph& g, std::span<const std::int64_t> objects,
                        Rng& sample_rng, double dropout = 0.0,
                        Rng* dropout_rng = nullptr);

  struct Score {
    Graph::Id logp_total = -1;     // [B]
    Graph::Id entropy_total = -1;  // [B]
  };
  // Teacher-forced pass over given messages: per-sample total log-prob and
  // per-step entropy sum. Matches the sampling pass on its own samples.
  Score score(Graph& g, std::span<const std::int64_t> objects,
              const std::vector<Message>& msgs);

  // Teacher-forced log pi(m|x), summed over the message's symbols.
  Graph::Id log_prob(Graph& g, std::span<const std::int64_t> objects,
                     const std::vector<Message>& msgs);

  // Exact next-symbol distribution given an emitted prefix; enumeration aid.
  std::vector<double> step_probs(std::int64_t object,
                                 std::span<const std::int32_t> prefix);

  std::vector<Param*> params();
  const ObjectSpaceSpec& space() const { return spec_; }
  Channel channel() const { return channel_; }
  int hidden() const { return hidden_; }
  bool layer_norm() const { return cell_.use_layer_norm; }

 private:
  Graph::Id initial_state(Graph& g, std::span<const std::int64_t> objects);

  ObjectSpaceSpec spec_;
  Channel channel_;
  int hidden_;
  Param w_in_, b_in_;
  Param sym_emb_, start_emb_;
  LstmCell cell_;
  Param w_out_, b_out_;
};

struct ListenerOutput {
  Graph::Id loglik = -1;               // [B] log rho(x|m) = sum_k head log-prob
  std::vector<Graph::Id> head_logp;    // K nodes of shape [B, |X_k|]
};

// Reconstruction listener: symbol embedding -> LSTM -> K independent heads.
class ListenerPolicy {
 public:
  ListenerPolicy(ObjectSpaceSpec spec, Channel ch, int hidden, bool layer_norm,
                 Rng& init_rng);

  // Consumes the full emitted sequence including the EoS token.
  Graph::Id encode(Graph& g, const std::vector<Message>& msgs,
                   double dropout = 0.0, Rng* dropout_rng = nullptr);

  ListenerOutput forward(Graph& g, const std::vector<Message>& msgs,
                         std::span<const std::int64_t> targets,
                         double dropout = 0.0, Rng* dropout_rng = nullptr);

  std::vector<Param*> params();
  const ObjectSpaceSpec& space() const { return spec_; }
  Channel channel() const { return channel_; }
  int hidden() const { return hidden_; }
  bool layer_norm() const { return cell_.use_layer_norm; }

 private:
  ObjectSpaceSpec spec_;
  Channel channel_;
  int hidden_;
  Param sym_emb_;
  LstmCell cell_;
  std::vector<Param> head_w_, head_b_;
};

// Mean per-attribute argmax accuracy of a forward pass against the targets.
double reconstruction_accuracy(const Graph& g, const ListenerOutput& out,
                               const ObjectSpaceSpec& spec,
                               std::span<const std::int64_t> targets);

struct DiscriminationOutput {
  Graph::Id logp = -1;           // [B, C] candidate log-probabilities
  Graph::Id target_loglik = -1;  // [B]
};

// Candidate scorer: message encoder and candidate encoder compared by dot
// product, softmax over the candidate set.
class DiscriminationListener {
 public:
  DiscriminationListener(ObjectSpaceSpec spec, Channel ch, int hidden,
                         int embed_dim, bool layer_norm, Rng& init_rng);

  // candidates is row-major [B x num_candidates]; target_pos[i] indexes the
  // true object inside row i. The target must appear exactly once per row.
  DiscriminationOutput forward(Graph& g, const std::vector<Message>& msgs,
                               std::span<const std::int64_t> candidates,
                               std::span<const std::int32_t> target_pos,
                               int num_candidates);

  std::vector<Param*> params();
  const ObjectSpaceSpec& space() const { return spec_; }
  Channel channel() const { return channel_; }
  int hidden() const { return hidden_; }
  int embed_dim() const { return embed_dim_; }
  bool layer_norm() const { return cell_.use_layer_norm; }

 private:
  ObjectSpaceSpec spec_;
  Channel channel_;
  int hidden_;
  int embed_dim_;
  Param sym_emb_;
  LstmCell cell_;
  Param msg_proj_w_, msg_proj_b_;
  Param cand_w_, cand_b_;
};

double discrimination_accuracy(const Graph& g, const DiscriminationOutput& out,
                               std::span<const std::int32_t> target_pos);

// One-hot batch encoding as a graph input.
Tensor one_hot_batch(const ObjectSpaceSpec& spec, std::span<const std::int64_t> objects);

}  // namespace lewisim
