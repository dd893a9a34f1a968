#include "lewisim/agents.hpp"

#include <algorithm>
#include <cmath>

namespace lewisim {

int content_length(const Message& m, int eos) {
  for (std::size_t i = 0; i < m.symbols.size(); ++i)
    if (m.symbols[i] == eos) return static_cast<int>(i);
  return static_cast<int>(m.symbols.size());
}

std::span<const std::int32_t> content(const Message& m, int eos) {
  return {m.symbols.data(), static_cast<std::size_t>(content_length(m, eos))};
}

Tensor one_hot_batch(const ObjectSpaceSpec& spec, std::span<const std::int64_t> objects) {
  Tensor x(static_cast<int>(objects.size()), spec.one_hot_dim());
  for (std::size_t i = 0; i < objects.size(); ++i)
    encode_object_into(spec, objects[i], &x.v[i * static_cast<std::size_t>(spec.one_hot_dim())]);
  return x;
}

LstmCell::LstmCell(std::string prefix, int in, int h, bool layer_norm, Rng& rng)
    : in_dim(in),
      hidden(h),
      use_layer_norm(layer_norm),
      wx(prefix + ".wx", Tensor(in, 4 * h)),
      wh(prefix + ".wh", Tensor(h, 4 * h)),
      bias(prefix + ".b", Tensor::row(std::vector<double>(static_cast<std::size_t>(4 * h), 0.0))),
      gain_x(prefix + ".gx", Tensor::row(std::vector<double>(static_cast<std::size_t>(4 * h), 1.0))),
      gain_h(prefix + ".gh", Tensor::row(std::vector<double>(static_cast<std::size_t>(4 * h), 1.0))) {
  init_uniform_fan_in(wx, in, rng);
  init_uniform_fan_in(wh, h, rng);
}

void LstmCell::step(Graph& g, Graph::Id x, Graph::Id& h, Graph::Id& c) {
  if (g.val(x).cols() != in_dim || g.val(h).cols() != hidden || g.val(c).cols() != hidden)
    throw ContractError("lstm step: dimension mismatch");
  Graph::Id from_x = g.matmul(x, g.param(wx));
  Graph::Id from_h = g.matmul(h, g.param(wh));
  if (use_layer_norm) {
    from_x = g.layer_norm(from_x, g.param(gain_x));
    from_h = g.layer_norm(from_h, g.param(gain_h));
  }
  Graph::Id pre = g.add(g.add(from_x, from_h), g.param(bias));
  Graph::Id gi = g.sigmoid(g.slice_cols(pre, 0, hidden));
  Graph::Id gf = g.sigmoid(g.slice_cols(pre, hidden, 2 * hidden));
  Graph::Id gg = g.tanh_(g.slice_cols(pre, 2 * hidden, 3 * hidden));
  Graph::Id go = g.sigmoid(g.slice_cols(pre, 3 * hidden, 4 * hidden));
  c = g.add(g.mul(gf, c), g.mul(gi, gg));
  h = g.mul(go, g.tanh_(c));
}

std::vector<Param*> LstmCell::params() {
  std::vector<Param*> ps{&wx, &wh, &bias};
  if (use_layer_norm) {
    ps.push_back(&gain_x);
    ps.push_back(&gain_h);
  }
  return ps;
}

SpeakerPolicy::SpeakerPolicy(ObjectSpaceSpec spec, Channel ch, int hidden,
                             bool layer_norm, Rng& rng)
    : spec_(std::move(spec)),
      channel_(ch),
      hidden_(hidden),
      w_in_("speaker.w_in", Tensor(spec_.one_hot_dim(), hidden)),
      b_in_("speaker.b_in", Tensor::row(std::vector<double>(static_cast<std::size_t>(hidden), 0.0))),
      sym_emb_("speaker.sym_emb", Tensor(ch.vocab, hidden)),
      start_emb_("speaker.start_emb", Tensor(1, hidden)),
      cell_("speaker.lstm", hidden, hidden, layer_norm, rng),
      w_out_("speaker.w_out", Tensor(hidden, ch.vocab)),
      b_out_("speaker.b_out", Tensor::row(std::vector<double>(static_cast<std::size_t>(ch.vocab), 0.0))) {
  if (ch.vocab < 2 || ch.max_len < 1) throw ConfigError("channel: need vocab >= 2, max_len >= 1");
  init_uniform_fan_in(w_in_, spec_.one_hot_dim(), rng);
  init_uniform_fan_in(sym_emb_, channel_.vocab, rng);
  init_uniform_fan_in(start_emb_, channel_.vocab, rng);
  init_uniform_fan_in(w_out_, hidden, rng);
}

Graph::Id SpeakerPolicy::initial_state(Graph& g, std::span<const std::int64_t> objects) {
  Graph::Id x = g.input(one_hot_batch(spec_, objects));
  return g.affine(x, g.param(w_in_), g.param(b_in_));
}

SpeakerRollout SpeakerPolicy::sample(Graph& g, std::span<const std::int64_t> objects,
                                     Rng& sample_rng, double dropout, Rng* dropout_rng) {
  const int batch = static_cast<int>(objects.size());
  const int eos = channel_.eos();
  SpeakerRollout out;
  out.messages.resize(static_cast<std::size_t>(batch));
  out.step_logp.resize(static_cast<std::size_t>(batch));
  out.step_entropy.resize(static_cast<std::size_t>(batch));

  Graph::Id h = initial_state(g, objects);
  Graph::Id c = g.input(Tensor(batch, hidden_));
  Graph::Id x = g.rows(g.param(start_emb_),
                       std::vector<std::int32_t>(static_cast<std::size_t>(batch), 0));

  std::vector<char> alive(static_cast<std::size_t>(batch), 1);
  Graph::Id logp_total = -1, ent_total = -1;
  for (int t = 0; t < channel_.max_len; ++t) {
    cell_.step(g, x, h, c);
    Graph::Id ho = h;
    if (dropout > 0.0) {
      if (!dropout_rng) throw ContractError("speaker dropout needs a noise stream");
      ho = g.dropout(h, dropout, *dropout_rng);
    }
    Graph::Id logits = g.affine(ho, g.param(w_out_), g.param(b_out_));
    Graph::Id logp = g.log_softmax(logits);
    Graph::Id ent = g.entropy(logp);

    const Tensor& lp = g.val(logp);
    std::vector<std::int32_t> symbols(static_cast<std::size_t>(batch), static_cast<std::int32_t>(eos));
    std::vector<double> mask(static_cast<std::size_t>(batch), 0.0);
    for (int b = 0; b < batch; ++b) {
      if (!alive[static_cast<std::size_t>(b)]) continue;
      const auto s = static_cast<std::int32_t>(sample_rng.categorical_from_logp(
          &lp.v[static_cast<std::size_t>(b) * channel_.vocab], static_cast<std::size_t>(channel_.vocab)));
      symbols[static_cast<std::size_t>(b)] = s;
      mask[static_cast<std::size_t>(b)] = 1.0;
      out.messages[static_cast<std::size_t>(b)].symbols.push_back(s);
      out.step_logp[static_cast<std::size_t>(b)].push_back(lp.at(b, s));
      out.step_entropy[static_cast<std::size_t>(b)].push_back(g.val(ent).v[static_cast<std::size_t>(b)]);
      if (s == eos) alive[static_cast<std::size_t>(b)] = 0;
    }

    Graph::Id picked = g.mul(g.pick(logp, symbols), g.input(Tensor::row(mask)));
    Graph::Id ent_masked = g.mul(ent, g.input(Tensor::row(mask)));
    logp_total = logp_total < 0 ? picked : g.add(logp_total, picked);
    ent_total = ent_total < 0 ? ent_masked : g.add(ent_total, ent_masked);

    if (std::none_of(alive.begin(), alive.end(), [](char a) { return a != 0; })) break;
    x = g.rows(g.param(sym_emb_), symbols);
  }
  out.logp_total = logp_total;
  out.entropy_total = ent_total;
  return out;
}

SpeakerPolicy::Score SpeakerPolicy::score(Graph& g, std::span<const std::int64_t> objects,
                                          const std::vector<Message>& msgs) {
  const int batch = static_cast<int>(objects.size());
  if (msgs.size() != objects.size()) throw ContractError("score: batch mismatch");
  int max_steps = 0;
  for (const auto& m : msgs) {
    if (static_cast<int>(m.symbols.size()) > channel_.max_len)
      throw ContractError("score: message longer than max length");
    max_steps = std::max(max_steps, static_cast<int>(m.symbols.size()));
  }

  Graph::Id h = initial_state(g, objects);
  Graph::Id c = g.input(Tensor(batch, hidden_));
  Graph::Id x = g.rows(g.param(start_emb_),
                       std::vector<std::int32_t>(static_cast<std::size_t>(batch), 0));
  Score out;
  for (int t = 0; t < max_steps; ++t) {
    cell_.step(g, x, h, c);
    Graph::Id logp = g.log_softmax(g.affine(h, g.param(w_out_), g.param(b_out_)));
    std::vector<std::int32_t> symbols(static_cast<std::size_t>(batch), static_cast<std::int32_t>(channel_.eos()));
    std::vector<double> mask(static_cast<std::size_t>(batch), 0.0);
    for (int b = 0; b < batch; ++b) {
      const auto& m = msgs[static_cast<std::size_t>(b)];
      if (t < static_cast<int>(m.symbols.size())) {
        symbols[static_cast<std::size_t>(b)] = m.symbols[static_cast<std::size_t>(t)];
        mask[static_cast<std::size_t>(b)] = 1.0;
      }
    }
    Graph::Id mask_in = g.input(Tensor::row(mask));
    Graph::Id picked = g.mul(g.pick(logp, symbols), mask_in);
    Graph::Id ent = g.mul(g.entropy(logp), mask_in);
    out.logp_total = out.logp_total < 0 ? picked : g.add(out.logp_total, picked);
    out.entropy_total = out.entropy_total < 0 ? ent : g.add(out.entropy_total, ent);
    if (t + 1 < max_steps) x = g.rows(g.param(sym_emb_), symbols);
  }
  if (out.logp_total < 0) {
    out.logp_total = g.input(Tensor::row(std::vector<double>(static_cast<std::size_t>(batch), 0.0)));
    out.entropy_total = out.logp_total;
  }
  return out;
}

Graph::Id SpeakerPolicy::log_prob(Graph& g, std::span<const std::int64_t> objects,
                                  const std::vector<Message>& msgs) {
  return score(g, objects, msgs).logp_total;
}

std::vector<double> SpeakerPolicy::step_probs(std::int64_t object,
                                              std::span<const std::int32_t> prefix) {
  Graph g;
  const std::int64_t objs[1] = {object};
  Graph::Id h = initial_state(g, objs);
  Graph::Id c = g.input(Tensor(1, hidden_));
  Graph::Id x = g.rows(g.param(start_emb_), {0});
  for (std::int32_t s : prefix) {
    cell_.step(g, x, h, c);
    x = g.rows(g.param(sym_emb_), {s});
  }
  cell_.step(g, x, h, c);
  Graph::Id logp = g.log_softmax(g.affine(h, g.param(w_out_), g.param(b_out_)));
  std::vector<double> probs(static_cast<std::size_t>(channel_.vocab));
  for (int j = 0; j < channel_.vocab; ++j) probs[static_cast<std::size_t>(j)] = std::exp(g.val(logp).at(0, j));
  return probs;
}

std::vector<Param*> SpeakerPolicy::params() {
  std::vector<Param*> ps{&w_in_, &b_in_, &sym_emb_, &start_emb_, &w_out_, &b_out_};
  for (Param* p : cell_.params()) ps.push_back(p);
  return ps;
}

ListenerPolicy::ListenerPolicy(ObjectSpaceSpec spec, Channel ch, int hidden,
                               bool layer_norm, Rng& rng)
    : spec_(std::move(spec)),
      channel_(ch),
      hidden_(hidden),
      sym_emb_("listener.sym_emb", Tensor(ch.vocab, hidden)),
      cell_("listener.lstm", hidden, hidden, layer_norm, rng) {
  init_uniform_fan_in(sym_emb_, channel_.vocab, rng);
  head_w_.reserve(static_cast<std::size_t>(spec_.num_attributes));
  head_b_.reserve(static_cast<std::size_t>(spec_.num_attributes));
  for (int k = 0; k < spec_.num_attributes; ++k) {
    const int nk = spec_.cardinalities[static_cast<std::size_t>(k)];
    head_w_.emplace_back("listener.head_w" + std::to_string(k), Tensor(hidden, nk));
    head_b_.emplace_back("listener.head_b" + std::to_string(k),
                         Tensor::row(std::vector<double>(static_cast<std::size_t>(nk), 0.0)));
    init_uniform_fan_in(head_w_.back(), hidden, rng);
  }
}

Graph::Id ListenerPolicy::encode(Graph& g, const std::vector<Message>& msgs,
                                 double dropout, Rng* dropout_rng) {
  const int batch = static_cast<int>(msgs.size());
  int max_steps = 1;
  for (const auto& m : msgs) {
    if (m.symbols.empty()) throw ContractError("listener: empty message");
    max_steps = std::max(max_steps, static_cast<int>(m.symbols.size()));
  }
  Graph::Id h = g.input(Tensor(batch, hidden_));
  Graph::Id c = g.input(Tensor(batch, hidden_));
  for (int t = 0; t < max_steps; ++t) {
    std::vector<std::int32_t> symbols(static_cast<std::size_t>(batch), static_cast<std::int32_t>(channel_.eos()));
    std::vector<double> mask(static_cast<std::size_t>(batch), 0.0);
    for (int b = 0; b < batch; ++b) {
      const auto& m = msgs[static_cast<std::size_t>(b)];
      if (t < static_cast<int>(m.symbols.size())) {
        symbols[static_cast<std::size_t>(b)] = m.symbols[static_cast<std::size_t>(t)];
        mask[static_cast<std::size_t>(b)] = 1.0;
      }
    }
    Graph::Id x = g.rows(g.param(sym_emb_), symbols);
    Graph::Id h_new = h, c_new = c;
    cell_.step(g, x, h_new, c_new);
    h = g.lerp_rows(h_new, h, mask);
    c = g.lerp_rows(c_new, c, std::move(mask));
  }
  if (dropout > 0.0) {
    if (!dropout_rng) throw ContractError("listener dropout needs a noise stream");
    h = g.dropout(h, dropout, *dropout_rng);
  }
  return h;
}

ListenerOutput ListenerPolicy::forward(Graph& g, const std::vector<Message>& msgs,
                                       std::span<const std::int64_t> targets,
                                       double dropout, Rng* dropout_rng) {
  if (msgs.size() != targets.size()) throw ContractError("listener forward: batch mismatch");
  Graph::Id h = encode(g, msgs, dropout, dropout_rng);
  std::vector<Object> objs;
  objs.reserve(targets.size());
  for (std::int64_t t : targets) objs.push_back(index_to_object(spec_, t));
  ListenerOutput out;
  Graph::Id total = -1;
  for (int k = 0; k < spec_.num_attributes; ++k) {
    Graph::Id logits = g.affine(h, g.param(head_w_[static_cast<std::size_t>(k)]),
                                g.param(head_b_[static_cast<std::size_t>(k)]));
    Graph::Id logp = g.log_softmax(logits);
    out.head_logp.push_back(logp);
    std::vector<std::int32_t> tk(targets.size());
    for (std::size_t i = 0; i < targets.size(); ++i)
      tk[i] = static_cast<std::int32_t>(objs[i].attrs[static_cast<std::size_t>(k)]);
    Graph::Id picked = g.pick(logp, std::move(tk));
    total = total < 0 ? picked : g.add(total, picked);
  }
  out.loglik = total;
  return out;
}

std::vector<Param*> ListenerPolicy::params() {
  std::vector<Param*> ps{&sym_emb_};
  for (Param* p : cell_.params()) ps.push_back(p);
  for (auto& w : head_w_) ps.push_back(&w);
  for (auto& b : head_b_) ps.push_back(&b);
  return ps;
}

double reconstruction_accuracy(const Graph& g, const ListenerOutput& out,
                               const ObjectSpaceSpec& spec,
                               std::span<const std::int64_t> targets) {
  double correct = 0.0;
  const auto batch = targets.size();
  std::vector<Object> objs;
  objs.reserve(batch);
  for (std::int64_t t : targets) objs.push_back(index_to_object(spec, t));
  for (int k = 0; k < spec.num_attributes; ++k) {
    const Tensor& lp = g.val(out.head_logp[static_cast<std::size_t>(k)]);
    for (std::size_t i = 0; i < batch; ++i) {
      int best = 0;
      for (int j = 1; j < lp.cols(); ++j)
        if (lp.at(static_cast<int>(i), j) > lp.at(static_cast<int>(i), best)) best = j;
      if (best == objs[i].attrs[static_cast<std::size_t>(k)]) correct += 1.0;
    }
  }
  return correct / (static_cast<double>(batch) * spec.num_attributes);
}

DiscriminationListener::DiscriminationListener(ObjectSpaceSpec spec, Channel ch,
                                               int hidden, int embed_dim,
                                               bool layer_norm, Rng& rng)
    : spec_(std::move(spec)),
      channel_(ch),
      hidden_(hidden),
      embed_dim_(embed_dim),
      sym_emb_("listener.sym_emb", Tensor(ch.vocab, hidden)),
      cell_("listener.lstm", hidden, hidden, layer_norm, rng),
      msg_proj_w_("listener.msg_proj_w", Tensor(hidden, embed_dim)),
      msg_proj_b_("listener.msg_proj_b",
                  Tensor::row(std::vector<double>(static_cast<std::size_t>(embed_dim), 0.0))),
      cand_w_("listener.cand_w", Tensor(spec_.one_hot_dim(), embed_dim)),
      cand_b_("listener.cand_b",
              Tensor::row(std::vector<double>(static_cast<std::size_t>(embed_dim), 0.0))) {
  init_uniform_fan_in(sym_emb_, channel_.vocab, rng);
  init_uniform_fan_in(msg_proj_w_, hidden, rng);
  init_uniform_fan_in(cand_w_, spec_.one_hot_dim(), rng);
}

DiscriminationOutput DiscriminationListener::forward(
    Graph& g, const std::vector<Message>& msgs, std::span<const std::int64_t> candidates,
    std::span<const std::int32_t> target_pos, int num_candidates) {
  const int batch = static_cast<int>(msgs.size());
  if (candidates.size() != static_cast<std::size_t>(batch) * num_candidates ||
      target_pos.size() != static_cast<std::size_t>(batch))
    throw ContractError("discrimination forward: batch mismatch");
  for (int b = 0; b < batch; ++b) {
    const std::int32_t pos = target_pos[static_cast<std::size_t>(b)];
    if (pos < 0 || pos >= num_candidates)
      throw ContractError("discrimination forward: target index out of range");
    const std::int64_t target = candidates[static_cast<std::size_t>(b) * num_candidates + pos];
    int count = 0;
    for (int j = 0; j < num_candidates; ++j)
      if (candidates[static_cast<std::size_t>(b) * num_candidates + j] == target) ++count;
    if (count != 1)
      throw ContractError("discrimination forward: target duplicated in the candidate set");
  }

  // Message tower.
  Graph::Id h = g.input(Tensor(batch, hidden_));
  Graph::Id c = g.input(Tensor(batch, hidden_));
  int max_steps = 1;
  for (const auto& m : msgs) max_steps = std::max(max_steps, static_cast<int>(m.symbols.size()));
  for (int t = 0; t < max_steps; ++t) {
    std::vector<std::int32_t> symbols(static_cast<std::size_t>(batch), static_cast<std::int32_t>(channel_.eos()));
    std::vector<double> mask(static_cast<std::size_t>(batch), 0.0);
    for (int b = 0; b < batch; ++b) {
      const auto& m = msgs[static_cast<std::size_t>(b)];
      if (t < static_cast<int>(m.symbols.size())) {
        symbols[static_cast<std::size_t>(b)] = m.symbols[static_cast<std::size_t>(t)];
        mask[static_cast<std::size_t>(b)] = 1.0;
      }
    }
    Graph::Id x = g.rows(g.param(sym_emb_), symbols);
    Graph::Id h_new = h, c_new = c;
    cell_.step(g, x, h_new, c_new);
    h = g.lerp_rows(h_new, h, mask);
    c = g.lerp_rows(c_new, c, std::move(mask));
  }
  Graph::Id msg_vec = g.affine(h, g.param(msg_proj_w_), g.param(msg_proj_b_));

  Graph::Id cand_onehot = g.input(one_hot_batch(spec_, candidates));
  Graph::Id cand_vec = g.affine(cand_onehot, g.param(cand_w_), g.param(cand_b_));

  DiscriminationOutput out;
  Graph::Id scores = g.group_dot(msg_vec, cand_vec, num_candidates);
  out.logp = g.log_softmax(scores);
  out.target_loglik =
      g.pick(out.logp, std::vector<std::int32_t>(target_pos.begin(), target_pos.end()));
  return out;
}

std::vector<Param*> DiscriminationListener::params() {
  std::vector<Param*> ps{&sym_emb_, &msg_proj_w_, &msg_proj_b_, &cand_w_, &cand_b_};
  for (Param* p : cell_.params()) ps.push_back(p);
  return ps;
}

double discrimination_accuracy(const Graph& g, const DiscriminationOutput& out,
                               std::span<const std::int32_t> target_pos) {
  const Tensor& lp = g.val(out.logp);
  double correct = 0.0;
  for (int i = 0; i < lp.rows(); ++i) {
    int best = 0;
    for (int j = 1; j < lp.cols(); ++j)
      if (lp.at(i, j) > lp.at(i, best)) best = j;
    if (best == target_pos[static_cast<std::size_t>(i)]) correct += 1.0;
  }
  return correct / static_cast<double>(lp.rows());
}

}  // namespace lewisim
