#include "lewisim/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "lewisim/env.hpp"
#include "lewisim/tensor.hpp"

namespace lewisim {

namespace {

constexpr double kRowTol = 1e-12;

void check_stochastic_row(const std::vector<double>& row, const char* what) {
  double s = 0.0;
  for (double p : row) {
    if (p < 0.0) throw ContractError(std::string(what) + ": negative entry");
    s += p;
  }
  if (std::abs(s - 1.0) > kRowTol)
    throw ContractError(std::string(what) + ": row does not sum to 1");
}

// 0 log 0 = 0 convention.
double xlogx(double p) { return p > 0.0 ? p * std::log(p) : 0.0; }

}  // namespace

void TabularGame::validate() const {
  if (prior.empty() || speaker.size() != prior.size())
    throw ContractError("tabular game: speaker rows must match prior length");
  check_stochastic_row(prior, "prior");
  const std::size_t m = speaker[0].size();
  for (const auto& row : speaker) {
    if (row.size() != m) throw ContractError("tabular game: ragged speaker matrix");
    check_stochastic_row(row, "speaker");
  }
  if (listener.size() != m)
    throw ContractError("tabular game: listener rows must match message count");
  for (const auto& row : listener) {
    if (row.size() != prior.size())
      throw ContractError("tabular game: ragged listener matrix");
    check_stochastic_row(row, "listener");
  }
}

std::vector<double> TabularGame::message_marginal() const {
  std::vector<double> marg(static_cast<std::size_t>(num_messages()), 0.0);
  for (int x = 0; x < num_objects(); ++x) {
    const double px = prior[static_cast<std::size_t>(x)];
    if (px == 0.0) continue;
    for (int m = 0; m < num_messages(); ++m)
      marg[static_cast<std::size_t>(m)] += px * speaker[static_cast<std::size_t>(x)][static_cast<std::size_t>(m)];
  }
  return marg;
}

Posterior posterior(const TabularGame& game) {
  Posterior post;
  post.marginal = game.message_marginal();
  post.rows.resize(static_cast<std::size_t>(game.num_messages()));
  for (int m = 0; m < game.num_messages(); ++m) {
    const double pm = post.marginal[static_cast<std::size_t>(m)];
    if (pm <= 0.0) continue;  // undefined row, weight zero everywhere
    auto& row = post.rows[static_cast<std::size_t>(m)];
    row.resize(static_cast<std::size_t>(game.num_objects()));
    for (int x = 0; x < game.num_objects(); ++x)
      row[static_cast<std::size_t>(x)] =
          game.prior[static_cast<std::size_t>(x)] *
          game.speaker[static_cast<std::size_t>(x)][static_cast<std::size_t>(m)] / pm;
  }
  return post;
}

EntropyReport entropies(const TabularGame& game) {
  EntropyReport rep;
  for (double p : game.prior) rep.h_x -= xlogx(p);
  const Posterior post = posterior(game);
  // H(X|M) = -sum_m pi(m) sum_x rho*(x|m) log rho*(x|m)
  for (int m = 0; m < game.num_messages(); ++m) {
    if (!post.defined(m)) continue;
    double h = 0.0;
    for (double p : post.rows[static_cast<std::size_t>(m)]) h -= xlogx(p);
    rep.h_x_given_m += post.marginal[static_cast<std::size_t>(m)] * h;
  }
  rep.mutual_information = rep.h_x - rep.h_x_given_m;
  return rep;
}

double conditional_entropy(const TabularGame& game) { return entropies(game).h_x_given_m; }
double mutual_information(const TabularGame& game) { return entropies(game).mutual_information; }

double cross_entropy_loss(const TabularGame& game,
                          const std::vector<std::vector<double>>& listener) {
  double loss = 0.0;
  for (int x = 0; x < game.num_objects(); ++x) {
    const double px = game.prior[static_cast<std::size_t>(x)];
    if (px == 0.0) continue;
    for (int m = 0; m < game.num_messages(); ++m) {
      const double w = px * game.speaker[static_cast<std::size_t>(x)][static_cast<std::size_t>(m)];
      if (w == 0.0) continue;
      const double q = listener[static_cast<std::size_t>(m)][static_cast<std::size_t>(x)];
      if (q <= 0.0) return std::numeric_limits<double>::infinity();
      loss -= w * std::log(q);
    }
  }
  return loss;
}

DecompositionRecord decompose_loglik(const TabularGame& game) {
  DecompositionRecord rec;
  const Posterior post = posterior(game);
  rec.info = 0.0;
  rec.adapt = 0.0;
  for (int m = 0; m < game.num_messages(); ++m) {
    if (!post.defined(m)) continue;
    const auto& pstar = post.rows[static_cast<std::size_t>(m)];
    const auto& rho = game.listener[static_cast<std::size_t>(m)];
    double h = 0.0, kl = 0.0;
    for (int x = 0; x < game.num_objects(); ++x) {
      const double p = pstar[static_cast<std::size_t>(x)];
      if (p == 0.0) continue;  // 0 log 0 = 0
      h -= p * std::log(p);
      const double q = rho[static_cast<std::size_t>(x)];
      if (q <= 0.0) {
        rec.infinite = true;
        kl = std::numeric_limits<double>::infinity();
      } else {
        kl += p * std::log(p / q);  // inf absorbs further finite terms
      }
    }
    rec.info += post.marginal[static_cast<std::size_t>(m)] * h;
    rec.adapt += post.marginal[static_cast<std::size_t>(m)] * kl;
  }
  rec.total = cross_entropy_loss(game, game.listener);
  rec.residual = rec.infinite ? 0.0 : rec.total - (rec.info + rec.adapt);
  return rec;
}

GeneralDecomposition decompose_general(const TabularGame& game, RewardKind kind) {
  if (kind == RewardKind::kLogLikelihood) {
    GeneralDecomposition out;
    out.record = decompose_loglik(game);
    out.reward_offset = 0.0;
    const Posterior post = posterior(game);
    out.optimal_listener = post.rows;
    return out;
  }

  // Accuracy reward: r = rho(x|m), i.e. D(p||q) = 1 - E_p[q], K = 1.
  GeneralDecomposition out;
  out.reward_offset = 1.0;
  const Posterior post = posterior(game);
  out.optimal_listener.resize(static_cast<std::size_t>(game.num_messages()));
  double info = 0.0, adapt = 0.0, expected_reward = 0.0;
  for (int m = 0; m < game.num_messages(); ++m) {
    if (!post.defined(m)) continue;
    const auto& pstar = post.rows[static_cast<std::size_t>(m)];
    int mode = 0;
    for (int x = 1; x < game.num_objects(); ++x)
      if (pstar[static_cast<std::size_t>(x)] > pstar[static_cast<std::size_t>(mode)]) mode = x;
    auto& opt = out.optimal_listener[static_cast<std::size_t>(m)];
    opt.assign(static_cast<std::size_t>(game.num_objects()), 0.0);
    opt[static_cast<std::size_t>(mode)] = 1.0;

    const double pm = post.marginal[static_cast<std::size_t>(m)];
    const double pmax = pstar[static_cast<std::size_t>(mode)];
    double fit = 0.0;  // E_{x~rho*}[rho_phi(x|m)]
    for (int x = 0; x < game.num_objects(); ++x)
      fit += pstar[static_cast<std::size_t>(x)] *
             game.listener[static_cast<std::size_t>(m)][static_cast<std::size_t>(x)];
    info += pm * (1.0 - pmax);
    adapt += pm * (pmax - fit);
    expected_reward += pm * fit;
  }
  out.record.info = info;
  out.record.adapt = adapt;
  out.record.total = -expected_reward;  // L = -E[r]
  // Identity: L = info + adapt - K.
  out.record.residual = out.record.total - (info + adapt - out.reward_offset);
  return out;
}

GapSplit gap_split(const TabularGame& train_game, const TabularGame& full_game) {
  if (train_game.num_objects() != full_game.num_objects() ||
      train_game.num_messages() != full_game.num_messages())
    throw ContractError("gap_split: games must share object and message sets");
  if (train_game.speaker != full_game.speaker)
    throw ContractError("gap_split: games must share the speaker matrix");
  const DecompositionRecord train_rec = decompose_loglik(train_game);
  const DecompositionRecord full_rec = decompose_loglik(full_game);
  GapSplit gap;
  gap.info_gap = train_rec.info - full_rec.info;
  gap.adapt_gap = train_rec.adapt - full_rec.adapt;
  return gap;
}

namespace {

std::vector<double> random_simplex(std::size_t n, Rng& rng) {
  std::vector<double> row(n);
  double total = 0.0;
  for (double& x : row) {
    x = -std::log(1.0 - rng.uniform());
    total += x;
  }
  for (double& x : row) x /= total;
  // Renormalize once more so the sum is 1 within strict row tolerance.
  double s = 0.0;
  for (double x : row) s += x;
  for (double& x : row) x /= s;
  return row;
}

}  // namespace

TabularGame random_game(int num_objects, int num_messages, Rng& rng) {
  TabularGame game;
  game.prior = random_simplex(static_cast<std::size_t>(num_objects), rng);
  game.speaker.reserve(static_cast<std::size_t>(num_objects));
  for (int x = 0; x < num_objects; ++x)
    game.speaker.push_back(random_simplex(static_cast<std::size_t>(num_messages), rng));
  game.listener.reserve(static_cast<std::size_t>(num_messages));
  for (int m = 0; m < num_messages; ++m)
    game.listener.push_back(random_simplex(static_cast<std::size_t>(num_objects), rng));
  return game;
}

void save_game(const TabularGame& game, std::ostream& os) {
  os << "tabular-game " << game.num_objects() << " " << game.num_messages() << "\n";
  os.precision(17);
  os << "#prior\n";
  for (double p : game.prior) os << p << "\n";
  os << "#speaker\n";
  for (const auto& row : game.speaker) {
    for (std::size_t j = 0; j < row.size(); ++j) os << (j ? " " : "") << row[j];
    os << "\n";
  }
  os << "#listener\n";
  for (const auto& row : game.listener) {
    for (std::size_t j = 0; j < row.size(); ++j) os << (j ? " " : "") << row[j];
    os << "\n";
  }
}

TabularGame load_game(std::istream& is) {
  std::string magic;
  int nx = 0, nm = 0;
  if (!(is >> magic >> nx >> nm) || magic != "tabular-game")
    throw ConfigError("tabular game file: bad header");
  auto expect = [&is](const char* header) {
    std::string tok;
    if (!(is >> tok) || tok != header)
      throw ConfigError(std::string("tabular game file: expected ") + header);
  };
  TabularGame game;
  expect("#prior");
  game.prior.resize(static_cast<std::size_t>(nx));
  for (double& p : game.prior)
    if (!(is >> p)) throw ConfigError("tabular game file: truncated prior");
  expect("#speaker");
  game.speaker.assign(static_cast<std::size_t>(nx), std::vector<double>(static_cast<std::size_t>(nm)));
  for (auto& row : game.speaker)
    for (double& p : row)
      if (!(is >> p)) throw ConfigError("tabular game file: truncated speaker");
  expect("#listener");
  game.listener.assign(static_cast<std::size_t>(nm), std::vector<double>(static_cast<std::size_t>(nx)));
  for (auto& row : game.listener)
    for (double& p : row)
      if (!(is >> p)) throw ConfigError("tabular game file: truncated listener");
  game.validate();
  return game;
}

TabularGame load_game_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open tabular game file: " + path);
  return load_game(is);
}

}  // namespace lewisim
