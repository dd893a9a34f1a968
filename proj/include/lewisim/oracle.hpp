#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "lewisim/rng.hpp"

namespace lewisim {

// Fully enumerated game: prior over |X| objects, row-stochastic speaker
// matrix pi(m|x) of shape |X| x |M|, row-stochastic listener matrix
// rho(x|m) of shape |M| x |X|.
struct TabularGame {
  std::vector<double> prior;                  // |X|
  std::vector<std::vector<double>> speaker;   // |X| x |M|
  std::vector<std::vector<double>> listener;  // |M| x |X|

  int num_objects() const { return static_cast<int>(prior.size()); }
  int num_messages() const {
    return speaker.empty() ? 0 : static_cast<int>(speaker[0].size());
  }
  // Row sums within 1e-12 of 1, entries nonnegative.
  void validate() const;

  // Marginal message distribution under the prior.
  std::vector<double> message_marginal() const;
};

// Bayes inversion of the speaker under the prior. Rows for messages with
// zero marginal are left empty (undefined, weight zero in all expectations).
struct Posterior {
  std::vector<std::vector<double>> rows;  // |M| x |X|; empty row == undefined
  std::vector<double> marginal;           // pi(m)
  bool defined(int m) const { return !rows[static_cast<std::size_t>(m)].empty(); }
};

Posterior posterior(const TabularGame& game);

struct EntropyReport {
  double h_x = 0.0;        // H(X)
  double h_x_given_m = 0.0;  // H(X|M)
  double mutual_information = 0.0;  // I(X;M)
};

EntropyReport entropies(const TabularGame& game);
double conditional_entropy(const TabularGame& game);
double mutual_information(const TabularGame& game);

struct DecompositionRecord {
  double total = 0.0;
  double info = 0.0;
  double adapt = 0.0;
  double residual = 0.0;       // total - (info + adapt) + reward offset
  bool infinite = false;       // listener puts zero mass on a supported pair
};

// Log-likelihood reward: total = -E[log rho(x|m)], info = H(X|M),
// adapt = E_m KL(posterior || listener). Identity residual <= 1e-10.
DecompositionRecord decompose_loglik(const TabularGame& game);

// Expected loss of an arbitrary listener on the game (log-likelihood reward).
double cross_entropy_loss(const TabularGame& game,
                          const std::vector<std::vector<double>>& listener);

enum class RewardKind { kLogLikelihood, kAccuracy };

struct GeneralDecomposition {
  DecompositionRecord record;
  double reward_offset = 0.0;  // the K in r = -D(1_x || rho) + K
  std::vector<std::vector<double>> optimal_listener;  // per-message rows
};

// Appendix-style general cooperative reward. For the accuracy instance
// (D(p||q) = 1 - E_p[q], K = 1) the optimal listener row is the Dirac on the
// posterior mode, ties broken to the lowest object index, and
// total = info + adapt - K.
GeneralDecomposition decompose_general(const TabularGame& game, RewardKind kind);

struct GapSplit {
  double info_gap = 0.0;   // L_info^train - L_info
  double adapt_gap = 0.0;  // L_adapt^train - L_adapt
};

// Exact train-vs-full gap decomposition: same speaker and listener, two
// priors, each decomposed against its own posterior.
GapSplit gap_split(const TabularGame& train_game, const TabularGame& full_game);

// Uniformly random row-stochastic game (exponential spacings per row).
TabularGame random_game(int num_objects, int num_messages, Rng& rng);

// Structured-text round trip: dimensions header then rows.
void save_game(const TabularGame& game, std::ostream& os);
TabularGame load_game(std::istream& is);
TabularGame load_game_file(const std::string& path);

}  // namespace lewisim
