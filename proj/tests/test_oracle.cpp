#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <sstream>

#include "doctest.h"
#include "lewisim/oracle.hpp"
#include "lewisim/tensor.hpp"

using namespace lewisim;

namespace {

TabularGame bijection_game(int n) {
  TabularGame game;
  game.prior.assign(static_cast<std::size_t>(n), 1.0 / n);
  game.speaker.assign(static_cast<std::size_t>(n),
                      std::vector<double>(static_cast<std::size_t>(n), 0.0));
  game.listener.assign(static_cast<std::size_t>(n),
                       std::vector<double>(static_cast<std::size_t>(n), 0.0));
  for (int i = 0; i < n; ++i) {
    game.speaker[static_cast<std::size_t>(i)][static_cast<std::size_t>((i + 1) % n)] = 1.0;
    game.listener[static_cast<std::size_t>((i + 1) % n)][static_cast<std::size_t>(i)] = 1.0;
  }
  return game;
}

}  // namespace

TEST_CASE("posterior: deterministic bijection inverts the permutation") {
  const TabularGame game = bijection_game(4);
  game.validate();
  const Posterior post = posterior(game);
  for (int m = 0; m < 4; ++m) {
    REQUIRE(post.defined(m));
    for (int x = 0; x < 4; ++x)
      CHECK(post.rows[static_cast<std::size_t>(m)][static_cast<std::size_t>(x)] ==
            doctest::Approx((m == (x + 1) % 4) ? 1.0 : 0.0));
  }
}

TEST_CASE("posterior: merged messages recover the prior") {
  TabularGame game;
  game.prior = {0.75, 0.25};
  game.speaker = {{1.0, 0.0}, {1.0, 0.0}};
  game.listener = {{0.5, 0.5}, {0.5, 0.5}};
  game.validate();
  const Posterior post = posterior(game);
  REQUIRE(post.defined(0));
  CHECK(post.rows[0][0] == doctest::Approx(0.75));
  CHECK(post.rows[0][1] == doctest::Approx(0.25));
  CHECK_FALSE(post.defined(1));  // zero marginal: undefined row
}

TEST_CASE("posterior minimizes the cross-entropy loss (Gibbs)") {
  Rng rng(101);
  for (int trial = 0; trial < 20; ++trial) {
    TabularGame game = random_game(6, 6, rng);
    const Posterior post = posterior(game);
    std::vector<std::vector<double>> post_rows = post.rows;
    for (auto& row : post_rows)
      if (row.empty()) row.assign(6, 1.0 / 6.0);
    const double best = cross_entropy_loss(game, post_rows);
    for (int rival_i = 0; rival_i < 50; ++rival_i) {
      const auto rival = random_game(6, 6, rng).listener;
      CHECK(cross_entropy_loss(game, rival) >= best - 1e-12);
    }
  }
}

TEST_CASE("entropies: bijective, constant and random speakers") {
  {
    const TabularGame game = bijection_game(4);
    const EntropyReport rep = entropies(game);
    CHECK(rep.h_x_given_m == doctest::Approx(0.0));
    CHECK(rep.mutual_information == doctest::Approx(rep.h_x));
  }
  {
    TabularGame game;
    game.prior.assign(4, 0.25);
    game.speaker.assign(4, {1.0, 0.0});
    game.listener.assign(2, std::vector<double>(4, 0.25));
    const EntropyReport rep = entropies(game);
    CHECK(rep.h_x_given_m == doctest::Approx(std::log(4.0)));
    CHECK(rep.h_x_given_m == doctest::Approx(1.386294).epsilon(1e-6));
    CHECK(rep.mutual_information == doctest::Approx(0.0));
  }
  {
    Rng rng(11);
    for (int i = 0; i < 50; ++i) {
      const TabularGame game = random_game(5, 7, rng);
      const EntropyReport rep = entropies(game);
      // Independent route: -sum_x p(x) sum_m pi(m|x) log rho*(x|m).
      const Posterior post = posterior(game);
      double h = 0.0;
      for (int x = 0; x < 5; ++x)
        for (int m = 0; m < 7; ++m) {
          const double w = game.prior[static_cast<std::size_t>(x)] *
                           game.speaker[static_cast<std::size_t>(x)][static_cast<std::size_t>(m)];
          if (w > 0.0)
            h -= w * std::log(post.rows[static_cast<std::size_t>(m)][static_cast<std::size_t>(x)]);
        }
      CHECK(std::abs(rep.h_x_given_m - h) <= 1e-12);
      CHECK(std::abs(rep.h_x_given_m - (rep.h_x - rep.mutual_information)) <= 1e-12);
    }
  }
}

TEST_CASE("log-likelihood decomposition: exact identity") {
  {
    // Listener equal to the posterior: adapt = 0, total = H(X|M).
    TabularGame game = bijection_game(4);
    const DecompositionRecord rec = decompose_loglik(game);
    CHECK(rec.adapt == doctest::Approx(0.0));
    CHECK(rec.total == doctest::Approx(rec.info));
    CHECK(std::abs(rec.residual) <= 1e-10);
  }
  {
    // Uniform listener against a bijective speaker: info 0, adapt ln 4.
    TabularGame game = bijection_game(4);
    game.listener.assign(4, std::vector<double>(4, 0.25));
    const DecompositionRecord rec = decompose_loglik(game);
    CHECK(rec.info == doctest::Approx(0.0));
    CHECK(rec.adapt == doctest::Approx(std::log(4.0)));
    CHECK(rec.total == doctest::Approx(std::log(4.0)));
    CHECK(std::abs(rec.residual) <= 1e-10);
  }
  {
    Rng rng(303);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
      const int nx = 2 + static_cast<int>(rng.uniform_int(15));
      const int nm = 2 + static_cast<int>(rng.uniform_int(15));
      const TabularGame game = random_game(nx, nm, rng);
      const DecompositionRecord rec = decompose_loglik(game);
      worst = std::max(worst, std::abs(rec.residual));
      CHECK(rec.adapt >= 0.0);
    }
    CHECK(worst <= 1e-10);
  }
}

TEST_CASE("zero listener mass on a supported pair flags infinite loss") {
  TabularGame game = bijection_game(3);
  game.listener[0] = {0.0, 1.0, 0.0};  // message 0 refers to object 2
  const DecompositionRecord rec = decompose_loglik(game);
  CHECK(rec.infinite);
  CHECK(std::isinf(rec.total));
}

TEST_CASE("accuracy-reward decomposition") {
  {
    // Posterior listener on a bijective speaker: expected accuracy 1.
    const TabularGame game = bijection_game(4);
    const GeneralDecomposition dec = decompose_general(game, RewardKind::kAccuracy);
    CHECK(dec.record.total == doctest::Approx(-1.0));
    CHECK(dec.record.adapt == doctest::Approx(0.0));
    CHECK(dec.record.info == doctest::Approx(0.0));
    CHECK(std::abs(dec.record.residual) <= 1e-10);
  }
  {
    // Two objects onto one message: optimal accuracy listener is the Dirac on
    // the lowest-index mode; expected accuracy 1/2.
    TabularGame game;
    game.prior = {0.5, 0.5};
    game.speaker = {{1.0}, {1.0}};
    game.listener = {{0.5, 0.5}};
    const GeneralDecomposition dec = decompose_general(game, RewardKind::kAccuracy);
    REQUIRE(dec.optimal_listener.size() == 1);
    CHECK(dec.optimal_listener[0][0] == 1.0);
    CHECK(dec.optimal_listener[0][1] == 0.0);
    // L_info = 1 - max posterior = 0.5; optimal listener's expected accuracy 0.5.
    CHECK(dec.record.info == doctest::Approx(0.5));
    CHECK(std::abs(dec.record.residual) <= 1e-10);
  }
  {
    Rng rng(404);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
      const int nx = 2 + static_cast<int>(rng.uniform_int(15));
      const int nm = 2 + static_cast<int>(rng.uniform_int(15));
      const TabularGame game = random_game(nx, nm, rng);
      const GeneralDecomposition dec = decompose_general(game, RewardKind::kAccuracy);
      // Direct expected-reward route.
      double reward = 0.0;
      for (int x = 0; x < nx; ++x)
        for (int m = 0; m < nm; ++m)
          reward += game.prior[static_cast<std::size_t>(x)] *
                    game.speaker[static_cast<std::size_t>(x)][static_cast<std::size_t>(m)] *
                    game.listener[static_cast<std::size_t>(m)][static_cast<std::size_t>(x)];
      CHECK(std::abs(dec.record.total + reward) <= 1e-12);
      worst = std::max(worst, std::abs(dec.record.residual));
      CHECK(dec.record.adapt >= -1e-12);
      // The optimal listener rows are Diracs on the posterior mode.
      const Posterior post = posterior(game);
      for (int m = 0; m < nm; ++m) {
        if (!post.defined(m)) continue;
        int mode = 0;
        for (int x = 1; x < nx; ++x)
          if (post.rows[static_cast<std::size_t>(m)][static_cast<std::size_t>(x)] >
              post.rows[static_cast<std::size_t>(m)][static_cast<std::size_t>(mode)])
            mode = x;
        CHECK(dec.optimal_listener[static_cast<std::size_t>(m)][static_cast<std::size_t>(mode)] == 1.0);
      }
    }
    CHECK(worst <= 1e-10);
  }
}

TEST_CASE("info loss is zero exactly for Dirac posteriors") {
  // Ambiguous case: one message shared by two objects.
  TabularGame shared;
  shared.prior = {0.5, 0.5};
  shared.speaker = {{1.0}, {1.0}};
  shared.listener = {{0.5, 0.5}};
  CHECK(decompose_loglik(shared).info > 0.0);
  CHECK(decompose_general(shared, RewardKind::kAccuracy).record.info > 0.0);
  // Unambiguous case.
  const TabularGame bij = bijection_game(5);
  CHECK(decompose_loglik(bij).info == doctest::Approx(0.0));
  CHECK(decompose_general(bij, RewardKind::kAccuracy).record.info == doctest::Approx(0.0));
}

TEST_CASE("gap split") {
  {
    // Identical priors: both gaps exactly zero.
    Rng rng(9);
    const TabularGame game = random_game(6, 5, rng);
    const GapSplit gap = gap_split(game, game);
    CHECK(gap.info_gap == 0.0);
    CHECK(gap.adapt_gap == 0.0);
  }
  {
    // Speaker unambiguous on the train support but ambiguous on the full
    // distribution: information gap < 0.
    TabularGame full;
    full.prior = {0.5, 0.25, 0.25};
    full.speaker = {{1.0, 0.0}, {0.0, 1.0}, {0.0, 1.0}};  // objects 1,2 collide
    full.listener = {{0.8, 0.1, 0.1}, {0.1, 0.8, 0.1}};
    TabularGame train = full;
    train.prior = {0.5, 0.5, 0.0};  // train set misses object 2
    const GapSplit gap = gap_split(train, full);
    CHECK(decompose_loglik(train).info == doctest::Approx(0.0));
    CHECK(decompose_loglik(full).info > 0.0);
    CHECK(gap.info_gap < 0.0);
  }
  {
    // Listener fitted to the train posterior under a different full prior:
    // co-adaptation gap < 0.
    TabularGame full;
    full.prior = {0.6, 0.4};
    full.speaker = {{0.7, 0.3}, {0.2, 0.8}};
    TabularGame train = full;
    train.prior = {0.3, 0.7};
    const Posterior tpost = posterior(TabularGame{train.prior, train.speaker, {}});
    train.listener = tpost.rows;
    full.listener = tpost.rows;
    const GapSplit gap = gap_split(train, full);
    CHECK(decompose_loglik(train).adapt == doctest::Approx(0.0));
    CHECK(gap.adapt_gap < 0.0);
  }
}

TEST_CASE("tabular game file round trip") {
  Rng rng(88);
  const TabularGame game = random_game(5, 7, rng);
  std::ostringstream os;
  save_game(game, os);
  std::istringstream is(os.str());
  const TabularGame loaded = load_game(is);
  REQUIRE(loaded.num_objects() == 5);
  REQUIRE(loaded.num_messages() == 7);
  for (int x = 0; x < 5; ++x)
    for (int m = 0; m < 7; ++m)
      CHECK(loaded.speaker[static_cast<std::size_t>(x)][static_cast<std::size_t>(m)] ==
            doctest::Approx(game.speaker[static_cast<std::size_t>(x)][static_cast<std::size_t>(m)])
                .epsilon(1e-15));
}

TEST_CASE("validation rejects malformed games") {
  TabularGame game;
  game.prior = {0.5, 0.6};
  game.speaker = {{1.0, 0.0}, {0.0, 1.0}};
  game.listener = {{0.5, 0.5}, {0.5, 0.5}};
  CHECK_THROWS_AS(game.validate(), ContractError);
  game.prior = {0.5, 0.5};
  game.speaker[0][0] = -0.1;
  CHECK_THROWS_AS(game.validate(), ContractError);
}
