// Experiment runner for desk-scale Lewis signaling games.

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "lewisim/checkpoint.hpp"
#include "lewisim/oracle.hpp"
#include "lewisim/runner.hpp"
#include "lewisim/svgplot.hpp"

namespace {

using namespace lewisim;
namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

std::string read_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open file: " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

RunConfig config_from_manifest(const std::string& run_dir) {
  const std::string text = read_file(run_dir + "/manifest.json");
  nlohmann::json doc = nlohmann::json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded() || !doc.contains("config"))
    throw ConfigError("manifest is missing or has no config block: " + run_dir);
  return parse_config(doc["config"].dump());
}

int cmd_train(const std::string& config_path, std::optional<std::uint64_t> seed,
              const std::string& out_dir) {
  RunConfig cfg = load_config_file(config_path);
  if (seed) cfg.seed = *seed;
  RunSummary summary = execute_run(cfg, out_dir);
  if (summary.failed) {
    std::cerr << "numeric failure at update " << summary.failed_update << ": "
              << summary.failure << "\n";
    return kExitNumeric;
  }
  std::cout << "run complete: generalization " << summary.generalization << ", acc_train "
            << summary.acc_train << ", acc_test " << summary.acc_test << "\n";
  return kExitOk;
}

int cmd_sweep(const std::string& config_path, const std::string& param,
              const std::vector<std::string>& values,
              const std::vector<std::uint64_t>& seeds, const std::string& out_dir,
              int jobs) {
  if (values.empty()) throw ConfigError("sweep: empty value list");
  if (seeds.empty()) throw ConfigError("sweep: empty seed list");
  const std::string base_text = read_file(config_path);

  struct Cell {
    std::string value;
    std::uint64_t seed;
    RunConfig cfg;
    std::string dir;
  };
  std::vector<Cell> cells;
  for (const auto& value : values) {
    for (std::uint64_t seed : seeds) {
      std::string text = base_text;
      apply_override(text, param, value);
      RunConfig cfg = parse_config(text);
      cfg.seed = seed;
      std::string cell_dir =
          out_dir + "/" + param + "=" + value + "/seed=" + std::to_string(seed);
      cells.push_back({value, seed, std::move(cfg), std::move(cell_dir)});
    }
  }

  if (jobs < 1) jobs = static_cast<int>(std::thread::hardware_concurrency());
  if (jobs < 1) jobs = 1;
  std::vector<RunSummary> results(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      try {
        results[i] = execute_run(cells[i].cfg, cells[i].dir);
      } catch (const std::exception& e) {
        results[i].failed = true;
        results[i].failure = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  const int n_workers = std::min<int>(jobs, static_cast<int>(cells.size()));
  pool.reserve(static_cast<std::size_t>(n_workers));
  for (int i = 0; i < n_workers; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  fs::create_directories(out_dir);
  std::string csv = summary_csv_header() + "\n";
  for (std::size_t i = 0; i < cells.size(); ++i)
    csv += summary_csv_row(cells[i].value, cells[i].seed, results[i]) + "\n";
  std::ofstream f(out_dir + "/summary.csv", std::ios::trunc);
  f << csv;
  std::cout << "sweep complete: " << cells.size() << " cells, summary in " << out_dir
            << "/summary.csv\n";
  return kExitOk;
}

int cmd_probe(const std::string& run_dir, std::string checkpoint_path,
              std::optional<std::uint64_t> seed, std::string out_path) {
  RunConfig cfg = config_from_manifest(run_dir);
  if (seed) cfg.seed = *seed;
  if (checkpoint_path.empty()) checkpoint_path = run_dir + "/checkpoint_best.txt";
  if (out_path.empty()) out_path = run_dir + "/probe_report.json";
  Checkpoint ck = load_checkpoint(checkpoint_path);
  if (!ck.listener) throw ConfigError("probe: checkpoint has no reconstruction listener");
  DatasetSplit split = load_split_file(run_dir + "/splits.txt");

  NeuralSpeakerSource src(*ck.speaker);
  ProbeTrainResult train_p =
      train_probe(src, &split.train, ProbeDistribution::kTrain, cfg.probe, ck.hidden,
                  ck.listener_layer_norm, cfg.seed, 910001);
  ProbeTrainResult full_p =
      train_probe(src, nullptr, ProbeDistribution::kFull, cfg.probe, ck.hidden,
                  ck.listener_layer_norm, cfg.seed, 910002);
  ProbeReport rep = estimate_decomposition(src, *ck.listener, *train_p.listener,
                                           *full_p.listener, split, cfg.probe, cfg.seed,
                                           910003);
  rep.train_probe_curve = train_p.curve;
  rep.full_probe_curve = full_p.curve;
  rep.train_stop = train_p.stopping_reason;
  rep.full_stop = full_p.stopping_reason;
  rep.train_probe_updates = train_p.updates;
  rep.full_probe_updates = full_p.updates;
  std::ostringstream ss;
  save_probe_report(rep, ss);
  std::cout << ss.str();
  std::ofstream f(out_path, std::ios::trunc);
  f << ss.str();
  return kExitOk;
}

int cmd_toposim(const std::string& run_dir, std::string checkpoint_path,
                std::optional<std::uint64_t> seed, int repeats, int batch) {
  RunConfig cfg = config_from_manifest(run_dir);
  if (seed) cfg.seed = *seed;
  if (checkpoint_path.empty()) checkpoint_path = run_dir + "/checkpoint_best.txt";
  Checkpoint ck = load_checkpoint(checkpoint_path);
  if (repeats <= 0) repeats = cfg.toposim_repeats;
  if (batch <= 0) batch = cfg.toposim_batch;
  NeuralSpeakerSource src(*ck.speaker);
  Rng rng = Rng::stream(cfg.seed, "toposim_cli");
  TopoSimEstimate est = topographic_similarity(src, rng, repeats, batch);
  std::cout.precision(12);
  std::cout << "{\n  \"defined\": " << (est.defined ? "true" : "false") << ",\n";
  std::cout << "  \"mean\": " << est.mean << ",\n  \"stddev\": " << est.stddev << ",\n";
  std::cout << "  \"repeats\": " << est.repeats << ",\n  \"batch\": " << est.batch
            << "\n}\n";
  return kExitOk;
}

int cmd_oracle_verify(int games, std::uint64_t seed, int max_dim) {
  Rng rng = Rng::stream(seed, "oracle_verify");
  double worst_loglik = 0.0, worst_acc = 0.0, worst_entropy = 0.0;
  int gibbs_failures = 0;
  for (int i = 0; i < games; ++i) {
    const int nx = 2 + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(max_dim - 1)));
    const int nm = 2 + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(max_dim - 1)));
    TabularGame game = random_game(nx, nm, rng);
    game.validate();
    const DecompositionRecord rec = decompose_loglik(game);
    worst_loglik = std::max(worst_loglik, std::abs(rec.residual));
    const GeneralDecomposition acc = decompose_general(game, RewardKind::kAccuracy);
    worst_acc = std::max(worst_acc, std::abs(acc.record.residual));
    const EntropyReport ent = entropies(game);
    worst_entropy = std::max(
        worst_entropy, std::abs(ent.h_x_given_m - (ent.h_x - ent.mutual_information)));
    if (i % 10 == 0) {
      // Spot-check posterior optimality against a random listener.
      const Posterior post = posterior(game);
      std::vector<std::vector<double>> post_rows = post.rows;
      for (auto& row : post_rows)
        if (row.empty()) row.assign(static_cast<std::size_t>(nx), 1.0 / nx);
      const double post_loss = cross_entropy_loss(game, post_rows);
      const auto rival = random_game(nx, nm, rng).listener;
      if (cross_entropy_loss(game, rival) < post_loss - 1e-12) ++gibbs_failures;
    }
  }
  std::printf("games: %d\n", games);
  std::printf("max |residual| (log-likelihood decomposition): %.3e\n", worst_loglik);
  std::printf("max |residual| (accuracy decomposition):       %.3e\n", worst_acc);
  std::printf("max |H(X|M) - (H(X) - I(X;M))|:                %.3e\n", worst_entropy);
  std::printf("posterior optimality violations:               %d\n", gibbs_failures);
  const bool ok = worst_loglik <= 1e-10 && worst_acc <= 1e-10 && worst_entropy <= 1e-12 &&
                  gibbs_failures == 0;
  std::printf("%s\n", ok ? "all identities hold" : "IDENTITY VIOLATION");
  return ok ? kExitOk : 1;
}

int cmd_oracle_decompose(const std::string& game_path, const std::string& reward) {
  TabularGame game = load_game_file(game_path);
  RewardKind kind;
  if (reward == "loglik") {
    kind = RewardKind::kLogLikelihood;
  } else if (reward == "accuracy") {
    kind = RewardKind::kAccuracy;
  } else {
    throw ConfigError("oracle: reward must be 'loglik' or 'accuracy'");
  }
  const GeneralDecomposition dec = decompose_general(game, kind);
  std::printf("total:    %.12f\n", dec.record.total);
  std::printf("info:     %.12f\n", dec.record.info);
  std::printf("adapt:    %.12f\n", dec.record.adapt);
  std::printf("offset K: %.12f\n", dec.reward_offset);
  std::printf("residual: %.3e\n", dec.record.residual);
  if (dec.record.infinite) std::printf("note: infinite loss (listener support gap)\n");
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lewisim: a desk-scale laboratory for Lewis signaling games"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::uint64_t seed_value = 0;
  bool seed_given = false;
  auto add_seed = [&](CLI::App* cmd) {
    cmd->add_option("--seed", seed_value, "override the config seed")
        ->each([&](const std::string&) { seed_given = true; });
  };

  auto* train = app.add_subcommand("train", "run one configured experiment");
  train->add_option("--config", config_path, "JSON config file")->required();
  train->add_option("--out", out_dir, "output directory")->required();
  add_seed(train);

  std::string sweep_param;
  std::vector<std::string> sweep_values;
  std::vector<std::uint64_t> sweep_seeds;
  int sweep_jobs = 0;
  auto* sweep = app.add_subcommand("sweep", "run a parameter sweep");
  sweep->add_option("--config", config_path, "JSON config file")->required();
  sweep->add_option("--param", sweep_param, "config path, e.g. regime.n_step")->required();
  sweep->add_option("--values", sweep_values, "comma-separated values")
      ->required()
      ->delimiter(',');
  sweep->add_option("--seeds", sweep_seeds, "comma-separated seeds")->required()->delimiter(',');
  sweep->add_option("--out", out_dir, "output directory")->required();
  sweep->add_option("--jobs", sweep_jobs, "parallel workers (default: cores)");

  std::string run_dir, checkpoint_path, report_out;
  auto* probe = app.add_subcommand("probe", "estimate the loss decomposition");
  probe->add_option("--run", run_dir, "run directory (manifest + splits)")->required();
  probe->add_option("--checkpoint", checkpoint_path, "checkpoint (default: best)");
  probe->add_option("--out", report_out, "report path (default: run dir)");
  add_seed(probe);

  int topo_repeats = 0, topo_batch = 0;
  auto* topo = app.add_subcommand("toposim", "topographic similarity of a checkpoint");
  topo->add_option("--run", run_dir, "run directory")->required();
  topo->add_option("--checkpoint", checkpoint_path, "checkpoint (default: best)");
  topo->add_option("--repeats", topo_repeats, "bootstrap repeats");
  topo->add_option("--batch", topo_batch, "objects per repeat");
  add_seed(topo);

  auto* oracle = app.add_subcommand("oracle", "exact tabular-game checks");
  int oracle_games = 1000, oracle_max_dim = 16;
  std::uint64_t oracle_seed = 0;
  std::string game_path, reward_name = "loglik";
  auto* verify = oracle->add_subcommand("verify", "identity checks over random games");
  verify->add_option("--games", oracle_games, "number of random games");
  verify->add_option("--seed", oracle_seed, "seed");
  verify->add_option("--max-dim", oracle_max_dim, "max |X|, |M|");
  auto* decompose = oracle->add_subcommand("decompose", "decompose a game file");
  decompose->add_option("--game", game_path, "tabular game file")->required();
  decompose->add_option("--reward", reward_name, "loglik | accuracy");
  oracle->require_subcommand(1);

  std::string plot_kind, plot_out;
  std::vector<std::string> plot_csvs;
  auto* plot = app.add_subcommand("plot", "render an SVG chart from CSV logs");
  plot->add_option("--kind", plot_kind, "losses | nstep-sweep | alpha-sweep | toposim-vs-gen")
      ->required();
  plot->add_option("--out", plot_out, "output SVG path")->required();
  plot->add_option("csvs", plot_csvs, "input CSV files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    std::optional<std::uint64_t> seed;
    if (seed_given) seed = seed_value;
    if (train->parsed()) return cmd_train(config_path, seed, out_dir);
    if (sweep->parsed())
      return cmd_sweep(config_path, sweep_param, sweep_values, sweep_seeds, out_dir,
                       sweep_jobs);
    if (probe->parsed()) return cmd_probe(run_dir, checkpoint_path, seed, report_out);
    if (topo->parsed())
      return cmd_toposim(run_dir, checkpoint_path, seed, topo_repeats, topo_batch);
    if (oracle->parsed()) {
      if (verify->parsed()) return cmd_oracle_verify(oracle_games, oracle_seed, oracle_max_dim);
      return cmd_oracle_decompose(game_path, reward_name);
    }
    if (plot->parsed()) {
      render_plot(plot_kind_from_name(plot_kind), plot_csvs, plot_out);
      return kExitOk;
    }
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitOk;
}
