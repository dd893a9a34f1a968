#include "lewisim/runner.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "lewisim/checkpoint.hpp"

namespace lewisim {

namespace {

namespace fs = std::filesystem;

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::trunc | std::ios::binary);
    if (!f) throw ConfigError("cannot open for writing: " + path);
    f << content;
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw ConfigError("cannot move into place: " + path);
}

std::string now_iso8601() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string manifest_json(const RunConfig& cfg) {
  char hash_hex[32];
  std::snprintf(hash_hex, sizeof(hash_hex), "%016llx",
                static_cast<unsigned long long>(config_hash(cfg)));
  std::string config_text = dump_config(cfg);
  // Indent the embedded config block.
  std::string indented;
  for (char c : config_text) {
    indented += c;
    if (c == '\n') indented += "  ";
  }
  std::string out = "{\n";
  out += "  \"format\": \"lewisim-manifest v1\",\n";
  out += "  \"config_hash\": \"" + std::string(hash_hex) + "\",\n";
  out += "  \"seed\": " + std::to_string(cfg.seed) + ",\n";
  out += "  \"code_version\": \"lewisim 1.0\",\n";
  out += "  \"platform\": \"" +
#if defined(__linux__)
         std::string("linux")
#elif defined(__APPLE__)
         std::string("macos")
#else
         std::string("other")
#endif
         + "\",\n";
  out += "  \"started_at\": \"" + now_iso8601() + "\",\n";
  out += "  \"conventions\": {\n";
  out += "    \"units\": \"nats\",\n";
  out += "    \"eos\": \"last vocabulary id; content is the pre-EoS prefix\",\n";
  out += "    \"no_eos_within_max_len\": \"message truncated and treated as complete\",\n";
  out += "    \"listener_input\": \"full emitted sequence including EoS\",\n";
  out += "    \"lstm_layer_norm\": \"separate normalization of input and recurrent pre-activation sums\",\n";
  out += "    \"layer_norm_eps\": 1e-5,\n";
  out += "    \"adam_eps\": 1e-8,\n";
  out += "    \"weight_decay\": \"decoupled, scaled by lr\",\n";
  out += "    \"init\": \"weights uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero, gains one\",\n";
  out += "    \"start_token\": \"learned constant initial input embedding\",\n";
  out += "    \"entropy_bonus\": \"per-step entropies of the sampled trajectory\",\n";
  out += "    \"speaker_dropout_site\": \"recurrent output before the vocabulary projection\",\n";
  out += "    \"listener_dropout_site\": \"recurrent output before the attribute heads\",\n";
  out += "    \"alpha_semantics\": \"0.5 uses the plain listener log-likelihood reward; below 0.5 the probe-balanced reward\"\n";
  out += "  },\n";
  out += "  \"config\": " + indented + "\n";
  out += "}\n";
  return out;
}

}  // namespace

std::string summary_csv_header() {
  return "value,seed,status,generalization,toposim,adapt_test,acc_train,acc_test,"
         "best_update";
}

namespace {
std::string fmt_or_empty(double v, bool defined) {
  if (!defined) return "";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}
}  // namespace

std::string summary_csv_row(const std::string& value, std::uint64_t seed,
                            const RunSummary& s) {
  std::string row = value + "," + std::to_string(seed) + ",";
  row += s.failed ? "failed" : "ok";
  row += "," + fmt_or_empty(s.generalization, !s.failed);
  row += "," + fmt_or_empty(s.toposim, !s.failed && s.toposim_defined);
  row += "," + fmt_or_empty(s.adapt_test, !s.failed && s.adapt_defined);
  row += "," + fmt_or_empty(s.acc_train, !s.failed);
  row += "," + fmt_or_empty(s.acc_test, !s.failed);
  row += "," + std::to_string(s.best_update);
  return row;
}

RunSummary execute_run(const RunConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  fs::create_directories(out_dir);
  const std::string dir = out_dir + "/";

  write_file_atomic(dir + "manifest.json", manifest_json(cfg));
  DatasetSplit split = make_split(cfg);
  {
    std::ostringstream ss;
    save_split(split, ss);
    write_file_atomic(dir + "splits.txt", ss.str());
  }

  TrainResult result = run_training(cfg, split);

  std::string csv = metrics_csv_header() + "\n";
  for (const MetricsRow& row : result.log) csv += metrics_csv_row(row) + "\n";
  write_file_atomic(dir + "metrics.csv", csv);

  if (!result.inner_updates.empty()) {
    std::string inner = "speaker_update,inner_updates\n";
    for (std::size_t i = 0; i < result.inner_updates.size(); ++i)
      inner += std::to_string(i + 1) + "," + std::to_string(result.inner_updates[i]) + "\n";
    write_file_atomic(dir + "inner_updates.csv", inner);
  }

  RunSummary summary;
  summary.failed = result.failed;
  summary.failed_update = result.failed_update;
  summary.failure = result.failure;
  if (result.failed) {
    write_file_atomic(dir + "FAILED", "update " + std::to_string(result.failed_update) +
                                          ": " + result.failure + "\n");
    return summary;
  }

  const std::uint64_t hash = config_hash(cfg);
  save_checkpoint(dir + "checkpoint_final.txt", hash, *result.speaker,
                  result.listener.get(), result.disc.get());
  result.restore_best();
  save_checkpoint(dir + "checkpoint_best.txt", hash, *result.speaker,
                  result.listener.get(), result.disc.get());

  summary.best_val_acc = result.best_val_acc;
  summary.best_update = result.best_update;

  // Final language metrics on the selected (best-validation) model.
  NeuralSpeakerSource src(*result.speaker);
  Rng topo_rng = Rng::stream(cfg.seed, "toposim_final");
  TopoSimEstimate topo =
      topographic_similarity(src, topo_rng, cfg.toposim_repeats, cfg.toposim_batch);
  summary.toposim_defined = topo.defined;
  summary.toposim = topo.mean;

  Rng eval_rng = Rng::stream(cfg.seed, "final_eval");
  if (cfg.game == GameKind::kReconstruction) {
    summary.generalization = generalization_score(src, split, cfg.probe, cfg.hidden,
                                                  cfg.reg_listener.layer_norm, cfg.seed,
                                                  /*probe_index=*/900001);
    ProbeTrainResult train_p =
        train_probe(src, &split.train, ProbeDistribution::kTrain, cfg.probe, cfg.hidden,
                    cfg.reg_listener.layer_norm, cfg.seed, 900002);
    ProbeTrainResult full_p =
        train_probe(src, nullptr, ProbeDistribution::kFull, cfg.probe, cfg.hidden,
                    cfg.reg_listener.layer_norm, cfg.seed, 900003);
    ProbeReport rep =
        estimate_decomposition(src, *result.listener, *train_p.listener, *full_p.listener,
                               split, cfg.probe, cfg.seed, 900004);
    rep.train_probe_curve = train_p.curve;
    rep.full_probe_curve = full_p.curve;
    rep.train_stop = train_p.stopping_reason;
    rep.full_stop = full_p.stopping_reason;
    rep.train_probe_updates = train_p.updates;
    rep.full_probe_updates = full_p.updates;
    summary.adapt_test = rep.adapt_test;
    summary.adapt_defined = true;
    std::ostringstream rs;
    save_probe_report(rep, rs);
    write_file_atomic(dir + "probe_report.json", rs.str());

    summary.acc_train = listener_accuracy(src, *result.listener, split.train, eval_rng);
    summary.acc_test = listener_accuracy(src, *result.listener, split.test, eval_rng);
  } else {
    // Discrimination: report trained-pair accuracies from the tail of the log.
    if (!result.log.empty()) {
      summary.acc_train = result.log.back().acc_train;
      summary.acc_test = result.log.back().acc_test;
    }
    summary.generalization = summary.acc_test;
  }

  std::ostringstream sum;
  sum.precision(12);
  sum << "{\n";
  sum << "  \"status\": \"ok\",\n";
  sum << "  \"finished_at\": \"" << now_iso8601() << "\",\n";
  sum << "  \"generalization\": " << summary.generalization << ",\n";
  sum << "  \"toposim\": " << (summary.toposim_defined ? std::to_string(summary.toposim) : "null")
      << ",\n";
  sum << "  \"adapt_test\": " << (summary.adapt_defined ? std::to_string(summary.adapt_test) : "null")
      << ",\n";
  sum << "  \"acc_train\": " << summary.acc_train << ",\n";
  sum << "  \"acc_test\": " << summary.acc_test << ",\n";
  sum << "  \"best_update\": " << summary.best_update << ",\n";
  sum << "  \"best_val_acc\": " << summary.best_val_acc << ",\n";
  sum << "  \"listener_reinits\": " << result.listener_reinits << "\n";
  sum << "}\n";
  write_file_atomic(dir + "final_summary.json", sum.str());
  return summary;
}

}  // namespace lewisim
