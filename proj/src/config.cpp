#include "lewisim/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace lewisim {

namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::string& where,
                const std::set<std::string>& allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.count(it.key()))
      throw ConfigError("config: unknown key '" + where + it.key() + "'");
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config: bad value for '") + key + "'");
  }
}

RegularizerConfig parse_reg(const json& obj, const std::string& where) {
  check_keys(obj, where, {"dropout", "weight_decay", "layer_norm"});
  RegularizerConfig reg;
  read(obj, "dropout", reg.dropout);
  read(obj, "weight_decay", reg.weight_decay);
  read(obj, "layer_norm", reg.layer_norm);
  return reg;
}

}  // namespace

RunConfig parse_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config: top level must be an object");
  check_keys(doc, "",
             {"space", "splits", "channel", "model", "optim", "game", "alpha", "regime",
              "regularization", "run", "probe", "toposim"});
  RunConfig cfg;

  if (doc.contains("space")) {
    const json& s = doc["space"];
    check_keys(s, "space.", {"attributes", "values", "cardinalities"});
    int k = 0;
    read(s, "attributes", k);
    if (k < 1) throw ConfigError("config: space.attributes must be >= 1");
    if (s.contains("cardinalities")) {
      std::vector<int> cards;
      read(s, "cardinalities", cards);
      cfg.space = ObjectSpaceSpec(k, cards);
    } else {
      int values = 0;
      read(s, "values", values);
      if (values < 2) throw ConfigError("config: space.values must be >= 2");
      cfg.space = ObjectSpaceSpec::uniform(k, values);
    }
  }
  if (doc.contains("splits")) {
    const json& s = doc["splits"];
    check_keys(s, "splits.", {"train", "val", "test"});
    read(s, "train", cfg.n_train);
    read(s, "val", cfg.n_val);
    read(s, "test", cfg.n_test);
  }
  if (doc.contains("channel")) {
    const json& s = doc["channel"];
    check_keys(s, "channel.", {"vocab", "max_len"});
    read(s, "vocab", cfg.channel.vocab);
    read(s, "max_len", cfg.channel.max_len);
  }
  if (doc.contains("model")) {
    const json& s = doc["model"];
    check_keys(s, "model.", {"hidden"});
    read(s, "hidden", cfg.hidden);
  }
  if (doc.contains("optim")) {
    const json& s = doc["optim"];
    check_keys(s, "optim.", {"lr", "beta1", "beta2", "batch", "entropy_coef"});
    read(s, "lr", cfg.lr);
    read(s, "beta1", cfg.beta1);
    read(s, "beta2", cfg.beta2);
    read(s, "batch", cfg.batch);
    read(s, "entropy_coef", cfg.entropy_coef);
  }
  if (doc.contains("game")) {
    const json& s = doc["game"];
    check_keys(s, "game.", {"kind", "candidates"});
    std::string kind = "reconstruction";
    read(s, "kind", kind);
    if (kind == "reconstruction") {
      cfg.game = GameKind::kReconstruction;
    } else if (kind == "discrimination") {
      cfg.game = GameKind::kDiscrimination;
    } else {
      throw ConfigError("config: game.kind must be 'reconstruction' or 'discrimination'");
    }
    read(s, "candidates", cfg.candidates);
  }
  read(doc, "alpha", cfg.alpha);
  if (doc.contains("regime")) {
    const json& s = doc["regime"];
    check_keys(s, "regime.",
               {"kind", "n_step", "patience", "eval_every", "min_delta", "max_inner"});
    std::string kind = "continuous";
    read(s, "kind", kind);
    if (kind == "continuous") {
      cfg.regime = RegimeKind::kContinuous;
    } else if (kind == "partial") {
      cfg.regime = RegimeKind::kPartial;
    } else if (kind == "early_stopping") {
      cfg.regime = RegimeKind::kEarlyStopping;
    } else {
      throw ConfigError("config: regime.kind must be continuous, partial or early_stopping");
    }
    read(s, "n_step", cfg.n_step);
    read(s, "patience", cfg.es_patience);
    read(s, "eval_every", cfg.es_eval_every);
    read(s, "min_delta", cfg.es_min_delta);
    read(s, "max_inner", cfg.es_max_inner);
  }
  if (doc.contains("regularization")) {
    const json& s = doc["regularization"];
    check_keys(s, "regularization.", {"speaker", "listener"});
    if (s.contains("speaker")) cfg.reg_speaker = parse_reg(s["speaker"], "regularization.speaker.");
    if (s.contains("listener"))
      cfg.reg_listener = parse_reg(s["listener"], "regularization.listener.");
  }
  if (doc.contains("run")) {
    const json& s = doc["run"];
    check_keys(s, "run.", {"seed", "max_speaker_updates", "eval_every"});
    read(s, "seed", cfg.seed);
    read(s, "max_speaker_updates", cfg.max_speaker_updates);
    read(s, "eval_every", cfg.eval_every);
  }
  if (doc.contains("probe")) {
    const json& s = doc["probe"];
    check_keys(s, "probe.",
               {"cadence", "samples", "batch", "eval_every", "patience", "min_delta",
                "max_updates", "eval_samples", "lr"});
    read(s, "cadence", cfg.probe.cadence);
    read(s, "samples", cfg.probe.samples);
    read(s, "batch", cfg.probe.batch);
    read(s, "eval_every", cfg.probe.eval_every);
    read(s, "patience", cfg.probe.patience);
    read(s, "min_delta", cfg.probe.min_delta);
    read(s, "max_updates", cfg.probe.max_updates);
    read(s, "eval_samples", cfg.probe.eval_samples);
    read(s, "lr", cfg.probe.lr);
  }
  if (doc.contains("toposim")) {
    const json& s = doc["toposim"];
    check_keys(s, "toposim.", {"repeats", "batch"});
    read(s, "repeats", cfg.toposim_repeats);
    read(s, "batch", cfg.toposim_batch);
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config: cannot open file: " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

std::string dump_config(const RunConfig& cfg) {
  json doc;
  doc["space"] = {{"attributes", cfg.space.num_attributes},
                  {"cardinalities", cfg.space.cardinalities}};
  doc["splits"] = {{"train", cfg.n_train}, {"val", cfg.n_val}, {"test", cfg.n_test}};
  doc["channel"] = {{"vocab", cfg.channel.vocab}, {"max_len", cfg.channel.max_len}};
  doc["model"] = {{"hidden", cfg.hidden}};
  doc["optim"] = {{"lr", cfg.lr},
                  {"beta1", cfg.beta1},
                  {"beta2", cfg.beta2},
                  {"batch", cfg.batch},
                  {"entropy_coef", cfg.entropy_coef}};
  doc["game"] = {{"kind", cfg.game == GameKind::kReconstruction ? "reconstruction"
                                                                : "discrimination"},
                 {"candidates", cfg.candidates}};
  doc["alpha"] = cfg.alpha;
  json regime = {{"n_step", cfg.n_step},
                 {"patience", cfg.es_patience},
                 {"eval_every", cfg.es_eval_every},
                 {"min_delta", cfg.es_min_delta},
                 {"max_inner", cfg.es_max_inner}};
  regime["kind"] = cfg.regime == RegimeKind::kContinuous     ? "continuous"
                   : cfg.regime == RegimeKind::kPartial      ? "partial"
                                                             : "early_stopping";
  doc["regime"] = regime;
  doc["regularization"] = {
      {"speaker",
       {{"dropout", cfg.reg_speaker.dropout},
        {"weight_decay", cfg.reg_speaker.weight_decay},
        {"layer_norm", cfg.reg_speaker.layer_norm}}},
      {"listener",
       {{"dropout", cfg.reg_listener.dropout},
        {"weight_decay", cfg.reg_listener.weight_decay},
        {"layer_norm", cfg.reg_listener.layer_norm}}}};
  doc["run"] = {{"seed", cfg.seed},
                {"max_speaker_updates", cfg.max_speaker_updates},
                {"eval_every", cfg.eval_every}};
  doc["probe"] = {{"cadence", cfg.probe.cadence},   {"samples", cfg.probe.samples},
                  {"batch", cfg.probe.batch},       {"eval_every", cfg.probe.eval_every},
                  {"patience", cfg.probe.patience}, {"min_delta", cfg.probe.min_delta},
                  {"max_updates", cfg.probe.max_updates},
                  {"eval_samples", cfg.probe.eval_samples},
                  {"lr", cfg.probe.lr}};
  doc["toposim"] = {{"repeats", cfg.toposim_repeats}, {"batch", cfg.toposim_batch}};
  return doc.dump(2);
}

std::uint64_t config_hash(const RunConfig& cfg) {
  const std::string text = dump_config(cfg);
  return fnv1a(text.data(), text.size());
}

void apply_override(std::string& json_text, const std::string& param_path,
                    const std::string& value) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  json* at = &doc;
  std::istringstream path(param_path);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(path, part, '.')) parts.push_back(part);
  if (parts.empty()) throw ConfigError("config: empty parameter path");
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!at->contains(parts[i])) (*at)[parts[i]] = json::object();
    at = &(*at)[parts[i]];
  }
  json parsed_value;
  try {
    parsed_value = json::parse(value);
  } catch (const json::exception&) {
    parsed_value = value;  // plain string
  }
  (*at)[parts.back()] = parsed_value;
  json_text = doc.dump(2);
}

}  // namespace lewisim
