#pragma once

#include <string>

#include "lewisim/training.hpp"

namespace lewisim {

// Strict JSON config: unknown keys anywhere are errors, every message names
// the offending field. Absent keys fall back to the defaults in RunConfig.
RunConfig parse_config(const std::string& json_text);
RunConfig load_config_file(const std::string& path);

// Canonical resolved form (sorted keys, fixed formatting); re-parsing it
// reproduces the same RunConfig.
std::string dump_config(const RunConfig& cfg);

// Fingerprint of the resolved config, stored in checkpoints and manifests.
std::uint64_t config_hash(const RunConfig& cfg);

// Applies `--param path --value v` style overrides, e.g. "regime.n_step".
void apply_override(std::string& json_text, const std::string& param_path,
                    const std::string& value);

}  // namespace lewisim
