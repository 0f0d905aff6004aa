#pragma once

#include <string>
#include <vector>

#include "posellm/params.hpp"

namespace posellm {

// Model checkpoints: a JSON manifest (format version, config hash, name ->
// shape/offset) followed by one flat little-endian float32 blob per
// parameter. save/load round-trips bit-identically at float32 precision.
void save_checkpoint(const std::string& path, const ParamStore& store,
                     const std::string& config_hash);

// Loads values into an already-built store; names and shapes must match
// exactly. expect_config_hash gates compatibility ("" skips the check).
void load_checkpoint(const std::string& path, ParamStore& store,
                     const std::string& expect_config_hash);

// Parameter names recorded in a checkpoint manifest, in file order.
std::vector<std::string> checkpoint_param_names(const std::string& path);

std::string checkpoint_config_hash(const std::string& path);

}  // namespace posellm
