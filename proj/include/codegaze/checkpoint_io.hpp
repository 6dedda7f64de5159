#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "codegaze/tensor.hpp"

namespace codegaze::ckpt {

// Versioned binary container: magic, version, JSON header (config, extras,
// tensor directory), then raw little-endian 64-bit values. A sibling text
// manifest lists tensor names, shapes, and checksums.
void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, nd::Tensor>>& params,
                     const nlohmann::json& config, const nlohmann::json& extra);

struct LoadedCheckpoint {
    std::map<std::string, nd::Tensor> params;
    nlohmann::json config;
    nlohmann::json extra;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

std::string manifest_path(const std::string& checkpoint_path);

std::uint64_t fnv1a(const void* data, std::size_t len);

}  // namespace codegaze::ckpt
