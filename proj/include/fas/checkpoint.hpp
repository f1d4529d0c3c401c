#pragma once

#include <map>
#include <string>

#include <json.hpp>

#include "fas/tensor.hpp"

namespace fas {

/// Versioned binary container: magic, JSON metadata block (configs, counters,
/// rng state, tensor table), then raw little-endian float32 payload.
struct Checkpoint {
    int format_version = 1;
    nlohmann::json meta;  // configs, step/epoch counters, rng state
    std::map<std::string, Tensor<float>> tensors;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace fas
