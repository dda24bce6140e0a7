#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "dair/tensor.hpp"

namespace dair {

// Versioned binary snapshot: a header, the resolved experiment config as a
// JSON string, then flat little-endian float64 arrays keyed by stable
// parameter names.
struct Checkpoint {
  std::uint32_t version = 0;
  std::string config_json;
  std::map<std::string, ad::Tensor> tensors;
};

void save_checkpoint(const std::string& path, const std::string& config_json,
                     const std::vector<std::pair<std::string, const ad::Tensor*>>& tensors);

// Throws std::runtime_error on a bad magic, unsupported version or truncated
// payload, naming the file.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace dair
