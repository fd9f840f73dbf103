#pragma once

#include <string>
#include <utility>
#include <vector>

#include "lpdet/tensor.hpp"

namespace lpdet {

// Flat weight container (see README for the byte layout): little-endian,
// magic "LPWT", version 1, then per entry a name, a shape, and raw 32-bit
// float values. Values are stored at 32-bit regardless of engine precision.
using NamedParams = std::vector<std::pair<std::string, Tensor>>;

void save_checkpoint(const std::string& path, const NamedParams& params);

// Loads into existing tensors; every name must be present with a matching
// shape, and the file must not carry extras.
void load_checkpoint(const std::string& path, NamedParams& params);

}  // namespace lpdet
