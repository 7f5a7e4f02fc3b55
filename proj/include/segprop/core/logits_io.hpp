#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "segprop/core/types.hpp"

namespace segprop {

// Logits tensor file: ASCII magic "LGT1", little-endian int32 H, W, K, then
// H*W*K float32 values, row-major pixels with the class index fastest.
// Values are widened to double on load; a load/save cycle is bit-exact.
std::vector<std::uint8_t> encode_logits(const Logits& logits);
Logits decode_logits(std::span<const std::uint8_t> bytes,
                     const std::string& source_name = "logits data");

void save_logits(const Logits& logits, const std::filesystem::path& path);
Logits load_logits(const std::filesystem::path& path);

}  // namespace segprop
