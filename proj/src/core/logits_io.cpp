#include "segprop/core/logits_io.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>

namespace segprop {

namespace {

constexpr char kMagic[4] = {'L', 'G', 'T', '1'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t value) {
  for (int i = 0; i < 4; ++i) {
    out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
  }
}

std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t offset) {
  std::uint32_t value = 0;
  for (int i = 0; i < 4; ++i) {
    value |= static_cast<std::uint32_t>(in[offset + i]) << (8 * i);
  }
  return value;
}

}  // namespace

std::vector<std::uint8_t> encode_logits(const Logits& logits) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_u32(out, static_cast<std::uint32_t>(logits.height()));
  put_u32(out, static_cast<std::uint32_t>(logits.width()));
  put_u32(out, static_cast<std::uint32_t>(logits.num_classes()));
  for (double value : logits.data()) {
    put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(value)));
  }
  return out;
}

Logits decode_logits(std::span<const std::uint8_t> bytes,
                     const std::string& source_name) {
  if (bytes.size() < 16) {
    throw FormatError(source_name + ": truncated logits header");
  }
  if (!std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin())) {
    throw FormatError(source_name + ": wrong magic (expected LGT1)");
  }
  const auto h = static_cast<std::int32_t>(get_u32(bytes, 4));
  const auto w = static_cast<std::int32_t>(get_u32(bytes, 8));
  const auto k = static_cast<std::int32_t>(get_u32(bytes, 12));
  if (h < 0 || w < 0 || k < 1) {
    throw FormatError(source_name + ": invalid dimensions");
  }
  const std::size_t count = static_cast<std::size_t>(h) * w * k;
  if (bytes.size() != 16 + count * 4) {
    throw FormatError(source_name + ": payload is " +
                      std::to_string(bytes.size() - 16) + " bytes, expected " +
                      std::to_string(count * 4));
  }
  std::vector<double> data(count);
  for (std::size_t i = 0; i < count; ++i) {
    const float value = std::bit_cast<float>(get_u32(bytes, 16 + 4 * i));
    if (!std::isfinite(value)) {
      throw FormatError(source_name + ": non-finite logit at index " +
                        std::to_string(i));
    }
    data[i] = value;
  }
  return Logits(h, w, k, std::move(data));
}

void save_logits(const Logits& logits, const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = encode_logits(logits);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write logits file " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

Logits load_logits(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open logits file " + path.string());
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in),
                                        std::istreambuf_iterator<char>()};
  return decode_logits(bytes, path.string());
}

}  // namespace segprop
