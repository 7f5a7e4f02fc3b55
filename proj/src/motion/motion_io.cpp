#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "segprop/motion.hpp"

namespace segprop {

namespace {

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

std::vector<std::uint8_t> encode_motion(const MotionField& field) {
  std::vector<std::uint8_t> out;
  out.reserve(12 + field.uv().size() * 4);
  put_u32(out, std::bit_cast<std::uint32_t>(kMotionFileMagic));
  put_u32(out, static_cast<std::uint32_t>(field.width()));
  put_u32(out, static_cast<std::uint32_t>(field.height()));
  for (float value : field.uv()) put_u32(out, std::bit_cast<std::uint32_t>(value));
  return out;
}

MotionField decode_motion(std::span<const std::uint8_t> bytes,
                          const std::string& source_name) {
  if (bytes.size() < 12) {
    throw FormatError(source_name + ": truncated motion header");
  }
  if (get_u32(bytes, 0) != std::bit_cast<std::uint32_t>(kMotionFileMagic)) {
    throw FormatError(source_name + ": wrong magic number");
  }
  const auto width = static_cast<std::int32_t>(get_u32(bytes, 4));
  const auto height = static_cast<std::int32_t>(get_u32(bytes, 8));
  if (width < 0 || height < 0) {
    throw FormatError(source_name + ": negative dimensions");
  }
  const std::size_t values = static_cast<std::size_t>(width) * height * 2;
  if (bytes.size() != 12 + values * 4) {
    throw FormatError(source_name + ": payload is " +
                      std::to_string(bytes.size() - 12) + " bytes, expected " +
                      std::to_string(values * 4));
  }
  std::vector<float> uv(values);
  for (std::size_t i = 0; i < values; ++i) {
    uv[i] = std::bit_cast<float>(get_u32(bytes, 12 + 4 * i));
  }
  try {
    return MotionField(height, width, std::move(uv));
  } catch (const ValidationError& e) {
    throw FormatError(source_name + ": " + e.what());
  }
}

void save_motion(const MotionField& field, const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = encode_motion(field);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write motion file " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

MotionField load_motion(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open motion file " + path.string());
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in),
                                        std::istreambuf_iterator<char>()};
  return decode_motion(bytes, path.string());
}

}  // namespace segprop
