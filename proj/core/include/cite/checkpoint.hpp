#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cite/encoders.hpp"

namespace cite {

struct Checkpoint {
  DualEncoder model;
  ClassifierW classifier;
  std::uint64_t step = 0;
  /// Hex digest of the configuration that produced the weights.
  std::string fingerprint = "0000000000000000";
};

/// On-disk layout, all integers little-endian:
///   "CITE" | u16 version | u32 header length | header text |
///   f64 arrays (image layers W,b...; text layers W,b...; classifier) |
///   u32 CRC32 of every preceding byte.
inline constexpr std::uint16_t kCheckpointVersion = 1;

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& c);
/// Throws ChecksumMismatch, FormatVersionMismatch or SchemaError.
Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Same encoder/classifier shapes.
bool same_architecture(const Checkpoint& a, const Checkpoint& b);

}  // namespace cite
