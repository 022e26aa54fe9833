// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <span>
#include <vector>

namespace rei {

inline constexpr char kCheckpointMagic[4] = {'R', 'E', 'I', 'C'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Raw contents of a checkpoint file.
///
/// Layout: "REIC", u32 version, u64 header length, UTF-8 JSON header,
/// u64 value count, then that many little-endian IEEE-754 doubles.
struct CheckpointBlob {
  nlohmann::json header;
  std::vector<double> payload;
};

void write_checkpoint_file(const std::filesystem::path& path, const nlohmann::json& header,
                           std::span<const double> payload);

/// Throws FormatError on bad magic, unknown version or truncation.
CheckpointBlob read_checkpoint_file(const std::filesystem::path& path);

}  // namespace rei
