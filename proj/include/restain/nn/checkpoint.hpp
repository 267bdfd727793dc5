#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "restain/nn/tensor.hpp"

namespace restain::nn {

// Serialized model state. Records are (name, tensor) pairs in a fixed order;
// values are stored as little-endian f32, so loading rounds doubles to f32.
//
// On-disk layout: magic "RSNM", u32 version, u32 epoch, u32 record count,
// then per record u16 name length + UTF-8 name + u8 rank (always 4) +
// rank u32 dims + f32 payload; finally a CRC32 (zlib polynomial) of every
// preceding byte.
struct Checkpoint {
    std::uint32_t epoch = 0;
    std::vector<std::pair<std::string, Tensor>> records;

    const Tensor& find(const std::string& name) const;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Writes to a temp file in the same directory then renames, so a crash never
// leaves a truncated file at the destination.
void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path);

Checkpoint load_checkpoint(const std::filesystem::path& path);

} // namespace restain::nn
