#pragma once

#include <cstdint>
#include <filesystem>

#include "uada/model.hpp"

namespace uada {

inline constexpr char kCheckpointMagic[8] = {'U', 'A', 'D', 'A', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary checkpoint, all integers little-endian:
///   magic "UADACKPT" | u32 version | model spec echo | per-layer weights then biases as
///   f32 in declaration order | u64 FNV-1a checksum of every preceding byte.
/// Spec echo: u32 name length, name bytes, i32 channels/height/width, i32 num_classes,
/// u64 init seed, u32 layer count, then per layer u8 type and i32 in/out/kernel/stride/padding.
void save_checkpoint(const Model& m, const std::filesystem::path& path);

/// Throws FormatError on bad magic, truncation or checksum mismatch (naming the file) and
/// VersionError on an unsupported version.
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace uada
