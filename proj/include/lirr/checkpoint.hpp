#pragma once

#include <string>

#include "lirr/models.hpp"

namespace lirr {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary checkpoint: magic "LIRRCKPT", u32 version, u32 config length and the
/// model config as key = value text, u32 tensor count, then per tensor
/// (u32 name length, name, u64 rows, u64 cols, rows*cols little-endian f64).
void save_checkpoint(const LirrModel& model, const std::string& path);
LirrModel load_checkpoint(const std::string& path);

}  // namespace lirr
