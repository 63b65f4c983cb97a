// SPDX-License-Identifier: Apache-2.0
//
// Self-describing binary checkpoint: a JSON header with the architecture
// and a format version, followed by raw little-endian doubles for the
// scaler and every parameter tensor in declared order. Round trips are
// bit-exact.

#pragma once

#include "inekformer/features.hpp"
#include "inekformer/gainformer.hpp"

#include <filesystem>

namespace ikf {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  ModelParams params;
  ScalerParams scaler;
};

void save_checkpoint(const Checkpoint& ckpt,
                     const std::filesystem::path& path);

/// Throws std::runtime_error on a malformed or truncated file.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ikf
