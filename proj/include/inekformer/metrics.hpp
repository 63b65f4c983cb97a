// SPDX-License-Identifier: Apache-2.0
//
// Per-dimension state estimation error and RMSE, matching the evaluation
// columns [phi_x..z (rad), v_x..z (m/s), p_x..z (m)], plus the per-run
// report structure.

#pragma once

#include "inekformer/state.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace ikf {

using Vec9 = Eigen::Matrix<double, 9, 1>;

/// Orientation error is so3_log(R_est * R_gt^T) (right-error convention);
/// velocity and position errors are plain differences.
Vec9 eta(const FilterState& x_est, const FilterState& x_gt);

/// Per-dimension root mean square; throws std::invalid_argument when empty.
Vec9 rmse(const std::vector<Vec9>& etas);

struct RunReport {
  Vec9 rmse_per_dim = Vec9::Zero();
  double timing_p50_ms = 0.0;
  double timing_p95_ms = 0.0;
  double timing_max_ms = 0.0;
  std::string mode;  // "ar" or "1a"
  std::uint64_t config_hash = 0;
  std::uint64_t propagated_checksum = 0;
  std::size_t steps = 0;

  std::string to_json() const;
};

/// FNV-1a over raw bytes; used for the propagated-state stream checksum.
std::uint64_t fnv1a(const void* data, std::size_t bytes,
                    std::uint64_t seed = 1469598103934665603ULL);

}  // namespace ikf
