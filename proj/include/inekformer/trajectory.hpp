// SPDX-License-Identifier: Apache-2.0
//
// Versioned trajectory CSV schema: per-row timestamp, IMU, leg kinematics,
// foot forces, and ground truth (orientation quaternion, velocity, position,
// contact positions). Values round-trip bit-exactly.

#pragma once

#include "inekformer/inekf.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace ikf {

struct TrajectoryRecord {
  double t = 0.0;
  Vec3 gyro = Vec3::Zero();
  Vec3 accel = Vec3::Zero();
  Vec3 h_left = Vec3::Zero();
  Vec3 h_right = Vec3::Zero();
  double fz_left = 0.0;
  double fz_right = 0.0;
  Eigen::Vector4d quat_wxyz = Eigen::Vector4d(1, 0, 0, 0);  // ground truth
  Vec3 vel = Vec3::Zero();
  Vec3 pos = Vec3::Zero();
  Vec3 contact_left = Vec3::Zero();
  Vec3 contact_right = Vec3::Zero();
};

/// First file line; bump the suffix when the column set changes.
inline constexpr const char* kTrajectorySchemaTag = "# inekformer-trajectory v1";

inline constexpr int kTrajectoryColumns = 31;

std::string trajectory_header();

/// Flat numeric view in column order (t first). Used by the CSV writer and
/// by channel-wise preprocessing.
void record_to_array(const TrajectoryRecord& r, double* v);
TrajectoryRecord record_from_array(const double* v);

void save_trajectory(const std::vector<TrajectoryRecord>& records,
                     const std::filesystem::path& path);

/// Validates the schema tag, header, strictly increasing t, and unit
/// quaternions (1e-6); errors name the offending row.
std::vector<TrajectoryRecord> load_trajectory(
    const std::filesystem::path& path);

FilterState ground_truth_state(const TrajectoryRecord& r);
FilterInput filter_input(const TrajectoryRecord& r);
std::vector<FilterInput> filter_inputs(
    const std::vector<TrajectoryRecord>& records);

}  // namespace ikf
