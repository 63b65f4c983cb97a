// SPDX-License-Identifier: Apache-2.0
//
// Trajectory preprocessing: order-3 zero-phase Butterworth smoothing and
// linear-interpolation resampling onto a uniform grid.

#pragma once

#include "inekformer/trajectory.hpp"

#include <vector>

namespace ikf {

/// Order-3 low-pass Butterworth (bilinear transform with prewarping)
/// applied forward-backward with odd-reflection edge padding and
/// steady-state initial conditions. DC gain is exactly 1 by construction.
/// Throws std::invalid_argument unless 0 < fc < fs/2.
std::vector<double> butterworth3_lowpass(const std::vector<double>& signal,
                                         double fc, double fs);

/// Direct-form coefficients of the order-3 low-pass (a[0] == 1).
struct Butterworth3 {
  double b[4];
  double a[4];
};
Butterworth3 design_butterworth3(double fc, double fs);

/// Single forward pass with steady-state initial conditions.
std::vector<double> filter_forward(const Butterworth3& f,
                                   const std::vector<double>& signal);

enum class SmoothChannels { kGroundTruth, kAll };

/// Zero-phase smoothing of trajectory channels; quaternions are
/// re-normalized afterwards. Timestamps and (for kGroundTruth) raw sensor
/// channels are untouched.
std::vector<TrajectoryRecord> smooth_trajectory(
    const std::vector<TrajectoryRecord>& records, double fc,
    SmoothChannels channels = SmoothChannels::kGroundTruth);

/// Linear interpolation of every channel onto a uniform f_target grid
/// spanning the input range; quaternions re-normalized. Throws on empty
/// input or non-positive rate.
std::vector<TrajectoryRecord> resample(
    const std::vector<TrajectoryRecord>& records, double f_target);

}  // namespace ikf
