// SPDX-License-Identifier: Apache-2.0

#include "inekformer/trajectory.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace ikf {

namespace {

const char* kColumnNames[kTrajectoryColumns] = {
    "t",      "gyro_x",  "gyro_y",  "gyro_z",  "accel_x", "accel_y",
    "accel_z", "h_l_x",  "h_l_y",   "h_l_z",   "h_r_x",   "h_r_y",
    "h_r_z",  "fz_l",    "fz_r",    "gt_qw",   "gt_qx",   "gt_qy",
    "gt_qz",  "gt_v_x",  "gt_v_y",  "gt_v_z",  "gt_p_x",  "gt_p_y",
    "gt_p_z", "gt_c_l_x", "gt_c_l_y", "gt_c_l_z", "gt_c_r_x", "gt_c_r_y",
    "gt_c_r_z"};

}  // namespace

void record_to_array(const TrajectoryRecord& r, double* v) {
  int i = 0;
  v[i++] = r.t;
  for (int k = 0; k < 3; ++k) v[i++] = r.gyro[k];
  for (int k = 0; k < 3; ++k) v[i++] = r.accel[k];
  for (int k = 0; k < 3; ++k) v[i++] = r.h_left[k];
  for (int k = 0; k < 3; ++k) v[i++] = r.h_right[k];
  v[i++] = r.fz_left;
  v[i++] = r.fz_right;
  for (int k = 0; k < 4; ++k) v[i++] = r.quat_wxyz[k];
  for (int k = 0; k < 3; ++k) v[i++] = r.vel[k];
  for (int k = 0; k < 3; ++k) v[i++] = r.pos[k];
  for (int k = 0; k < 3; ++k) v[i++] = r.contact_left[k];
  for (int k = 0; k < 3; ++k) v[i++] = r.contact_right[k];
}

TrajectoryRecord record_from_array(const double* v) {
  TrajectoryRecord r;
  int i = 0;
  r.t = v[i++];
  for (int k = 0; k < 3; ++k) r.gyro[k] = v[i++];
  for (int k = 0; k < 3; ++k) r.accel[k] = v[i++];
  for (int k = 0; k < 3; ++k) r.h_left[k] = v[i++];
  for (int k = 0; k < 3; ++k) r.h_right[k] = v[i++];
  r.fz_left = v[i++];
  r.fz_right = v[i++];
  for (int k = 0; k < 4; ++k) r.quat_wxyz[k] = v[i++];
  for (int k = 0; k < 3; ++k) r.vel[k] = v[i++];
  for (int k = 0; k < 3; ++k) r.pos[k] = v[i++];
  for (int k = 0; k < 3; ++k) r.contact_left[k] = v[i++];
  for (int k = 0; k < 3; ++k) r.contact_right[k] = v[i++];
  return r;
}

namespace {

[[noreturn]] void fail_row(size_t row, const std::string& what) {
  throw std::runtime_error("trajectory: row " + std::to_string(row) + ": " +
                           what);
}

}  // namespace

std::string trajectory_header() {
  std::string h = kColumnNames[0];
  for (int i = 1; i < kTrajectoryColumns; ++i) {
    h += ',';
    h += kColumnNames[i];
  }
  return h;
}

void save_trajectory(const std::vector<TrajectoryRecord>& records,
                     const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os)
    throw std::runtime_error("trajectory: cannot open " + path.string());
  os << kTrajectorySchemaTag << '\n' << trajectory_header() << '\n';

  char buf[40];
  double v[kTrajectoryColumns];
  for (const auto& r : records) {
    record_to_array(r, v);
    for (int i = 0; i < kTrajectoryColumns; ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", v[i]);
      if (i) os << ',';
      os << buf;
    }
    os << '\n';
  }
  if (!os) throw std::runtime_error("trajectory: write failed");
}

std::vector<TrajectoryRecord> load_trajectory(
    const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is)
    throw std::runtime_error("trajectory: cannot open " + path.string());

  std::string line;
  if (!std::getline(is, line) || line != kTrajectorySchemaTag)
    throw std::runtime_error("trajectory: missing schema tag in " +
                             path.string());
  if (!std::getline(is, line) || line != trajectory_header())
    throw std::runtime_error("trajectory: header mismatch in " +
                             path.string());

  std::vector<TrajectoryRecord> records;
  double v[kTrajectoryColumns];
  size_t row = 0;  // data row number, 0-based
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const char* p = line.data();
    const char* end = p + line.size();
    for (int i = 0; i < kTrajectoryColumns; ++i) {
      if (i) {
        if (p >= end || *p != ',') fail_row(row, "expected 31 columns");
        ++p;
      }
      const auto [next, ec] = std::from_chars(p, end, v[i]);
      if (ec != std::errc{}) fail_row(row, "bad number in column " +
                                               std::string(kColumnNames[i]));
      p = next;
    }
    if (p != end) fail_row(row, "trailing characters");

    TrajectoryRecord r = record_from_array(v);
    if (!records.empty() && !(r.t > records.back().t))
      fail_row(row, "non-increasing timestamp");
    if (std::abs(r.quat_wxyz.norm() - 1.0) > 1e-6)
      fail_row(row, "non-unit quaternion");
    records.push_back(r);
    ++row;
  }
  return records;
}

FilterState ground_truth_state(const TrajectoryRecord& r) {
  FilterState x;
  const Eigen::Quaterniond q(r.quat_wxyz[0], r.quat_wxyz[1], r.quat_wxyz[2],
                             r.quat_wxyz[3]);
  x.x.rot = Rotation::from_matrix(q.normalized().toRotationMatrix());
  x.set_vel(r.vel);
  x.set_pos(r.pos);
  x.set_contact_left(r.contact_left);
  x.set_contact_right(r.contact_right);
  x.t = r.t;
  return x;
}

FilterInput filter_input(const TrajectoryRecord& r) {
  FilterInput in;
  in.imu = {r.gyro, r.accel, r.t};
  in.legs = {r.h_left, r.h_right, r.t};
  in.forces = {r.fz_left, r.fz_right};
  in.t = r.t;
  return in;
}

std::vector<FilterInput> filter_inputs(
    const std::vector<TrajectoryRecord>& records) {
  std::vector<FilterInput> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(filter_input(r));
  return out;
}

}  // namespace ikf
