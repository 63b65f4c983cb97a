// SPDX-License-Identifier: Apache-2.0

#include "inekformer/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>

namespace ikf {

namespace {

// Odd-reflection extension about the end samples (scipy-style).
std::vector<double> odd_pad(const std::vector<double>& x, size_t pad) {
  std::vector<double> ext;
  ext.reserve(x.size() + 2 * pad);
  for (size_t i = 0; i < pad; ++i)
    ext.push_back(2.0 * x.front() - x[pad - i]);
  ext.insert(ext.end(), x.begin(), x.end());
  const size_t n = x.size();
  for (size_t i = 0; i < pad; ++i)
    ext.push_back(2.0 * x.back() - x[n - 2 - i]);
  return ext;
}

}  // namespace

Butterworth3 design_butterworth3(double fc, double fs) {
  if (!(fc > 0.0) || !(fc < fs / 2.0))
    throw std::invalid_argument("butterworth: need 0 < fc < fs/2");

  using cd = std::complex<double>;
  // Analog prototype poles (unit cutoff), scaled by the prewarped cutoff.
  const double wc = 2.0 * fs * std::tan(std::numbers::pi * fc / fs);
  const cd proto[3] = {cd(-0.5, std::sqrt(3.0) / 2.0),
                       cd(-0.5, -std::sqrt(3.0) / 2.0), cd(-1.0, 0.0)};

  // Bilinear transform s = 2 fs (z-1)/(z+1).
  cd zp[3];
  for (int i = 0; i < 3; ++i) {
    const cd s = proto[i] * wc / (2.0 * fs);
    zp[i] = (1.0 + s) / (1.0 - s);
  }

  // Denominator polynomial in z from the conjugate pair and the real pole.
  const double c1 = -2.0 * zp[0].real();
  const double c2 = std::norm(zp[0]);
  const double r = zp[2].real();
  Butterworth3 f{};
  f.a[0] = 1.0;
  f.a[1] = c1 - r;
  f.a[2] = c2 - c1 * r;
  f.a[3] = -c2 * r;

  // Zeros at z = -1 (cubed), gain pinned to exact unit DC response.
  const double g = (f.a[0] + f.a[1] + f.a[2] + f.a[3]) / 8.0;
  f.b[0] = g;
  f.b[1] = 3.0 * g;
  f.b[2] = 3.0 * g;
  f.b[3] = g;
  return f;
}

std::vector<double> filter_forward(const Butterworth3& f,
                                   const std::vector<double>& signal) {
  // Direct form II transposed with steady-state initial conditions scaled
  // by the first sample, so a constant input passes through unchanged.
  double z3 = f.b[3] - f.a[3];
  double z2 = f.b[2] + z3 - f.a[2];
  double z1 = f.b[1] + z2 - f.a[1];
  const double x0 = signal.empty() ? 0.0 : signal.front();
  z1 *= x0;
  z2 *= x0;
  z3 *= x0;

  std::vector<double> out(signal.size());
  for (size_t i = 0; i < signal.size(); ++i) {
    const double x = signal[i];
    const double y = f.b[0] * x + z1;
    z1 = f.b[1] * x + z2 - f.a[1] * y;
    z2 = f.b[2] * x + z3 - f.a[2] * y;
    z3 = f.b[3] * x - f.a[3] * y;
    out[i] = y;
  }
  return out;
}

std::vector<double> butterworth3_lowpass(const std::vector<double>& signal,
                                         double fc, double fs) {
  const Butterworth3 f = design_butterworth3(fc, fs);
  if (signal.size() < 2) return signal;

  const size_t pad = std::min<size_t>(12, signal.size() - 1);
  std::vector<double> ext = odd_pad(signal, pad);

  ext = filter_forward(f, ext);
  std::reverse(ext.begin(), ext.end());
  ext = filter_forward(f, ext);
  std::reverse(ext.begin(), ext.end());

  return {ext.begin() + static_cast<std::ptrdiff_t>(pad),
          ext.begin() + static_cast<std::ptrdiff_t>(pad + signal.size())};
}

std::vector<TrajectoryRecord> smooth_trajectory(
    const std::vector<TrajectoryRecord>& records, double fc,
    SmoothChannels channels) {
  if (records.size() < 2) return records;
  const double fs =
      static_cast<double>(records.size() - 1) /
      (records.back().t - records.front().t);

  std::vector<std::vector<double>> table(
      kTrajectoryColumns, std::vector<double>(records.size()));
  double v[kTrajectoryColumns];
  for (size_t i = 0; i < records.size(); ++i) {
    record_to_array(records[i], v);
    for (int c = 0; c < kTrajectoryColumns; ++c) table[c][i] = v[c];
  }

  const int first = channels == SmoothChannels::kAll ? 1 : 15;  // skip t
  for (int c = first; c < kTrajectoryColumns; ++c)
    table[c] = butterworth3_lowpass(table[c], fc, fs);

  std::vector<TrajectoryRecord> out(records.size());
  for (size_t i = 0; i < records.size(); ++i) {
    for (int c = 0; c < kTrajectoryColumns; ++c) v[c] = table[c][i];
    out[i] = record_from_array(v);
    out[i].quat_wxyz.normalize();
  }
  return out;
}

std::vector<TrajectoryRecord> resample(
    const std::vector<TrajectoryRecord>& records, double f_target) {
  if (records.empty()) throw std::invalid_argument("resample: empty input");
  if (!(f_target > 0.0))
    throw std::invalid_argument("resample: rate must be > 0");

  const double t0 = records.front().t;
  const double t_end = records.back().t;
  std::vector<double> ts;
  for (size_t i = 0; i < records.size(); ++i) ts.push_back(records[i].t);

  std::vector<TrajectoryRecord> out;
  double src[kTrajectoryColumns], lo[kTrajectoryColumns],
      hi[kTrajectoryColumns];
  for (size_t k = 0;; ++k) {
    const double t = t0 + static_cast<double>(k) / f_target;
    if (t > t_end + 1e-9) break;

    auto it = std::upper_bound(ts.begin(), ts.end(), t);
    size_t idx = static_cast<size_t>(it - ts.begin());
    if (idx == 0) idx = 1;
    if (idx >= ts.size()) idx = ts.size() - 1;
    double u = (t - ts[idx - 1]) / (ts[idx] - ts[idx - 1]);
    // snap to the node when the grid lands on a source timestamp up to
    // accumulation noise, so aligned resampling copies values exactly
    if (std::abs(u) < 1e-9) u = 0.0;
    if (std::abs(u - 1.0) < 1e-9) u = 1.0;

    record_to_array(records[idx - 1], lo);
    record_to_array(records[idx], hi);
    for (int c = 0; c < kTrajectoryColumns; ++c)
      src[c] = lo[c] + u * (hi[c] - lo[c]);
    TrajectoryRecord r = record_from_array(src);
    r.t = t;
    r.quat_wxyz.normalize();
    out.push_back(r);
  }
  return out;
}

}  // namespace ikf
