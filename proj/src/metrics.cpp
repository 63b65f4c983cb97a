// SPDX-License-Identifier: Apache-2.0

#include "inekformer/metrics.hpp"

#include <json.hpp>

#include <stdexcept>

namespace ikf {

Vec9 eta(const FilterState& x_est, const FilterState& x_gt) {
  Vec9 e;
  e.head<3>() = so3_log(x_est.rot() * x_gt.rot().inverse());
  e.segment<3>(3) = x_est.vel() - x_gt.vel();
  e.tail<3>() = x_est.pos() - x_gt.pos();
  return e;
}

Vec9 rmse(const std::vector<Vec9>& etas) {
  if (etas.empty()) throw std::invalid_argument("rmse: empty input");
  Vec9 acc = Vec9::Zero();
  for (const auto& e : etas) acc += e.cwiseProduct(e);
  return (acc / static_cast<double>(etas.size())).cwiseSqrt();
}

std::string RunReport::to_json() const {
  nlohmann::json j;
  const char* names[9] = {"phi_x", "phi_y", "phi_z", "v_x", "v_y",
                          "v_z",   "p_x",   "p_y",   "p_z"};
  for (int i = 0; i < 9; ++i) j["rmse"][names[i]] = rmse_per_dim[i];
  j["timing_ms"] = {{"p50", timing_p50_ms},
                    {"p95", timing_p95_ms},
                    {"max", timing_max_ms}};
  j["mode"] = mode;
  j["config_hash"] = config_hash;
  j["propagated_checksum"] = propagated_checksum;
  j["steps"] = steps;
  return j.dump(2);
}

std::uint64_t fnv1a(const void* data, std::size_t bytes, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < bytes; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace ikf
