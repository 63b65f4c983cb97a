// SPDX-License-Identifier: Apache-2.0

#include "inekformer/checkpoint.hpp"

#include <json.hpp>

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace ikf {

namespace {

constexpr char kMagic[8] = {'I', 'K', 'F', 'C', 'K', 'P', 'T', '1'};

void write_doubles(std::ostream& os, const double* data, std::size_t n) {
  os.write(reinterpret_cast<const char*>(data),
           static_cast<std::streamsize>(n * sizeof(double)));
}

void read_doubles(std::istream& is, double* data, std::size_t n) {
  is.read(reinterpret_cast<char*>(data),
          static_cast<std::streamsize>(n * sizeof(double)));
  if (!is) throw std::runtime_error("checkpoint: truncated tensor data");
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt,
                     const std::filesystem::path& path) {
  const ModelConfig& c = ckpt.params.config;
  nlohmann::json header = {
      {"format_version", kCheckpointVersion},
      {"d_model", c.d_model},
      {"n_heads", c.n_heads},
      {"n_encoder_layers", c.n_encoder_layers},
      {"n_decoder_layers", c.n_decoder_layers},
      {"d_ff", c.d_ff},
      {"n_history", c.n_history},
      {"activation", to_string(c.activation)},
      {"use_positional_encoding", c.use_positional_encoding},
      {"parameter_count", parameter_count(ckpt.params)},
      {"scaler_dims", kScaledFeatureDim},
  };
  const std::string header_str = header.dump();

  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("checkpoint: cannot open " + path.string());
  os.write(kMagic, sizeof(kMagic));
  const auto len = static_cast<std::uint32_t>(header_str.size());
  os.write(reinterpret_cast<const char*>(&len), sizeof(len));
  os.write(header_str.data(), static_cast<std::streamsize>(len));

  write_doubles(os, &ckpt.scaler.q_low, 1);
  write_doubles(os, &ckpt.scaler.q_high, 1);
  write_doubles(os, ckpt.scaler.center.data(), kScaledFeatureDim);
  write_doubles(os, ckpt.scaler.scale.data(), kScaledFeatureDim);

  auto& params = const_cast<ModelParams&>(ckpt.params);
  for (const auto& view : tensor_views(params))
    write_doubles(os, view.data, static_cast<std::size_t>(view.size));
  if (!os) throw std::runtime_error("checkpoint: write failed");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open " + path.string());

  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path.string());

  std::uint32_t len = 0;
  is.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string header_str(len, '\0');
  is.read(header_str.data(), static_cast<std::streamsize>(len));
  if (!is) throw std::runtime_error("checkpoint: truncated header");

  const auto header = nlohmann::json::parse(header_str);
  if (header.at("format_version").get<int>() != kCheckpointVersion)
    throw std::runtime_error("checkpoint: unsupported format version");
  if (header.at("scaler_dims").get<int>() != kScaledFeatureDim)
    throw std::runtime_error("checkpoint: scaler dimension mismatch");

  ModelConfig config;
  config.d_model = header.at("d_model").get<int>();
  config.n_heads = header.at("n_heads").get<int>();
  config.n_encoder_layers = header.at("n_encoder_layers").get<int>();
  config.n_decoder_layers = header.at("n_decoder_layers").get<int>();
  config.d_ff = header.at("d_ff").get<int>();
  config.n_history = header.at("n_history").get<int>();
  config.activation =
      activation_from_string(header.at("activation").get<std::string>());
  config.use_positional_encoding =
      header.at("use_positional_encoding").get<bool>();

  Checkpoint ckpt;
  ckpt.params = init_params(config, 0);
  read_doubles(is, &ckpt.scaler.q_low, 1);
  read_doubles(is, &ckpt.scaler.q_high, 1);
  read_doubles(is, ckpt.scaler.center.data(), kScaledFeatureDim);
  read_doubles(is, ckpt.scaler.scale.data(), kScaledFeatureDim);

  for (const auto& view : tensor_views(ckpt.params))
    read_doubles(is, view.data, static_cast<std::size_t>(view.size));

  const auto declared = header.at("parameter_count").get<std::size_t>();
  if (declared != parameter_count(ckpt.params))
    throw std::runtime_error("checkpoint: parameter count mismatch");
  return ckpt;
}

}  // namespace ikf
