// SPDX-License-Identifier: Apache-2.0
//
// CLI for the InEKFormer toolkit: synthetic gait simulation, trajectory
// preprocessing, gain-estimator training, hyperparameter search, filter
// runs, and InEKF-vs-InEKFormer comparison reports.

#include "inekformer/config.hpp"
#include "inekformer/hybrid.hpp"
#include "inekformer/preprocess.hpp"
#include "inekformer/simgait.hpp"
#include "inekformer/training.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace ikf;

namespace {

// Accepts plain numbers and "a/b" fractions (e.g. --dt 1/150).
double parse_rate(const std::string& text) {
  const auto slash = text.find('/');
  if (slash == std::string::npos) return std::stod(text);
  return std::stod(text.substr(0, slash)) / std::stod(text.substr(slash + 1));
}

Config load_config_or_empty(const std::string& path) {
  if (path.empty()) return Config::parse("");
  return Config::load(path);
}

GaitParams gait_from_config(const Config& cfg) {
  GaitParams g;
  g.step_length = cfg.number_or("gait", "step_length", g.step_length);
  g.step_height = cfg.number_or("gait", "step_height", g.step_height);
  g.step_duration = cfg.number_or("gait", "step_duration", g.step_duration);
  g.duty_factor = cfg.number_or("gait", "duty_factor", g.duty_factor);
  g.sway_amplitude =
      cfg.number_or("gait", "sway_amplitude", g.sway_amplitude);
  g.base_height = cfg.number_or("gait", "base_height", g.base_height);
  g.stance_width = cfg.number_or("gait", "stance_width", g.stance_width);
  g.turn_angle = cfg.number_or("gait", "turn_angle", g.turn_angle);
  g.lead_in = cfg.number_or("gait", "lead_in", g.lead_in);
  g.dt_jitter = cfg.number_or("gait", "dt_jitter", g.dt_jitter);
  return g;
}

NoiseParams filter_noise_from_config(const Config& cfg) {
  NoiseParams n;
  auto sigma = [&](const char* key, double fallback) {
    const double s = cfg.number_or("noise", key, fallback);
    return s * s;
  };
  n.gyro_var = Vec3::Constant(sigma("sigma_gyro", 0.01));
  n.accel_var = Vec3::Constant(sigma("sigma_accel", 0.1));
  n.contact_var = sigma("sigma_contact", 0.01);
  n.swing_var = sigma("sigma_swing", 10.0);
  n.obs_var = Vec3::Constant(sigma("sigma_obs", 0.005));
  return n;
}

ModelConfig model_from_config(const Config& cfg) {
  ModelConfig m;
  m.d_model = static_cast<int>(cfg.number_or("model", "d_model", m.d_model));
  m.n_heads = static_cast<int>(cfg.number_or("model", "n_heads", m.n_heads));
  m.n_encoder_layers = static_cast<int>(
      cfg.number_or("model", "n_encoder_layers", m.n_encoder_layers));
  m.n_decoder_layers = static_cast<int>(
      cfg.number_or("model", "n_decoder_layers", m.n_decoder_layers));
  m.d_ff = static_cast<int>(cfg.number_or("model", "d_ff", m.d_ff));
  m.n_history =
      static_cast<int>(cfg.number_or("model", "n_history", m.n_history));
  m.activation = activation_from_string(
      cfg.string_or("model", "activation", to_string(m.activation)));
  m.use_positional_encoding = cfg.bool_or("model", "positional_encoding",
                                          m.use_positional_encoding);
  return m;
}

TrainConfig train_from_config(const Config& cfg) {
  TrainConfig t;
  t.truncation_len = static_cast<int>(
      cfg.number_or("train", "truncation_len", t.truncation_len));
  t.ss.midpoint = cfg.number_or("train", "ss_midpoint", t.ss.midpoint);
  t.ss.steepness = cfg.number_or("train", "ss_steepness", t.ss.steepness);
  t.lr_max = cfg.number_or("train", "lr_max", t.lr_max);
  t.total_steps = static_cast<long>(
      cfg.number_or("train", "total_steps", static_cast<double>(t.total_steps)));
  t.pct_warmup = cfg.number_or("train", "pct_warmup", t.pct_warmup);
  t.adam.beta1 = cfg.number_or("train", "adam_beta1", t.adam.beta1);
  t.adam.beta2 = cfg.number_or("train", "adam_beta2", t.adam.beta2);
  t.adam.eps = cfg.number_or("train", "adam_eps", t.adam.eps);
  t.batch_segments = static_cast<int>(
      cfg.number_or("train", "batch_segments", t.batch_segments));
  t.clip_norm = cfg.number_or("train", "clip_norm", t.clip_norm);
  t.q_low = cfg.number_or("train", "q_low", t.q_low);
  t.q_high = cfg.number_or("train", "q_high", t.q_high);
  t.val_fraction = cfg.number_or("train", "val_fraction", t.val_fraction);
  t.epochs = static_cast<int>(cfg.number_or("train", "epochs", t.epochs));
  t.segment_stride = static_cast<int>(
      cfg.number_or("train", "segment_stride", t.segment_stride));
  return t;
}

std::vector<std::vector<TrajectoryRecord>> load_data_dir(
    const std::string& dir) {
  std::vector<fs::path> paths;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.path().extension() == ".csv") paths.push_back(entry.path());
  std::sort(paths.begin(), paths.end());
  if (paths.empty())
    throw std::runtime_error("no .csv trajectories in " + dir);
  std::vector<std::vector<TrajectoryRecord>> out;
  for (const auto& p : paths) out.push_back(load_trajectory(p));
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path.string());
  os << text;
}

std::string rmse_csv_header() {
  return "filter,phi_x,phi_y,phi_z,v_x,v_y,v_z,p_x,p_y,p_z";
}

std::string rmse_csv_row(const std::string& name, const Vec9& r) {
  char buf[400];
  std::snprintf(buf, sizeof(buf),
                "%s,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g",
                name.c_str(), r[0], r[1], r[2], r[3], r[4], r[5], r[6], r[7],
                r[8]);
  return buf;
}

void write_metrics_csv(const fs::path& path,
                       const std::vector<MetricsRow>& log) {
  std::ofstream os(path);
  os << "step,epoch,lr,eps,train_loss,val_loss\n";
  char buf[256];
  for (const auto& row : log) {
    std::snprintf(buf, sizeof(buf), "%ld,%d,%.9g,%.9g,%.9g,%.9g\n", row.step,
                  row.epoch, row.lr, row.feed_gt_probability, row.train_loss,
                  row.val_loss);
    os << buf;
  }
}

SearchSpace search_space_from_config(const Config& cfg) {
  SearchSpace space;
  for (const auto& name : cfg.sections()) {
    if (name.rfind("param.", 0) != 0) continue;
    SearchParam p;
    p.name = name.substr(6);
    const std::string kind = cfg.string_or(name, "type", "linear");
    if (kind == "log") p.kind = SearchParam::Kind::kLog;
    else if (kind == "linear") p.kind = SearchParam::Kind::kLinear;
    else if (kind == "int") p.kind = SearchParam::Kind::kInt;
    else if (kind == "choice") p.kind = SearchParam::Kind::kChoice;
    else throw std::runtime_error("search space: bad type " + kind);
    p.min = cfg.number_or(name, "min", 0.0);
    p.max = cfg.number_or(name, "max", 1.0);
    if (cfg.has(name, "values"))
      for (const auto& v : cfg.get(name, "values").array)
        p.choices.push_back(v.kind == ConfigValue::Kind::kString ? v.text
                                                                 : v.text);
    space.params.push_back(std::move(p));
  }
  if (space.params.empty())
    throw std::runtime_error("search space: no [param.*] sections");
  return space;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"InEKFormer: contact-aided invariant EKF with a learned "
               "transformer Kalman gain"};
  app.require_subcommand(1);
  // --seed / --config may appear after the subcommand name
  app.fallthrough();

  std::string config_path;
  std::uint64_t seed = 0;
  app.add_option("--config", config_path, "TOML-style config file")
      ->envname("INEKFORMER_CONFIG");
  app.add_option("--seed", seed, "global random seed");

  // simulate
  auto* sim = app.add_subcommand("simulate", "generate a synthetic trajectory");
  std::string motion = "walk", noise_preset = "default", dt_text = "1/150";
  std::string out_path;
  int steps = 12;
  double jitter = 0.0;
  sim->add_option("--motion", motion,
                  "walk | squat | turn | sway | balance");
  sim->add_option("--steps", steps, "number of gait steps");
  sim->add_option("--dt", dt_text, "sample interval, e.g. 1/150");
  sim->add_option("--noise-preset", noise_preset, "default | none");
  sim->add_option("--jitter", jitter, "fractional dt jitter, e.g. 0.2");
  sim->add_option("--out", out_path, "output trajectory CSV")->required();

  // preprocess
  auto* pre = app.add_subcommand("preprocess", "smooth and resample");
  std::string in_path, pre_out;
  double butterworth_fc = 0.0, resample_hz = 0.0;
  std::string smooth_channels = "gt";
  pre->add_option("--in", in_path, "input trajectory CSV")->required();
  pre->add_option("--butterworth-fc", butterworth_fc,
                  "low-pass cutoff in Hz (0: skip)");
  pre->add_option("--channels", smooth_channels,
                  "channels to smooth: gt | all");
  pre->add_option("--resample", resample_hz, "target rate in Hz (0: skip)");
  pre->add_option("--out", pre_out, "output trajectory CSV")->required();

  // train
  auto* train = app.add_subcommand("train", "train the gain estimator");
  std::string data_dir, train_mode = "tf", ckpt_out;
  train->add_option("--data", data_dir, "directory of trajectory CSVs")
      ->required();
  train->add_option("--mode", train_mode, "tf | ar | ss");
  train->add_option("--out", ckpt_out, "checkpoint output directory")
      ->required();

  // search
  auto* search = app.add_subcommand("search", "random hyperparameter search");
  std::string space_path, search_out;
  int trials = 8;
  long budget = 200;
  search->add_option("--space", space_path, "search space TOML")->required();
  search->add_option("--trials", trials, "number of trials");
  search->add_option("--budget", budget, "optimizer steps per trial");
  search->add_option("--data", data_dir, "directory of trajectory CSVs")
      ->required();
  search->add_option("--out", search_out, "trial log CSV")->required();

  // filter
  auto* filt = app.add_subcommand("filter", "run a filter over a trajectory");
  std::string traj_path, ckpt_dir, filter_mode = "ar", report_dir;
  filt->add_option("--traj", traj_path, "trajectory CSV")->required();
  filt->add_option("--ckpt", ckpt_dir,
                   "checkpoint directory (omit for the analytic InEKF)");
  filt->add_option("--mode", filter_mode, "ar | 1a");
  filt->add_option("--report", report_dir, "report output directory")
      ->required();

  // compare
  auto* cmp = app.add_subcommand("compare",
                                 "run InEKF and InEKFormer side by side");
  cmp->add_option("--traj", traj_path, "trajectory CSV")->required();
  cmp->add_option("--ckpt", ckpt_dir, "checkpoint directory")->required();
  cmp->add_option("--report", report_dir, "report output directory")
      ->required();

  CLI11_PARSE(app, argc, argv);
  const Config cfg = load_config_or_empty(config_path);

  if (sim->parsed()) {
    GaitParams gait = gait_from_config(cfg);
    gait.motion = motion_from_string(motion);
    gait.n_steps = steps;
    gait.dt = parse_rate(dt_text);
    gait.dt_jitter = jitter;
    gait.jitter_seed = seed;
    SensorNoise noise;
    if (noise_preset == "default")
      noise = SensorNoise::preset_default(seed);
    else if (noise_preset == "none")
      noise = SensorNoise::none();
    else
      throw std::runtime_error("unknown noise preset: " + noise_preset);
    const double mass = cfg.number_or("gait", "mass", kDefaultRobotMass);
    save_trajectory(synthesize_trajectory(gait, noise, mass), out_path);
    std::cout << "wrote " << out_path << "\n";
    return 0;
  }

  if (pre->parsed()) {
    auto records = load_trajectory(in_path);
    if (butterworth_fc > 0.0)
      records = smooth_trajectory(records, butterworth_fc,
                                  smooth_channels == "all"
                                      ? SmoothChannels::kAll
                                      : SmoothChannels::kGroundTruth);
    if (resample_hz > 0.0) records = resample(records, resample_hz);
    save_trajectory(records, pre_out);
    std::cout << "wrote " << pre_out << " (" << records.size() << " rows)\n";
    return 0;
  }

  if (train->parsed()) {
    const auto data = load_data_dir(data_dir);
    const ModelConfig model_cfg = model_from_config(cfg);
    TrainConfig train_cfg = train_from_config(cfg);
    train_cfg.mode = train_mode_from_string(train_mode);
    train_cfg.seed = seed;
    const NoiseParams noise = filter_noise_from_config(cfg);

    fs::create_directories(ckpt_out);
    const int ckpt_interval = static_cast<int>(
        cfg.number_or("train", "checkpoint_interval_epochs", 0));
    EpochCallback on_epoch;
    if (ckpt_interval > 0) {
      on_epoch = [&](int epoch, const ModelParams& p, const ScalerParams& s) {
        if ((epoch + 1) % ckpt_interval == 0)
          save_checkpoint({p, s}, fs::path(ckpt_out) /
                                      ("model_epoch" + std::to_string(epoch) +
                                       ".ckpt"));
      };
    }

    const TrainResult result =
        train_model(data, model_cfg, train_cfg, noise, on_epoch);
    save_checkpoint({result.params, result.scaler},
                    fs::path(ckpt_out) / "model.ckpt");
    write_metrics_csv(fs::path(ckpt_out) / "metrics.csv", result.log);
    std::cout << "trained " << parameter_count(result.params)
              << " parameters; train_loss=" << result.final_train_loss
              << " val_loss=" << result.final_val_loss << "\n";
    return 0;
  }

  if (search->parsed()) {
    const auto data = load_data_dir(data_dir);
    const Config space_cfg = Config::load(space_path);
    const SearchSpace space = search_space_from_config(space_cfg);
    const SearchResult result = random_search(
        space, trials, budget, data, model_from_config(cfg),
        train_from_config(cfg), filter_noise_from_config(cfg), seed);

    std::ofstream os(search_out);
    os << "trial";
    for (const auto& p : space.params) os << ',' << p.name;
    os << ",val_loss\n";
    for (const auto& t : result.trials) {
      os << t.index;
      for (const auto& p : space.params) os << ',' << t.assignment.at(p.name);
      os << ',' << t.val_loss << '\n';
    }
    std::cout << "best trial " << result.best.index
              << " val_loss=" << result.best.val_loss << "\n";
    return 0;
  }

  if (filt->parsed()) {
    const auto records = load_trajectory(traj_path);
    const NoiseParams noise = filter_noise_from_config(cfg);
    const FilterMode mode = filter_mode_from_string(filter_mode);

    std::optional<Checkpoint> ckpt;
    if (!ckpt_dir.empty())
      ckpt = load_checkpoint(fs::path(ckpt_dir) / "model.ckpt");

    const HybridRunResult result = run_hybrid_filter(
        records, ckpt ? &*ckpt : nullptr, mode, noise);

    fs::create_directories(report_dir);
    write_text(fs::path(report_dir) / "report.json", result.report.to_json());
    write_text(fs::path(report_dir) / "rmse.csv",
               rmse_csv_header() + "\n" +
                   rmse_csv_row(ckpt ? "inekformer" : "inekf",
                                result.report.rmse_per_dim) +
                   "\n");
    write_text(fs::path(report_dir) / "tracks.csv",
               ckpt ? tracks_csv(records, {}, result.estimates)
                    : tracks_csv(records, result.estimates, {}));
    std::cout << rmse_csv_header() << "\n"
              << rmse_csv_row(ckpt ? "inekformer" : "inekf",
                              result.report.rmse_per_dim)
              << "\n";
    return 0;
  }

  if (cmp->parsed()) {
    const auto records = load_trajectory(traj_path);
    const NoiseParams noise = filter_noise_from_config(cfg);
    const Checkpoint ckpt =
        load_checkpoint(fs::path(ckpt_dir) / "model.ckpt");

    const CompareResult result = compare_filters(records, ckpt, noise);
    if (result.inekf.report.propagated_checksum !=
        result.inekformer.report.propagated_checksum)
      throw std::runtime_error("compare: propagated input streams diverged");

    fs::create_directories(report_dir);
    const std::string table = rmse_csv_header() + "\n" +
                              rmse_csv_row("inekf",
                                           result.inekf.report.rmse_per_dim) +
                              "\n" +
                              rmse_csv_row(
                                  "inekformer",
                                  result.inekformer.report.rmse_per_dim) +
                              "\n";
    write_text(fs::path(report_dir) / "rmse.csv", table);
    write_text(fs::path(report_dir) / "tracks.csv",
               tracks_csv(records, result.inekf.estimates,
                          result.inekformer.estimates));
    write_text(fs::path(report_dir) / "inekf_report.json",
               result.inekf.report.to_json());
    write_text(fs::path(report_dir) / "inekformer_report.json",
               result.inekformer.report.to_json());
    std::cout << table;
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
