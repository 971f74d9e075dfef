// tdoatrack: simulate, train, track and evaluate TDOA-vector trackers.

#include "tdoa/csv.hpp"
#include "tdoa/harness.hpp"
#include "tdoa/wav.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

namespace fs = std::filesystem;
using namespace tdoa;

namespace {

struct CommonOptions {
  std::string config;
  std::string preset = "central_walk";
  std::string out;
  std::string variants;
  std::uint64_t seed = 0;
  bool seed_given = false;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config, "Experiment config (JSON)");
  cmd->add_option("--preset", o.preset, "Built-in experiment when no config is given: central_walk or near_mic");
  cmd->add_option("--out", o.out, "Output directory (env TDOA_OUT)");
  cmd->add_option("--variants", o.variants, "Comma-separated variants, e.g. PF-none,NH-root,NH-rand");
  cmd->add_option_function<std::uint64_t>(
      "--seed",
      [&o](const std::uint64_t& s) {
        o.seed = s;
        o.seed_given = true;
      },
      "Global seed (env TDOA_SEED)");
}

// Precedence: command-line flag, then environment, then config file.
harness::ExperimentConfig resolve(const CommonOptions& o) {
  harness::ExperimentConfig cfg;
  if (!o.config.empty()) {
    cfg = harness::load_experiment_config(o.config);
  } else if (o.preset == "central_walk") {
    cfg = harness::central_walk_preset();
  } else if (o.preset == "near_mic") {
    cfg = harness::near_mic_preset();
  } else {
    throw std::invalid_argument("unknown preset '" + o.preset + "'");
  }
  if (const char* env = std::getenv("TDOA_SEED")) cfg.seed = std::stoull(env);
  if (const char* env = std::getenv("TDOA_OUT")) cfg.out_dir = env;
  if (o.seed_given) cfg.seed = o.seed;
  if (!o.out.empty()) cfg.out_dir = o.out;
  if (!o.variants.empty()) cfg.variants = harness::parse_variants(o.variants);
  return cfg;
}

int cmd_simulate(const CommonOptions& o) {
  const auto cfg = resolve(o);
  cfg.validate();
  const auto seq = harness::simulate_observations(cfg);
  harness::write_observations(cfg.out_dir, seq, harness::observation_cache_key(cfg));
  scene::write_trajectory_csv(cfg.out_dir / "trajectory.csv", cfg.scene.path);
  scene::save_scene(cfg.out_dir / "scene.json", cfg.scene);
  std::cout << "simulated " << seq.frames.size() << " frames, " << pair_count(seq.n_mics) << " pairs -> "
            << cfg.out_dir.string() << '\n';
  return 0;
}

int cmd_train(const CommonOptions& o) {
  const auto cfg = resolve(o);
  cfg.validate();
  const auto model = harness::train_model(cfg);
  harness::save_model(cfg, model);
  std::cout << "trained " << manifold::to_string(cfg.tree.split_rule) << "-tree on " << model.training.size()
            << " vectors: " << model.tree->nodes().size() << " nodes, " << model.tree->leaves().size()
            << " leaves -> " << cfg.effective_tree_path().string() << '\n';
  return 0;
}

int cmd_track_wav(const harness::ExperimentConfig& cfg, const std::string& wav_path, const std::string& ckpt_dir) {
  const auto audio = signal::read_wav(wav_path);
  auto frame = cfg.frame;
  frame.sample_rate_hz = audio.sample_rate_hz;
  if (frame.max_delay_samples <= 0) frame.max_delay_samples = scene::max_delay_samples(cfg.scene.array, audio.sample_rate_hz);
  frame.validate();
  const int n_mics = static_cast<int>(audio.channels.size());
  if (pair_count(n_mics) != cfg.scene.array.dimension()) {
    throw std::runtime_error("WAV has " + std::to_string(n_mics) + " channels but the scene has " +
                             std::to_string(cfg.scene.array.size()) + " microphones");
  }
  const auto model = harness::load_model(cfg);

  std::vector<filters::Tracker> trackers;
  for (const auto& v : cfg.variants) {
    auto fc = cfg.filter;
    fc.strategy = v.strategy;
    fc.rng_seed = harness::seed_plan(cfg.seed).trackers;
    trackers.emplace_back(v.kind, fc, cfg.scoring, model.tree, model.training, cfg.init_jitter);
  }

  fs::create_directories(cfg.out_dir);
  std::ofstream out(cfg.out_dir / "predictions.csv");
  out << "frame,time,pair";
  for (const auto& v : cfg.variants) out << ',' << v.name();
  out << '\n';
  const auto pairs = canonical_pairs(n_mics);
  const auto frames = signal::frame_stream(audio.channels, frame);
  for (std::size_t f = 0; f < frames.size(); ++f) {
    filters::Observation peaks;
    for (const auto& corr : signal::correlate_pairs(frames[f], frame)) peaks.push_back(signal::zscore_peaks(corr, cfg.zscore));
    std::vector<TdoaVector> preds;
    for (auto& t : trackers) preds.push_back(t.step(peaks).prediction);
    const double time = (static_cast<double>(frames[f].start) + 0.5 * frame.frame_samples()) / frame.sample_rate_hz;
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      out << f << ',' << csv::format(time) << ',' << pairs[p].i << '-' << pairs[p].j;
      for (const auto& x : preds) out << ',' << csv::format(x[static_cast<Eigen::Index>(p)]);
      out << '\n';
    }
  }
  if (!ckpt_dir.empty()) {
    fs::create_directories(ckpt_dir);
    for (std::size_t v = 0; v < trackers.size(); ++v) {
      trackers[v].save_checkpoint(fs::path(ckpt_dir) / (cfg.variants[v].name() + ".ckpt"));
    }
  }
  std::cout << "tracked " << frames.size() << " frames from " << wav_path << " -> "
            << (cfg.out_dir / "predictions.csv").string() << '\n';
  return 0;
}

int cmd_track(const CommonOptions& o, const std::string& wav_path, const std::string& ckpt_dir) {
  const auto cfg = resolve(o);
  cfg.validate();
  if (!wav_path.empty()) return cmd_track_wav(cfg, wav_path, ckpt_dir);
  if (!fs::exists(cfg.out_dir / "observations.csv")) {
    throw std::runtime_error("no cached observations in " + cfg.out_dir.string() + "; run simulate first");
  }
  const auto seq = harness::read_observations(cfg.out_dir);
  if (seq.frames.empty()) {
    std::cout << "no frames to track\n";
    return 0;
  }
  const auto model = harness::load_model(cfg);
  const auto record = harness::run_tracking(cfg, seq, model);
  const auto report = harness::evaluate(record, cfg.delta);
  harness::emit_csv(record, report, seq, cfg.out_dir);
  std::cout << harness::format_report(report);
  return 0;
}

int cmd_eval(const CommonOptions& o) {
  const auto cfg = resolve(o);
  const auto record = harness::read_track_csv(cfg.out_dir);
  const auto report = harness::evaluate(record, cfg.delta);
  std::cout << harness::format_report(report);
  return 0;
}

int cmd_demo(const CommonOptions& o) {
  const auto cfg = resolve(o);
  cfg.validate();
  fs::create_directories(cfg.out_dir);
  harness::save_model(cfg, harness::train_model(cfg));
  scene::save_scene(cfg.out_dir / "scene.json", cfg.scene);
  const auto result = harness::run_experiment(cfg);
  if (!result.report) {
    std::cout << "trajectory shorter than one frame; nothing tracked\n";
    return 0;
  }
  std::cout << "frames: " << result.record.frame_count() << ", particles: " << cfg.filter.m
            << ", pairs: " << pair_count(result.record.n_mics) << "\n"
            << harness::format_report(*result.report) << "CSV written to " << cfg.out_dir.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"TDOA-vector tracking with manifold-constrained particle filters"};
  app.require_subcommand(1);

  CommonOptions sim_o, train_o, track_o, eval_o, demo_o;
  std::string wav_path, ckpt_dir;

  auto* sim = app.add_subcommand("simulate", "Synthesize and cache observations for the scene path");
  add_common(sim, sim_o);
  auto* train = app.add_subcommand("train-tree", "Generate the training set and build the PD-tree");
  add_common(train, train_o);
  auto* track = app.add_subcommand("track", "Run tracker variants on cached observations or a WAV file");
  add_common(track, track_o);
  track->add_option("--wav", wav_path, "Multi-channel WAV to track instead of cached observations");
  track->add_option("--checkpoint-dir", ckpt_dir, "Write final tracker checkpoints here (WAV mode)");
  auto* eval = app.add_subcommand("eval", "Recompute metrics from tracks.csv");
  add_common(eval, eval_o);
  auto* demo = app.add_subcommand("demo", "Train, simulate, track and evaluate in one go");
  add_common(demo, demo_o);

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return cmd_simulate(sim_o);
    if (train->parsed()) return cmd_train(train_o);
    if (track->parsed()) return cmd_track(track_o, wav_path, ckpt_dir);
    if (eval->parsed()) return cmd_eval(eval_o);
    if (demo->parsed()) return cmd_demo(demo_o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
