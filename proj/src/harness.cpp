#include "tdoa/harness.hpp"

#include "tdoa/csv.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <future>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>

namespace tdoa::harness {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string pair_label(const MicPair& p) { return std::to_string(p.i) + "-" + std::to_string(p.j); }

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

void check_written(const std::ofstream& out, const fs::path& path) {
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void apply_frame(signal::FrameConfig& f, const json& j) {
  f.frame_len_ms = j.value("frame_len_ms", f.frame_len_ms);
  f.overlap_ms = j.value("overlap_ms", f.overlap_ms);
  f.max_delay_samples = j.value("max_delay_samples", f.max_delay_samples);
}

}  // namespace

std::string Variant::name() const { return filters::to_string(kind) + "-" + strategy.name(); }

Variant Variant::parse(const std::string& s) {
  const auto dash = s.find('-');
  if (dash == std::string::npos) throw std::invalid_argument("variant '" + s + "' must look like NH-rand");
  return {filters::parse_filter_kind(s.substr(0, dash)), manifold::ProjectionStrategy::parse(s.substr(dash + 1))};
}

std::vector<Variant> parse_variants(const std::string& list) {
  std::vector<Variant> out;
  for (auto item : csv::split(list)) {
    const auto first = item.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    item = item.substr(first, item.find_last_not_of(" \t") - first + 1);
    out.push_back(Variant::parse(item));
  }
  return out;
}

fs::path ExperimentConfig::effective_tree_path() const {
  return tree_path.empty() ? out_dir / "tree.txt" : tree_path;
}

fs::path ExperimentConfig::effective_training_path() const {
  return training_path.empty() ? out_dir / "training.csv" : training_path;
}

signal::FrameConfig ExperimentConfig::effective_frame() const {
  signal::FrameConfig f = frame;
  f.sample_rate_hz = scene.sample_rate_hz;
  if (f.max_delay_samples <= 0) f.max_delay_samples = scene.max_delay_samples();
  return f;
}

void ExperimentConfig::validate() const {
  if (variants.empty()) throw std::invalid_argument("experiment needs at least one variant");
  effective_frame().validate();
  zscore.validate();
  tree.validate(scene.array.dimension());
  filter.validate();
  scoring.validate();
  for (const auto& v : variants) {
    if (v.strategy.mode == manifold::ProjectionStrategy::Mode::fixed_depth && v.strategy.depth > tree.depth) {
      throw std::invalid_argument("variant " + v.name() + " projects deeper than the tree");
    }
  }
  if (!(delta >= 0.0)) throw std::invalid_argument("delta must be >= 0");
}

ExperimentConfig parse_experiment_config(const std::string& json_text, const fs::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("experiment config: ") + e.what());
  }
  ExperimentConfig cfg;
  if (j.contains("preset")) {
    const auto preset = j["preset"].get<std::string>();
    if (preset == "central_walk") {
      cfg = central_walk_preset();
    } else if (preset == "near_mic") {
      cfg = near_mic_preset();
    } else {
      throw std::invalid_argument("unknown preset '" + preset + "'");
    }
  }
  const auto resolve = [&](const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
  };

  if (j.contains("scene")) {
    const auto& s = j["scene"];
    cfg.scene = s.is_string() ? scene::load_scene(resolve(s.get<std::string>())) : scene::parse_scene(s.dump());
  }
  cfg.seed = j.value("seed", cfg.scene.seed);
  if (j.contains("frame")) apply_frame(cfg.frame, j["frame"]);
  if (j.contains("zscore")) {
    cfg.zscore.threshold_c = j["zscore"].value("threshold_c", cfg.zscore.threshold_c);
    cfg.zscore.peak_cap = j["zscore"].value("peak_cap", cfg.zscore.peak_cap);
  }
  if (j.contains("tree")) {
    const auto& t = j["tree"];
    cfg.tree.depth = t.value("depth", cfg.tree.depth);
    cfg.tree.k = t.value("k", cfg.tree.k);
    cfg.tree.min_leaf = t.value("min_leaf", cfg.tree.min_leaf);
    if (t.contains("split_rule")) cfg.tree.split_rule = manifold::parse_split_rule(t["split_rule"].get<std::string>());
  }
  if (j.contains("filter")) {
    const auto& f = j["filter"];
    cfg.filter.m = f.value("m", cfg.filter.m);
    cfg.filter.resample_sigma = f.value("resample_sigma", cfg.filter.resample_sigma);
    cfg.filter.alpha = f.value("alpha", cfg.filter.alpha);
    cfg.init_jitter = f.value("init_jitter", cfg.init_jitter);
  }
  if (j.contains("scoring")) {
    cfg.scoring.z0 = j["scoring"].value("z0", cfg.scoring.z0);
    cfg.scoring.sigma_z_sq = j["scoring"].value("sigma_z_sq", cfg.scoring.sigma_z_sq);
  }
  if (j.contains("variants")) {
    cfg.variants.clear();
    for (const auto& v : j["variants"]) cfg.variants.push_back(Variant::parse(v.get<std::string>()));
  }
  if (j.contains("out")) cfg.out_dir = resolve(j["out"].get<std::string>());
  if (j.contains("tree_path")) cfg.tree_path = resolve(j["tree_path"].get<std::string>());
  if (j.contains("training_path")) cfg.training_path = resolve(j["training_path"].get<std::string>());
  cfg.delta = j.value("delta", cfg.delta);
  return cfg;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_experiment_config(buf.str(), path.parent_path());
}

namespace {

// 120 frames of 500 ms with 25 ms overlap.
constexpr double kCentralDuration = 57.1;
// 360 frames.
constexpr double kNearMicDuration = 171.3;
// Neither filter has a motion model, so the resampling noise alone has to
// cover both the initial search and the source's motion.
constexpr double kPresetResampleSigma = 10.0;

}  // namespace

ExperimentConfig central_walk_preset() {
  ExperimentConfig cfg;
  cfg.scene.path = scene::central_path(kCentralDuration);
  cfg.scene.training_region = {{3.0, 4.0, 1.0}, {7.0, 9.0, 2.0}};
  cfg.scene.observation.spurious_rate = 1.0;
  cfg.scene.observation.miss_prob = 0.05;
  cfg.filter.resample_sigma = kPresetResampleSigma;
  cfg.variants = parse_variants("PF-none,PF-root,NH-none,NH-root");
  cfg.seed = 2010;
  cfg.scene.seed = cfg.seed;
  return cfg;
}

ExperimentConfig near_mic_preset() {
  ExperimentConfig cfg;
  cfg.scene.path = scene::near_mic_path(kNearMicDuration);
  // Standing area in front of the display.
  cfg.scene.training_region = {{4.0, 0.8, 1.0}, {7.0, 4.0, 2.0}};
  cfg.scene.observation.spurious_rate = 1.0;
  cfg.scene.observation.miss_prob = 0.05;
  cfg.filter.resample_sigma = kPresetResampleSigma;
  cfg.variants = parse_variants("NH-root,NH-1,NH-2,NH-rand");
  cfg.seed = 2010;
  cfg.scene.seed = cfg.seed;
  return cfg;
}

SeedPlan seed_plan(std::uint64_t global_seed) {
  return {derive_seed(global_seed, 1), derive_seed(global_seed, 2), derive_seed(global_seed, 3),
          derive_seed(global_seed, 4)};
}

ObservationSequence simulate_observations(const ExperimentConfig& cfg) {
  const auto frame = cfg.effective_frame();
  frame.validate();
  const auto seeds = seed_plan(cfg.seed);
  ObservationSequence seq;
  seq.n_mics = cfg.scene.array.size();
  const auto times = scene::frame_times(cfg.scene.path, frame);
  for (std::size_t f = 0; f < times.size(); ++f) {
    ObservationFrame of;
    of.time = times[f];
    of.truth = scene::tdoa_of(cfg.scene.path.at(times[f]), cfg.scene.array, cfg.scene.sample_rate_hz);
    const auto synth = scene::synth_observation(of.truth, cfg.scene.observation, frame.max_delay_samples,
                                                derive_seed(seeds.observations, f));
    for (const auto& corr : synth.pairs) of.peaks.push_back(signal::zscore_peaks(corr, cfg.zscore));
    seq.frames.push_back(std::move(of));
  }
  return seq;
}

std::string observation_cache_key(const ExperimentConfig& cfg) {
  const auto f = cfg.effective_frame();
  json j;
  j["scene"] = json::parse(scene::scene_to_json(cfg.scene));
  j["frame"] = {f.sample_rate_hz, f.frame_len_ms, f.overlap_ms, f.max_delay_samples};
  j["zscore"] = {cfg.zscore.threshold_c, cfg.zscore.peak_cap};
  j["seed"] = cfg.seed;
  return j.dump();
}

void write_observations(const fs::path& dir, const ObservationSequence& seq, const std::string& cache_key) {
  fs::create_directories(dir);
  {
    const auto path = dir / "observations.csv";
    auto out = open_out(path);
    out << "frame,pair,lag,score\n";
    for (std::size_t f = 0; f < seq.frames.size(); ++f) {
      for (const auto& ps : seq.frames[f].peaks) {
        for (const auto& pk : ps.peaks) {
          out << f << ',' << pair_label(ps.pair) << ',' << pk.lag << ',' << csv::format(pk.score) << '\n';
        }
      }
    }
    check_written(out, path);
  }
  {
    const auto path = dir / "truth.csv";
    auto out = open_out(path);
    out << "frame,time";
    for (const auto& p : canonical_pairs(seq.n_mics)) out << ",d_" << p.i << '_' << p.j;
    out << '\n';
    for (std::size_t f = 0; f < seq.frames.size(); ++f) {
      out << f << ',' << csv::format(seq.frames[f].time);
      for (Eigen::Index k = 0; k < seq.frames[f].truth.size(); ++k) out << ',' << csv::format(seq.frames[f].truth[k]);
      out << '\n';
    }
    check_written(out, path);
  }
  {
    const auto path = dir / "observations.key";
    auto out = open_out(path);
    out << cache_key << '\n';
    check_written(out, path);
  }
}

ObservationSequence read_observations(const fs::path& dir) {
  const auto truth = csv::read(dir / "truth.csv");
  if (truth.header.size() < 3) throw std::runtime_error("truth.csv: no pair columns");
  ObservationSequence seq;
  seq.n_mics = mics_for_dimension(static_cast<int>(truth.header.size()) - 2);
  const auto pairs = canonical_pairs(seq.n_mics);
  for (const auto& row : truth.rows) {
    ObservationFrame f;
    if (csv::to_int(row[0]) != static_cast<long long>(seq.frames.size())) {
      throw std::runtime_error("truth.csv: frames out of order");
    }
    f.time = csv::to_double(row[1]);
    f.truth.resize(static_cast<Eigen::Index>(pairs.size()));
    for (std::size_t k = 0; k < pairs.size(); ++k) f.truth[static_cast<Eigen::Index>(k)] = csv::to_double(row[k + 2]);
    for (const auto& p : pairs) f.peaks.push_back({p, {}});
    seq.frames.push_back(std::move(f));
  }

  std::map<std::string, std::size_t> pair_lookup;
  for (std::size_t k = 0; k < pairs.size(); ++k) pair_lookup[pair_label(pairs[k])] = k;
  const auto obs = csv::read(dir / "observations.csv");
  const auto cf = obs.column("frame"), cp = obs.column("pair"), cl = obs.column("lag"), cs = obs.column("score");
  for (const auto& row : obs.rows) {
    const auto f = static_cast<std::size_t>(csv::to_int(row[cf]));
    const auto it = pair_lookup.find(row[cp]);
    if (f >= seq.frames.size() || it == pair_lookup.end()) throw std::runtime_error("observations.csv: bad frame or pair");
    seq.frames[f].peaks[it->second].peaks.push_back(
        {static_cast<int>(csv::to_int(row[cl])), csv::to_double(row[cs])});
  }
  return seq;
}

ObservationSequence cached_observations(const ExperimentConfig& cfg) {
  const auto key = observation_cache_key(cfg);
  const auto key_path = cfg.out_dir / "observations.key";
  if (fs::exists(key_path) && fs::exists(cfg.out_dir / "observations.csv") && fs::exists(cfg.out_dir / "truth.csv")) {
    std::ifstream in(key_path);
    std::string stored;
    std::getline(in, stored);
    if (stored == key) return read_observations(cfg.out_dir);
  }
  auto seq = simulate_observations(cfg);
  write_observations(cfg.out_dir, seq, key);
  // Reload so every run, fresh or cached, tracks the exact same parsed values.
  return read_observations(cfg.out_dir);
}

TrainedModel train_model(const ExperimentConfig& cfg) {
  const auto seeds = seed_plan(cfg.seed);
  const auto& sc = cfg.scene;
  auto raw = scene::generate_training_set(sc.array, sc.training_region, sc.training_count, sc.sample_rate_hz,
                                          seeds.training);
  TrainedModel model;
  model.training = scene::remove_outliers(raw, sc.array.size());
  model.tree = std::make_shared<const manifold::PdTree>(manifold::PdTree::build(model.training, cfg.tree, seeds.tree));
  return model;
}

void save_model(const ExperimentConfig& cfg, const TrainedModel& model) {
  const auto training = cfg.effective_training_path();
  const auto tree = cfg.effective_tree_path();
  if (training.has_parent_path()) fs::create_directories(training.parent_path());
  if (tree.has_parent_path()) fs::create_directories(tree.parent_path());
  scene::write_vectors_csv(training, model.training, cfg.scene.array.size());
  model.tree->save(tree);
}

TrainedModel load_model(const ExperimentConfig& cfg) {
  const auto training = cfg.effective_training_path();
  const auto tree = cfg.effective_tree_path();
  if (!fs::exists(training)) {
    throw std::runtime_error("training set " + training.string() + " not found; run train-tree first");
  }
  TrainedModel model;
  model.training = scene::read_vectors_csv(training);
  if (fs::exists(tree)) {
    model.tree = std::make_shared<const manifold::PdTree>(manifold::PdTree::load(tree));
  } else {
    for (const auto& v : cfg.variants) {
      if (v.strategy.projects()) {
        throw std::runtime_error("variant " + v.name() + " needs tree " + tree.string() + "; run train-tree first");
      }
    }
  }
  return model;
}

TrackRecord run_tracking(const ExperimentConfig& cfg, const ObservationSequence& seq, const TrainedModel& model) {
  TrackRecord rec;
  rec.n_mics = seq.n_mics;
  rec.m = cfg.filter.m;
  for (const auto& f : seq.frames) {
    rec.times.push_back(f.time);
    rec.truth.push_back(f.truth);
  }
  const auto seeds = seed_plan(cfg.seed);

  auto run_one = [&](const Variant& v) {
    VariantTrack track;
    track.name = v.name();
    filters::FilterConfig fc = cfg.filter;
    fc.strategy = v.strategy;
    fc.rng_seed = seeds.trackers;
    const auto start = std::chrono::steady_clock::now();
    filters::Tracker tracker(v.kind, fc, cfg.scoring, model.tree, model.training, cfg.init_jitter);
    for (const auto& frame : seq.frames) {
      auto r = tracker.step(frame.peaks);
      track.predictions.push_back(std::move(r.prediction));
      track.resampled.push_back(r.resampled);
      track.depth_hist.push_back(tracker.depth_histogram());
    }
    track.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return track;
  };

  std::vector<std::future<VariantTrack>> jobs;
  for (const auto& v : cfg.variants) jobs.push_back(std::async(std::launch::async, run_one, v));
  for (auto& j : jobs) rec.variants.push_back(j.get());
  return rec;
}

const VariantMetrics& MetricsReport::at(const std::string& name) const {
  for (const auto& v : variants) {
    if (v.name == name) return v;
  }
  throw std::out_of_range("no metrics for variant " + name);
}

MetricsReport evaluate(const TrackRecord& record, double delta) {
  const std::size_t frames = record.frame_count();
  if (frames == 0) throw std::invalid_argument("evaluate: no frames");
  MetricsReport report;
  report.delta = delta;
  for (const auto& v : record.variants) {
    if (v.predictions.size() != frames) throw std::invalid_argument("evaluate: variant frame count mismatch");
    VariantMetrics m;
    m.name = v.name;
    const Eigen::Index d = record.truth.front().size();
    Eigen::VectorXd sq = Eigen::VectorXd::Zero(d);
    std::size_t within = 0;
    for (std::size_t f = 0; f < frames; ++f) {
      const Eigen::VectorXd err = v.predictions[f] - record.truth[f];
      sq += err.cwiseAbs2();
      if (err.cwiseAbs().maxCoeff() <= delta) ++within;
    }
    sq /= static_cast<double>(frames);
    for (Eigen::Index k = 0; k < d; ++k) m.pair_rmse.push_back(std::sqrt(sq[k]));
    m.median_rmse = median_of(m.pair_rmse);
    m.within_delta = static_cast<double>(within) / static_cast<double>(frames);
    double resampled = 0.0;
    for (int r : v.resampled) resampled += r;
    m.mean_resampled = v.resampled.empty() ? 0.0 : resampled / static_cast<double>(v.resampled.size());
    m.wall_per_frame_s = v.wall_seconds / static_cast<double>(frames);
    report.variants.push_back(std::move(m));
  }
  return report;
}

void emit_csv(const TrackRecord& record, const MetricsReport& report, const ObservationSequence& seq,
              const fs::path& out_dir) {
  if (record.frame_count() == 0) throw std::invalid_argument("emit_csv: no frames");
  fs::create_directories(out_dir);
  const auto pairs = canonical_pairs(record.n_mics);

  {
    const auto path = out_dir / "tracks.csv";
    auto out = open_out(path);
    out << "frame,pair,truth";
    for (const auto& v : record.variants) out << ',' << v.name;
    out << '\n';
    for (std::size_t f = 0; f < record.frame_count(); ++f) {
      for (std::size_t p = 0; p < pairs.size(); ++p) {
        const auto k = static_cast<Eigen::Index>(p);
        out << f << ',' << pair_label(pairs[p]) << ',' << csv::format(record.truth[f][k]);
        for (const auto& v : record.variants) out << ',' << csv::format(v.predictions[f][k]);
        out << '\n';
      }
    }
    check_written(out, path);
  }
  {
    const auto path = out_dir / "peaks.csv";
    auto out = open_out(path);
    out << "frame,pair,lag,score\n";
    for (std::size_t f = 0; f < seq.frames.size(); ++f) {
      for (const auto& ps : seq.frames[f].peaks) {
        for (const auto& pk : ps.peaks) {
          out << f << ',' << pair_label(ps.pair) << ',' << pk.lag << ',' << csv::format(pk.score) << '\n';
        }
      }
    }
    check_written(out, path);
  }
  {
    const auto path = out_dir / "depths.csv";
    auto out = open_out(path);
    out << "frame,variant,depth,count\n";
    for (std::size_t f = 0; f < record.frame_count(); ++f) {
      for (const auto& v : record.variants) {
        if (v.depth_hist.empty()) continue;
        const auto& h = v.depth_hist[f];
        for (std::size_t d = 0; d < h.size(); ++d) {
          out << f << ',' << v.name << ',' << static_cast<int>(d) - 1 << ',' << h[d] << '\n';
        }
      }
    }
    check_written(out, path);
  }
  {
    const auto path = out_dir / "resamples.csv";
    auto out = open_out(path);
    out << "frame,variant,resampled\n";
    for (std::size_t f = 0; f < record.frame_count(); ++f) {
      for (const auto& v : record.variants) out << f << ',' << v.name << ',' << v.resampled.at(f) << '\n';
    }
    check_written(out, path);
  }
  {
    const auto path = out_dir / "metrics.csv";
    auto out = open_out(path);
    out << "variant,median_rmse,within_delta,delta,mean_resampled";
    for (const auto& p : pairs) out << ",rmse_" << pair_label(p);
    out << '\n';
    for (const auto& m : report.variants) {
      out << m.name << ',' << csv::format(m.median_rmse) << ',' << csv::format(m.within_delta) << ','
          << csv::format(report.delta) << ',' << csv::format(m.mean_resampled);
      for (double r : m.pair_rmse) out << ',' << csv::format(r);
      out << '\n';
    }
    check_written(out, path);
  }
}

TrackRecord read_track_csv(const fs::path& out_dir) {
  const auto tracks = csv::read(out_dir / "tracks.csv");
  if (tracks.header.size() < 4) throw std::runtime_error("tracks.csv: no variant columns");
  TrackRecord rec;
  const std::size_t nv = tracks.header.size() - 3;
  for (std::size_t v = 0; v < nv; ++v) rec.variants.push_back({tracks.header[v + 3], {}, {}, {}, 0.0});

  // Rows are frame-major, pairs in canonical order.
  std::size_t d = 0;
  while (d < tracks.rows.size() && tracks.rows[d][0] == tracks.rows[0][0]) ++d;
  if (d == 0 || tracks.rows.size() % d != 0) throw std::runtime_error("tracks.csv: ragged frames");
  rec.n_mics = mics_for_dimension(static_cast<int>(d));
  const std::size_t frames = tracks.rows.size() / d;
  for (std::size_t f = 0; f < frames; ++f) {
    TdoaVector truth(static_cast<Eigen::Index>(d));
    std::vector<TdoaVector> preds(nv, TdoaVector(static_cast<Eigen::Index>(d)));
    for (std::size_t p = 0; p < d; ++p) {
      const auto& row = tracks.rows[f * d + p];
      if (static_cast<std::size_t>(csv::to_int(row[0])) != f) throw std::runtime_error("tracks.csv: frames out of order");
      truth[static_cast<Eigen::Index>(p)] = csv::to_double(row[2]);
      for (std::size_t v = 0; v < nv; ++v) preds[v][static_cast<Eigen::Index>(p)] = csv::to_double(row[v + 3]);
    }
    rec.times.push_back(static_cast<double>(f));
    rec.truth.push_back(std::move(truth));
    for (std::size_t v = 0; v < nv; ++v) rec.variants[v].predictions.push_back(std::move(preds[v]));
  }

  const auto res_path = out_dir / "resamples.csv";
  if (fs::exists(res_path)) {
    const auto res = csv::read(res_path);
    const auto cv = res.column("variant"), cr = res.column("resampled");
    for (auto& v : rec.variants) v.resampled.assign(frames, 0);
    for (const auto& row : res.rows) {
      const auto f = static_cast<std::size_t>(csv::to_int(row[0]));
      for (auto& v : rec.variants) {
        if (v.name == row[cv] && f < frames) v.resampled[f] = static_cast<int>(csv::to_int(row[cr]));
      }
    }
  }
  return rec;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  fs::create_directories(cfg.out_dir);
  const auto seq = cached_observations(cfg);
  ExperimentResult result;
  if (seq.frames.empty()) {
    result.record.n_mics = seq.n_mics;
    result.record.m = cfg.filter.m;
    for (const auto& v : cfg.variants) result.record.variants.push_back({v.name(), {}, {}, {}, 0.0});
    return result;
  }
  const auto model = load_model(cfg);
  result.record = run_tracking(cfg, seq, model);
  result.report = evaluate(result.record, cfg.delta);
  emit_csv(result.record, *result.report, seq, cfg.out_dir);

  // Wall-clock is machine dependent, so it stays out of the CSV outputs.
  json timing;
  for (const auto& m : result.report->variants) timing[m.name] = m.wall_per_frame_s;
  auto out = open_out(cfg.out_dir / "timing.json");
  out << timing.dump(2) << '\n';
  return result;
}

std::string format_report(const MetricsReport& report) {
  std::ostringstream out;
  out << std::left << std::setw(12) << "variant" << std::right << std::setw(14) << "median_rmse" << std::setw(14)
      << "within_delta" << std::setw(16) << "mean_resampled" << std::setw(14) << "ms/frame" << '\n';
  out << std::fixed;
  for (const auto& m : report.variants) {
    out << std::left << std::setw(12) << m.name << std::right << std::setprecision(3) << std::setw(14)
        << m.median_rmse << std::setw(14) << m.within_delta << std::setw(16) << std::setprecision(2)
        << m.mean_resampled << std::setw(14) << std::setprecision(3) << 1000.0 * m.wall_per_frame_s << '\n';
  }
  return out.str();
}

}  // namespace tdoa::harness
