#pragma once

// Experiment pipeline: simulate observations, train the tree, run tracker
// variants on identical inputs, score them, and write plot-ready CSV.

#include "tdoa/filters.hpp"
#include "tdoa/manifold.hpp"
#include "tdoa/scene.hpp"
#include "tdoa/signal.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace tdoa::harness {

struct Variant {
  filters::FilterKind kind = filters::FilterKind::sir;
  manifold::ProjectionStrategy strategy;

  /// "PF-none", "NH-root", "NH-2", "NH-rand", ...
  std::string name() const;
  static Variant parse(const std::string& s);
};

/// Comma-separated variant names.
std::vector<Variant> parse_variants(const std::string& list);

struct ExperimentConfig {
  scene::Scene scene;
  /// max_delay_samples <= 0 derives the lag range from the array geometry.
  signal::FrameConfig frame{16000.0, 500.0, 25.0, 0};
  signal::ZScoreConfig zscore;
  manifold::TreeConfig tree;
  filters::FilterConfig filter;
  filters::ScoringConfig scoring;
  double init_jitter = 0.0;
  std::vector<Variant> variants;
  std::filesystem::path out_dir = "out";
  /// Empty means <out_dir>/tree.txt and <out_dir>/training.csv.
  std::filesystem::path tree_path;
  std::filesystem::path training_path;
  std::uint64_t seed = 1;
  /// Error bound for the within-delta fraction, samples.
  double delta = 5.0;

  std::filesystem::path effective_tree_path() const;
  std::filesystem::path effective_training_path() const;
  /// Frame config with the sample rate and lag range filled in from the scene.
  signal::FrameConfig effective_frame() const;
  void validate() const;
};

ExperimentConfig load_experiment_config(const std::filesystem::path& path);
ExperimentConfig parse_experiment_config(const std::string& json_text,
                                         const std::filesystem::path& base_dir = {});

/// Slow central walk, 120 frames, PF/NH with and without root projection.
ExperimentConfig central_walk_preset();
/// Walk passing close to the display microphones, NH at depths 0/1/2 and rand.
ExperimentConfig near_mic_preset();

/// Seeds of the independent random streams, all derived from the global seed.
struct SeedPlan {
  std::uint64_t observations;
  std::uint64_t training;
  std::uint64_t tree;
  std::uint64_t trackers;
};
SeedPlan seed_plan(std::uint64_t global_seed);

struct ObservationFrame {
  double time = 0.0;
  TdoaVector truth;
  filters::Observation peaks;
};

struct ObservationSequence {
  int n_mics = 0;
  std::vector<ObservationFrame> frames;
};

/// Synthesizes and peak-picks one observation per frame of the scene path.
ObservationSequence simulate_observations(const ExperimentConfig& cfg);

/// observations.csv (frame, pair, lag, score) + truth.csv + a cache key.
void write_observations(const std::filesystem::path& dir, const ObservationSequence& seq,
                        const std::string& cache_key);
ObservationSequence read_observations(const std::filesystem::path& dir);
/// Key describing everything the observations depend on.
std::string observation_cache_key(const ExperimentConfig& cfg);
/// Loads the cached observations when the key matches, otherwise
/// simulates and writes them.
ObservationSequence cached_observations(const ExperimentConfig& cfg);

struct TrainedModel {
  std::vector<TdoaVector> training;
  std::shared_ptr<const manifold::PdTree> tree;
};

/// Generates the training set, removes outliers, builds the tree.
TrainedModel train_model(const ExperimentConfig& cfg);
void save_model(const ExperimentConfig& cfg, const TrainedModel& model);
/// Loads training set and (when present) tree. Throws if the training set
/// is missing, or the tree is missing and a projecting variant is requested.
TrainedModel load_model(const ExperimentConfig& cfg);

struct VariantTrack {
  std::string name;
  std::vector<TdoaVector> predictions;
  std::vector<int> resampled;
  /// Per frame, particle counts by birth depth; index depth + 1.
  std::vector<std::vector<int>> depth_hist;
  double wall_seconds = 0.0;
};

struct TrackRecord {
  int n_mics = 0;
  int m = 0;
  std::vector<double> times;
  std::vector<TdoaVector> truth;
  std::vector<VariantTrack> variants;

  std::size_t frame_count() const { return times.size(); }
};

/// Runs every variant over the same observations with the same tracker seed.
TrackRecord run_tracking(const ExperimentConfig& cfg, const ObservationSequence& seq,
                         const TrainedModel& model);

struct VariantMetrics {
  std::string name;
  std::vector<double> pair_rmse;
  double median_rmse = 0.0;
  double within_delta = 0.0;
  double mean_resampled = 0.0;
  double wall_per_frame_s = 0.0;
};

struct MetricsReport {
  double delta = 5.0;
  std::vector<VariantMetrics> variants;

  const VariantMetrics& at(const std::string& name) const;
};

/// Throws on a record with zero frames.
MetricsReport evaluate(const TrackRecord& record, double delta = 5.0);

/// tracks.csv, peaks.csv, depths.csv, resamples.csv, metrics.csv.
void emit_csv(const TrackRecord& record, const MetricsReport& report, const ObservationSequence& seq,
              const std::filesystem::path& out_dir);

/// Rebuilds a record (without depth histograms) from tracks.csv and resamples.csv.
TrackRecord read_track_csv(const std::filesystem::path& out_dir);

struct ExperimentResult {
  TrackRecord record;
  std::optional<MetricsReport> report;  // empty for zero-frame runs
};

/// Observations (cached), stored model, every variant, metrics, CSV.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// Human-readable metrics table.
std::string format_report(const MetricsReport& report);

}  // namespace tdoa::harness
