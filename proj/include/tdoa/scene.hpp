#pragma once

// Synthetic ground truth: array geometry, source paths, ideal delay
// vectors and correlation-space observations.

#include "tdoa/pairs.hpp"
#include "tdoa/signal.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace tdoa::scene {

using Point = Eigen::Vector3d;

struct MicArray {
  std::vector<Point> positions;
  double speed_of_sound = 343.0;

  int size() const { return static_cast<int>(positions.size()); }
  int dimension() const { return pair_count(size()); }
  double max_pairwise_distance() const;
  void validate() const;
};

/// Axis-aligned box [lo, hi].
struct Box {
  Point lo = Point::Zero();
  Point hi = Point::Zero();

  void validate() const;
};

/// Seven microphones in a 10 x 13 x 5 m room: four at the corners of a
/// wall-mounted display (wall y = 0) and three on the ceiling.
MicArray default_array();
Box default_room();
/// Where people stand or sit while facing the display.
Box default_training_region();

struct Waypoint {
  double t = 0.0;
  Point p = Point::Zero();
};

/// Piecewise-linear path through time-stamped waypoints.
class Trajectory {
 public:
  Trajectory() = default;
  explicit Trajectory(std::vector<Waypoint> waypoints);

  const std::vector<Waypoint>& waypoints() const { return waypoints_; }
  bool empty() const { return waypoints_.empty(); }
  double start_time() const;
  double end_time() const;
  double duration() const { return empty() ? 0.0 : end_time() - start_time(); }

  /// Position at time t; times outside the span clamp to the endpoints.
  Point at(double t) const;

 private:
  std::vector<Waypoint> waypoints_;
};

std::vector<Point> sample_trajectory(const Trajectory& traj, std::span<const double> times);

/// Center times of every full frame inside the trajectory span.
std::vector<double> frame_times(const Trajectory& traj, const signal::FrameConfig& frame);

struct ObservationModel {
  double true_peak_amp = 1.0;
  /// Expected spurious peaks per pair per frame (Poisson).
  double spurious_rate = 1.0;
  double spurious_amp_low = 0.3;
  double spurious_amp_high = 1.0;
  /// Probability the true peak is absent from a pair's correlation.
  double miss_prob = 0.05;
  /// Std of the Gaussian background added to every lag.
  double noise_floor_sigma = 0.05;

  void validate() const;
};

/// Ideal delays (|m_i - s| - |m_j - s|) / c * rate for every canonical pair.
TdoaVector tdoa_of(const Point& source, const MicArray& array, double sample_rate_hz);

/// ceil(rate * max pairwise distance / c).
int max_delay_samples(const MicArray& array, double sample_rate_hz);

struct SyntheticObservation {
  std::vector<signal::PhatCorrelation> pairs;
  std::vector<int> spurious_counts;
  std::vector<bool> missed;
};

/// Correlation-space observation for one frame: background noise, the true
/// peak at round(delay) unless missed, and Poisson-many spurious peaks at
/// uniform lags. Deterministic for a given seed.
SyntheticObservation synth_observation(const TdoaVector& truth, const ObservationModel& model,
                                       int max_lag, std::uint64_t seed);

/// n sources drawn uniformly in the region and mapped through tdoa_of.
std::vector<TdoaVector> generate_training_set(const MicArray& array, const Box& region, int n,
                                              double sample_rate_hz, std::uint64_t seed);

/// Largest |d(i,j) + d(j,k) - d(i,k)| over all triples.
double triangle_residual(const TdoaVector& x, int n_mics);

/// Drops vectors whose triangle residual exceeds max_residual samples.
std::vector<TdoaVector> remove_outliers(std::span<const TdoaVector> data, int n_mics,
                                        double max_residual = 2.0);

/// Everything needed to regenerate a synthetic experiment.
struct Scene {
  MicArray array = default_array();
  Box room = default_room();
  Box training_region = default_training_region();
  int training_count = 20000;
  double sample_rate_hz = 16000.0;
  Trajectory path;
  ObservationModel observation;
  std::uint64_t seed = 1;

  int max_delay_samples() const { return scene::max_delay_samples(array, sample_rate_hz); }
};

/// Slow walk through the middle of the room, far from every microphone.
Trajectory central_path(double duration_s);
/// Walk that passes close to the display microphones midway through.
Trajectory near_mic_path(double duration_s);

Scene load_scene(const std::filesystem::path& path);
/// Same schema as the scene file, from JSON text.
Scene parse_scene(const std::string& json_text);
std::string scene_to_json(const Scene& scene);
void save_scene(const std::filesystem::path& path, const Scene& scene);

void write_vectors_csv(const std::filesystem::path& path, std::span<const TdoaVector> data,
                       int n_mics);
std::vector<TdoaVector> read_vectors_csv(const std::filesystem::path& path);

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj);
Trajectory read_trajectory_csv(const std::filesystem::path& path);

}  // namespace tdoa::scene
