#include "tdoa/scene.hpp"

#include "tdoa/csv.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>

namespace tdoa::scene {

using nlohmann::json;

double MicArray::max_pairwise_distance() const {
  double best = 0.0;
  for (std::size_t i = 0; i < positions.size(); ++i) {
    for (std::size_t j = i + 1; j < positions.size(); ++j) {
      best = std::max(best, (positions[i] - positions[j]).norm());
    }
  }
  return best;
}

void MicArray::validate() const {
  if (positions.size() < 2) throw std::invalid_argument("mic array needs at least two microphones");
  if (!(speed_of_sound > 0.0)) throw std::invalid_argument("speed_of_sound must be positive");
  for (std::size_t i = 0; i < positions.size(); ++i) {
    if (!positions[i].allFinite()) throw std::invalid_argument("mic position not finite");
    for (std::size_t j = i + 1; j < positions.size(); ++j) {
      if (positions[i] == positions[j]) throw std::invalid_argument("mic positions must be distinct");
    }
  }
}

void Box::validate() const {
  if (!lo.allFinite() || !hi.allFinite() || (hi.array() < lo.array()).any()) {
    throw std::invalid_argument("box needs finite lo <= hi");
  }
}

MicArray default_array() {
  MicArray a;
  a.positions = {
      {4.0, 0.0, 1.0}, {6.0, 0.0, 1.0}, {4.0, 0.0, 2.2}, {6.0, 0.0, 2.2},  // display corners
      {2.5, 4.0, 5.0}, {7.5, 4.0, 5.0}, {5.0, 9.0, 5.0},                   // ceiling
  };
  return a;
}

Box default_room() { return {{0.0, 0.0, 0.0}, {10.0, 13.0, 5.0}}; }

Box default_training_region() { return {{1.0, 0.8, 1.0}, {9.0, 9.0, 2.0}}; }

Trajectory::Trajectory(std::vector<Waypoint> waypoints) : waypoints_(std::move(waypoints)) {
  for (std::size_t k = 0; k < waypoints_.size(); ++k) {
    if (!std::isfinite(waypoints_[k].t) || !waypoints_[k].p.allFinite()) {
      throw std::invalid_argument("trajectory waypoint not finite");
    }
    if (k > 0 && !(waypoints_[k].t > waypoints_[k - 1].t)) {
      throw std::invalid_argument("trajectory timestamps must be strictly increasing");
    }
  }
}

double Trajectory::start_time() const {
  if (empty()) throw std::logic_error("empty trajectory");
  return waypoints_.front().t;
}

double Trajectory::end_time() const {
  if (empty()) throw std::logic_error("empty trajectory");
  return waypoints_.back().t;
}

Point Trajectory::at(double t) const {
  if (empty()) throw std::logic_error("empty trajectory");
  if (t <= waypoints_.front().t) return waypoints_.front().p;
  if (t >= waypoints_.back().t) return waypoints_.back().p;
  const auto it = std::upper_bound(waypoints_.begin(), waypoints_.end(), t,
                                   [](double v, const Waypoint& w) { return v < w.t; });
  const Waypoint& b = *it;
  const Waypoint& a = *(it - 1);
  const double u = (t - a.t) / (b.t - a.t);
  return a.p + u * (b.p - a.p);
}

std::vector<Point> sample_trajectory(const Trajectory& traj, std::span<const double> times) {
  std::vector<Point> out;
  out.reserve(times.size());
  for (double t : times) out.push_back(traj.at(t));
  return out;
}

std::vector<double> frame_times(const Trajectory& traj, const signal::FrameConfig& frame) {
  std::vector<double> times;
  if (traj.empty()) return times;
  const double rate = frame.sample_rate_hz;
  const auto total = static_cast<long long>(std::floor(traj.duration() * rate + 1e-9));
  const long long f = frame.frame_samples();
  const long long h = frame.hop_samples();
  for (long long start = 0; start + f <= total; start += h) {
    times.push_back(traj.start_time() + (static_cast<double>(start) + 0.5 * static_cast<double>(f)) / rate);
  }
  return times;
}

void ObservationModel::validate() const {
  if (!(true_peak_amp > 0.0)) throw std::invalid_argument("true_peak_amp must be positive");
  if (!(spurious_rate >= 0.0)) throw std::invalid_argument("spurious_rate must be >= 0");
  if (!(spurious_amp_low > 0.0) || !(spurious_amp_high >= spurious_amp_low)) {
    throw std::invalid_argument("spurious amplitude range must be positive and ordered");
  }
  if (!(miss_prob >= 0.0 && miss_prob <= 1.0)) throw std::invalid_argument("miss_prob must be in [0,1]");
  if (!(noise_floor_sigma >= 0.0)) throw std::invalid_argument("noise_floor_sigma must be >= 0");
}

TdoaVector tdoa_of(const Point& source, const MicArray& array, double sample_rate_hz) {
  const int n = array.size();
  std::vector<double> dist(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) dist[static_cast<std::size_t>(i)] = (array.positions[static_cast<std::size_t>(i)] - source).norm();
  TdoaVector out(pair_count(n));
  const double scale = sample_rate_hz / array.speed_of_sound;
  int k = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      out[k++] = (dist[static_cast<std::size_t>(i)] - dist[static_cast<std::size_t>(j)]) * scale;
    }
  }
  return out;
}

int max_delay_samples(const MicArray& array, double sample_rate_hz) {
  return static_cast<int>(std::ceil(sample_rate_hz * array.max_pairwise_distance() / array.speed_of_sound));
}

SyntheticObservation synth_observation(const TdoaVector& truth, const ObservationModel& model,
                                       int max_lag, std::uint64_t seed) {
  model.validate();
  if (max_lag < 1) throw std::invalid_argument("synth_observation: max_lag must be >= 1");
  const int d = static_cast<int>(truth.size());
  const int n_mics = mics_for_dimension(d);
  Rng rng(seed);

  SyntheticObservation obs;
  obs.pairs.reserve(static_cast<std::size_t>(d));
  const auto pairs = canonical_pairs(n_mics);
  for (int p = 0; p < d; ++p) {
    auto corr = signal::PhatCorrelation::zeros(pairs[static_cast<std::size_t>(p)], max_lag);
    if (model.noise_floor_sigma > 0.0) {
      std::normal_distribution<double> noise(0.0, model.noise_floor_sigma);
      for (double& v : corr.values) v = noise(rng);
    }

    const bool missed = std::bernoulli_distribution(model.miss_prob)(rng);
    if (!missed) {
      const long true_lag = std::clamp(std::lround(truth[p]), -static_cast<long>(max_lag),
                                       static_cast<long>(max_lag));
      corr.at(static_cast<int>(true_lag)) += model.true_peak_amp;
    }

    int spurious = 0;
    if (model.spurious_rate > 0.0) {
      spurious = std::poisson_distribution<int>(model.spurious_rate)(rng);
    }
    std::uniform_int_distribution<int> lag_dist(-max_lag, max_lag);
    std::uniform_real_distribution<double> amp_dist(model.spurious_amp_low, model.spurious_amp_high);
    for (int s = 0; s < spurious; ++s) {
      const int lag = lag_dist(rng);
      corr.at(lag) += amp_dist(rng);
    }

    obs.pairs.push_back(std::move(corr));
    obs.spurious_counts.push_back(spurious);
    obs.missed.push_back(missed);
  }
  return obs;
}

std::vector<TdoaVector> generate_training_set(const MicArray& array, const Box& region, int n,
                                              double sample_rate_hz, std::uint64_t seed) {
  array.validate();
  region.validate();
  if (n < 1) throw std::invalid_argument("generate_training_set: n must be >= 1");
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<TdoaVector> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    Point s;
    for (int a = 0; a < 3; ++a) s[a] = region.lo[a] + unit(rng) * (region.hi[a] - region.lo[a]);
    out.push_back(tdoa_of(s, array, sample_rate_hz));
  }
  return out;
}

double triangle_residual(const TdoaVector& x, int n_mics) {
  if (x.size() != pair_count(n_mics)) throw std::invalid_argument("triangle_residual: dimension mismatch");
  double worst = 0.0;
  for (int i = 0; i < n_mics; ++i) {
    for (int j = i + 1; j < n_mics; ++j) {
      for (int k = j + 1; k < n_mics; ++k) {
        const double r = x[pair_index(i, j, n_mics)] + x[pair_index(j, k, n_mics)] -
                         x[pair_index(i, k, n_mics)];
        worst = std::max(worst, std::abs(r));
      }
    }
  }
  return worst;
}

std::vector<TdoaVector> remove_outliers(std::span<const TdoaVector> data, int n_mics,
                                        double max_residual) {
  std::vector<TdoaVector> kept;
  for (const auto& x : data) {
    if (triangle_residual(x, n_mics) <= max_residual) kept.push_back(x);
  }
  return kept;
}

Trajectory central_path(double duration_s) {
  // A slow drift of about 1.6 m in the middle of the room at head height.
  const double T = duration_s;
  return Trajectory({
      {0.0, {4.55, 6.35, 1.6}},
      {0.35 * T, {5.15, 6.17, 1.6}},
      {0.7 * T, {5.45, 6.59, 1.63}},
      {T, {4.94, 6.71, 1.6}},
  });
}

Trajectory near_mic_path(double duration_s) {
  // Step up to the right-hand display corners, pause there, step back.
  const double T = duration_s;
  return Trajectory({
      {0.0, {5.3, 2.5, 1.6}},
      {0.4 * T, {5.6, 1.6, 1.5}},
      {0.6 * T, {5.6, 1.6, 1.5}},
      {T, {5.3, 2.5, 1.6}},
  });
}

namespace {

json point_json(const Point& p) { return json::array({p.x(), p.y(), p.z()}); }

Point point_from(const json& j) {
  if (!j.is_array() || j.size() != 3) throw std::runtime_error("scene: point must be [x, y, z]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Box box_from(const json& j) { return {point_from(j.at("lo")), point_from(j.at("hi"))}; }
json box_json(const Box& b) { return {{"lo", point_json(b.lo)}, {"hi", point_json(b.hi)}}; }

Trajectory trajectory_from(const json& j) {
  if (j.is_object()) {
    const auto preset = j.at("preset").get<std::string>();
    const double duration = j.at("duration_s").get<double>();
    if (preset == "central") return central_path(duration);
    if (preset == "near_mic") return near_mic_path(duration);
    throw std::runtime_error("scene: unknown trajectory preset '" + preset + "'");
  }
  std::vector<Waypoint> w;
  for (const auto& row : j) {
    if (!row.is_array() || row.size() != 4) throw std::runtime_error("scene: waypoint must be [t, x, y, z]");
    w.push_back({row[0].get<double>(), {row[1].get<double>(), row[2].get<double>(), row[3].get<double>()}});
  }
  return Trajectory(std::move(w));
}

}  // namespace

namespace {

Scene scene_from(const json& j) {
  Scene s;
  if (j.contains("mics")) {
    s.array.positions.clear();
    for (const auto& m : j["mics"]) s.array.positions.push_back(point_from(m));
  }
  s.array.speed_of_sound = j.value("speed_of_sound", s.array.speed_of_sound);
  if (j.contains("room")) s.room = box_from(j["room"]);
  if (j.contains("training_region")) s.training_region = box_from(j["training_region"]);
  s.training_count = j.value("training_count", s.training_count);
  s.sample_rate_hz = j.value("sample_rate_hz", s.sample_rate_hz);
  s.seed = j.value("seed", s.seed);
  if (j.contains("trajectory")) s.path = trajectory_from(j["trajectory"]);
  if (j.contains("observation")) {
    const auto& o = j["observation"];
    auto& m = s.observation;
    m.true_peak_amp = o.value("true_peak_amp", m.true_peak_amp);
    m.spurious_rate = o.value("spurious_rate", m.spurious_rate);
    if (o.contains("spurious_amp_range")) {
      m.spurious_amp_low = o["spurious_amp_range"].at(0).get<double>();
      m.spurious_amp_high = o["spurious_amp_range"].at(1).get<double>();
    }
    m.miss_prob = o.value("miss_prob", m.miss_prob);
    m.noise_floor_sigma = o.value("noise_floor_sigma", m.noise_floor_sigma);
  }
  s.array.validate();
  s.room.validate();
  s.training_region.validate();
  s.observation.validate();
  if (s.training_count < 1) throw std::invalid_argument("training_count must be >= 1");
  if (!(s.sample_rate_hz > 0.0)) throw std::invalid_argument("sample_rate_hz must be positive");
  return s;
}

}  // namespace

Scene parse_scene(const std::string& json_text) {
  try {
    return scene_from(json::parse(json_text));
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("scene: ") + e.what());
  }
}

Scene load_scene(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scene file " + path.string());
  try {
    return scene_from(json::parse(in));
  } catch (const json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

std::string scene_to_json(const Scene& s) {
  json j;
  j["sample_rate_hz"] = s.sample_rate_hz;
  j["speed_of_sound"] = s.array.speed_of_sound;
  j["mics"] = json::array();
  for (const auto& p : s.array.positions) j["mics"].push_back(point_json(p));
  j["room"] = box_json(s.room);
  j["training_region"] = box_json(s.training_region);
  j["training_count"] = s.training_count;
  j["trajectory"] = json::array();
  for (const auto& w : s.path.waypoints()) {
    j["trajectory"].push_back({w.t, w.p.x(), w.p.y(), w.p.z()});
  }
  const auto& m = s.observation;
  j["observation"] = {{"true_peak_amp", m.true_peak_amp},
                      {"spurious_rate", m.spurious_rate},
                      {"spurious_amp_range", {m.spurious_amp_low, m.spurious_amp_high}},
                      {"miss_prob", m.miss_prob},
                      {"noise_floor_sigma", m.noise_floor_sigma}};
  j["seed"] = s.seed;
  return j.dump(2);
}

void save_scene(const std::filesystem::path& path, const Scene& s) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << scene_to_json(s) << '\n';
}

void write_vectors_csv(const std::filesystem::path& path, std::span<const TdoaVector> data,
                       int n_mics) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  bool first = true;
  for (const auto& p : canonical_pairs(n_mics)) {
    out << (first ? "" : ",") << "d_" << p.i << '_' << p.j;
    first = false;
  }
  out << '\n';
  for (const auto& x : data) {
    if (x.size() != pair_count(n_mics)) throw std::invalid_argument("write_vectors_csv: dimension mismatch");
    for (Eigen::Index k = 0; k < x.size(); ++k) out << (k ? "," : "") << csv::format(x[k]);
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<TdoaVector> read_vectors_csv(const std::filesystem::path& path) {
  const auto table = csv::read(path);
  mics_for_dimension(static_cast<int>(table.header.size()));
  std::vector<TdoaVector> out;
  out.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    TdoaVector x(static_cast<Eigen::Index>(row.size()));
    for (std::size_t k = 0; k < row.size(); ++k) x[static_cast<Eigen::Index>(k)] = csv::to_double(row[k]);
    out.push_back(std::move(x));
  }
  return out;
}

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "t,x,y,z\n";
  for (const auto& w : traj.waypoints()) {
    out << csv::format(w.t) << ',' << csv::format(w.p.x()) << ',' << csv::format(w.p.y()) << ','
        << csv::format(w.p.z()) << '\n';
  }
}

Trajectory read_trajectory_csv(const std::filesystem::path& path) {
  const auto table = csv::read(path);
  const auto ct = table.column("t"), cx = table.column("x"), cy = table.column("y"), cz = table.column("z");
  std::vector<Waypoint> w;
  for (const auto& row : table.rows) {
    w.push_back({csv::to_double(row[ct]),
                 {csv::to_double(row[cx]), csv::to_double(row[cy]), csv::to_double(row[cz])}});
  }
  return Trajectory(std::move(w));
}

}  // namespace tdoa::scene
