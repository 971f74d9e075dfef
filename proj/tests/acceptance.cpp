// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include "tdoa/filters.hpp"
#include "tdoa/harness.hpp"
#include "tdoa/manifold.hpp"
#include "tdoa/scene.hpp"
#include "tdoa/signal.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>

using namespace tdoa;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int id, bool ok, const std::string& detail) {
  std::printf("%s criterion %d: %s\n", ok ? "PASS" : "FAIL", id, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void physics() {
  const auto t0 = Clock::now();
  Rng rng(1);
  std::uniform_real_distribution<double> u(-5.0, 15.0);
  std::uniform_int_distribution<int> count(3, 10);
  double worst_triangle = 0.0, worst_anti = 0.0;
  for (int draw = 0; draw < 1000; ++draw) {
    scene::MicArray a;
    const int n = count(rng);
    for (int i = 0; i < n; ++i) a.positions.push_back({u(rng), u(rng), u(rng)});
    const scene::Point s{u(rng), u(rng), u(rng)};
    const auto x = scene::tdoa_of(s, a, 16000.0);
    auto delay = [&](int i, int j) { return i < j ? x[pair_index(i, j, n)] : -x[pair_index(j, i, n)]; };
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
          if (i == j || j == k || i == k) continue;
          worst_triangle = std::max(worst_triangle, std::abs(delay(i, j) + delay(j, k) + delay(k, i)));
        }
    // Reversing the microphone order reverses every pair.
    scene::MicArray r = a;
    std::reverse(r.positions.begin(), r.positions.end());
    const auto xr = scene::tdoa_of(s, r, 16000.0);
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        worst_anti = std::max(worst_anti, std::abs(x[pair_index(i, j, n)] + xr[pair_index(n - 1 - j, n - 1 - i, n)]));
  }
  const double elapsed = seconds_since(t0);
  report(1, worst_triangle <= 1e-9 && worst_anti <= 1e-9 && elapsed < 1.0,
         fmt("triangle %.2e, antisymmetry %.2e samples, %.3f s", worst_triangle, worst_anti, elapsed));
}

void phat() {
  signal::FrameConfig cfg;
  cfg.max_delay_samples = scene::max_delay_samples(scene::default_array(), cfg.sample_rate_hz);
  const auto len = static_cast<std::size_t>(cfg.frame_samples());
  Rng rng(2);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_int_distribution<int> lag_dist(-cfg.max_delay_samples, cfg.max_delay_samples);
  const double noise_sd = std::pow(10.0, -20.0 / 20.0);
  int clean_hits = 0, noisy_hits = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int lag = lag_dist(rng);
    const std::size_t pad = static_cast<std::size_t>(cfg.max_delay_samples);
    std::vector<double> src(len + 2 * pad);
    for (auto& v : src) v = g(rng);
    // b[n] = a[n - lag]: both frames cut from one longer recording.
    std::vector<double> a(src.begin() + long(pad), src.begin() + long(pad + len));
    std::vector<double> b(src.begin() + long(pad) - lag, src.begin() + long(pad + len) - lag);
    clean_hits += signal::tdoa_argmax(signal::phat_correlate(a, b, cfg)) == lag;
    for (auto& v : a) v += noise_sd * g(rng);
    for (auto& v : b) v += noise_sd * g(rng);
    noisy_hits += signal::tdoa_argmax(signal::phat_correlate(a, b, cfg)) == lag;
  }
  report(2, clean_hits == 200 && noisy_hits >= 198,
         fmt("noiseless %d/200, 20 dB %d/200, lags within +-%d", clean_hits, noisy_hits, cfg.max_delay_samples));
}

void normal_hedge() {
  Rng rng(3);
  std::uniform_int_distribution<int> size(2, 100);
  std::uniform_real_distribution<double> scale_dist(-3.0, 3.0);
  double worst_residual = 0.0, worst_sum = 0.0;
  int zero_law_violations = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const int m = size(rng);
    const double scale = std::pow(10.0, scale_dist(rng));
    std::normal_distribution<double> g(0.0, scale);
    std::vector<double> regrets(static_cast<std::size_t>(m));
    for (auto& v : regrets) v = g(rng);
    // Exact zeros exercise the boundary of the zero-weight law.
    regrets[static_cast<std::size_t>(trial % m)] = trial % 3 == 0 ? 0.0 : regrets[static_cast<std::size_t>(trial % m)];
    if (std::none_of(regrets.begin(), regrets.end(), [](double v) { return v > 0.0; })) {
      regrets[static_cast<std::size_t>((trial + 1) % m)] = std::abs(g(rng)) + 1e-3 * scale;
    }
    const auto c = filters::solve_ct(regrets);
    if (!c) {
      ++zero_law_violations;
      continue;
    }
    worst_residual = std::max(worst_residual, std::abs(filters::ct_potential(regrets, *c) - std::numbers::e));
    const auto w = filters::nh_weights(regrets, *c);
    if (!w) {
      ++zero_law_violations;
      continue;
    }
    worst_sum = std::max(worst_sum, std::abs(std::accumulate(w->begin(), w->end(), 0.0) - 1.0));
    for (std::size_t i = 0; i < regrets.size(); ++i) zero_law_violations += ((*w)[i] == 0.0) != (regrets[i] <= 0.0);
  }
  const std::vector<double> one{1.0}, two{1.0, -1.0};
  const double c1 = filters::solve_ct(one).value_or(-1.0);
  const double c2 = filters::solve_ct(two).value_or(-1.0);
  const double closed_err =
      std::max(std::abs(c1 - 0.5), std::abs(c2 - 1.0 / (2.0 * std::log(2.0 * std::numbers::e - 1.0))));
  report(3, worst_residual <= 1e-9 && worst_sum <= 1e-12 && zero_law_violations == 0 && closed_err <= 1e-9,
         fmt("residual %.2e, |sum-1| %.2e, zero-law violations %d, closed forms %.2e", worst_residual, worst_sum,
             zero_law_violations, closed_err));
}

struct RoomSet {
  std::vector<TdoaVector> data;
  manifold::PdTree tree;
};

// The default scene's training set: 20000 positions where people stand.
RoomSet room_set(const scene::Box& region) {
  const scene::Scene sc;
  const auto data = scene::generate_training_set(sc.array, region, sc.training_count, sc.sample_rate_hz, 4);
  auto tree = manifold::PdTree::build(data, {}, 4);
  return {data, std::move(tree)};
}

double denoising_reduction(const RoomSet& room, const scene::Box& region, double& before, double& after) {
  const auto test = scene::generate_training_set(scene::default_array(), region, 2000, 16000.0, 6);
  Rng rng(7);
  std::normal_distribution<double> g(0.0, 5.0);
  before = after = 0.0;
  for (const auto& x : test) {
    Eigen::VectorXd noisy = x;
    for (auto& v : noisy) v += g(rng);
    const auto d = manifold::denoise(room.tree, noisy, manifold::ProjectionStrategy::fixed(2), rng);
    before += (noisy - x).squaredNorm();
    after += (d.x - x).squaredNorm();
  }
  before /= double(test.size());
  after /= double(test.size());
  return 1.0 - after / before;
}

void tree_structure(const RoomSet& room) {
  const auto& tree = room.tree;
  int worst_imbalance = 0;
  for (const auto& n : tree.nodes()) {
    if (!n.is_leaf()) worst_imbalance = std::max(worst_imbalance, std::abs(tree.node(n.left).count - tree.node(n.right).count));
  }
  Rng rng(5);
  std::normal_distribution<double> g(0.0, 50.0);
  double worst_idem = 0.0, worst_expand = 0.0;
  for (int q = 0; q < 1000; ++q) {
    Eigen::VectorXd x(21), y(21);
    for (auto& v : x) v = g(rng);
    for (auto& v : y) v = g(rng);
    for (const auto& n : tree.nodes()) {
      const auto px = manifold::project(n, x);
      const auto py = manifold::project(n, y);
      worst_idem = std::max(worst_idem, (manifold::project(n, px) - px).norm());
      worst_expand = std::max(worst_expand, (px - py).norm() - (x - y).norm());
    }
  }
  Eigen::MatrixXd X(room.data.size(), 21);
  for (std::size_t r = 0; r < room.data.size(); ++r) X.row(Eigen::Index(r)) = room.data[r].transpose();
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(X);
  const auto& s = svd.singularValues();
  int rank = 0;
  for (Eigen::Index k = 0; k < s.size(); ++k) rank += s[k] > 1e-6 * s[0];
  report(4, worst_imbalance <= 1 && worst_idem <= 1e-9 && worst_expand <= 1e-9 && rank <= 6,
         fmt("%zu leaves, imbalance %d, idempotency %.2e, expansion %.2e, rank %d", tree.leaves().size(),
             worst_imbalance, worst_idem, std::max(worst_expand, 0.0), rank));
}

void denoising(const RoomSet& room) {
  double before = 0.0, after = 0.0;
  const double reduction = denoising_reduction(room, scene::Scene{}.training_region, before, after);
  // For reference only: the whole room box, up to the microphones themselves.
  const auto whole = room_set(scene::default_room());
  double wb = 0.0, wa = 0.0;
  const double whole_reduction = denoising_reduction(whole, scene::default_room(), wb, wa);
  report(5, reduction >= 0.30,
         fmt("MSE %.2f -> %.2f samples^2 per vector, reduction %.1f%% (whole room box: %.1f%%)", before, after,
             100.0 * reduction, 100.0 * whole_reduction));
}

harness::ExperimentResult run_preset(harness::ExperimentConfig cfg, const fs::path& out) {
  fs::remove_all(out);
  cfg.out_dir = out;
  harness::save_model(cfg, harness::train_model(cfg));
  return harness::run_experiment(cfg);
}

// Returns the byte-comparison outcome of a rerun, reported last.
std::pair<bool, std::string> central_walk(const fs::path& base) {
  const auto t0 = Clock::now();
  const auto result = run_preset(harness::central_walk_preset(), base / "central_a");
  const double elapsed = seconds_since(t0);
  const auto& rep = *result.report;
  const double pf_root = rep.at("PF-root").median_rmse, pf_none = rep.at("PF-none").median_rmse;
  const double nh_root = rep.at("NH-root").median_rmse, nh_none = rep.at("NH-none").median_rmse;
  report(6,
         result.record.frame_count() == 120 && pf_root <= 5.0 && nh_root <= 5.0 && pf_none > 3.0 * pf_root &&
             nh_none > 3.0 * nh_root && elapsed < 60.0,
         fmt("%zu frames; median RMSE PF-root %.2f, NH-root %.2f, PF-none %.2f (%.1fx), NH-none %.2f (%.1fx); %.1f s",
             result.record.frame_count(), pf_root, nh_root, pf_none, pf_none / pf_root, nh_none, nh_none / nh_root,
             elapsed));

  const int m = result.record.m;
  const double nh = rep.at("NH-root").mean_resampled, nh_n = rep.at("NH-none").mean_resampled;
  const double pf = rep.at("PF-root").mean_resampled;
  report(7, nh < 0.5 * m && nh_n < 0.5 * m && pf == m,
         fmt("mean resamples per step NH-root %.2f, NH-none %.2f, PF %.0f (m = %d)", nh, nh_n, pf, m));

  const auto rerun = run_preset(harness::central_walk_preset(), base / "central_b");
  bool same = true;
  std::string diff;
  for (const char* f : {"tracks.csv", "peaks.csv", "depths.csv", "resamples.csv", "metrics.csv",
                        "observations.csv", "truth.csv", "training.csv", "tree.txt"}) {
    if (slurp(base / "central_a" / f) != slurp(base / "central_b" / f)) {
      same = false;
      diff += std::string(" ") + f;
    }
  }
  return {same, same ? "central walk rerun: all CSV and tree outputs byte-identical" : "differs:" + diff};
}

void near_mic(const fs::path& base) {
  const auto cfg = harness::near_mic_preset();
  const auto result = run_preset(cfg, base / "near_mic");
  const auto& rep = *result.report;
  const double rand = rep.at("NH-rand").median_rmse;
  double best = 1e300;
  std::string best_name;
  for (const char* v : {"NH-root", "NH-1", "NH-2"}) {
    if (rep.at(v).median_rmse < best) {
      best = rep.at(v).median_rmse;
      best_name = v;
    }
  }

  // Depth-2 share of NH-rand's particles inside and outside the hold near the display.
  const double T = cfg.scene.path.duration();
  const double t_start = cfg.scene.path.start_time();
  const harness::VariantTrack* track = nullptr;
  for (const auto& v : result.record.variants) {
    if (v.name == "NH-rand") track = &v;
  }
  double in_deep = 0, in_all = 0, out_deep = 0, out_all = 0;
  for (std::size_t f = 0; f < result.record.frame_count(); ++f) {
    const double t = result.record.times[f] - t_start;
    const auto& h = track->depth_hist[f];
    const double all = std::accumulate(h.begin() + 1, h.end(), 0.0);
    const double deep = h.size() > 3 ? h[3] : 0.0;
    if (t >= 0.4 * T && t <= 0.6 * T) {
      in_deep += deep;
      in_all += all;
    } else {
      out_deep += deep;
      out_all += all;
    }
  }
  report(8, rand <= 1.25 * best,
         fmt("median RMSE NH-rand %.2f vs best fixed %s %.2f (ratio %.2f); depth-2 share near mics %.3f, elsewhere %.3f",
             rand, best_name.c_str(), best, rand / best, in_deep / std::max(in_all, 1.0),
             out_deep / std::max(out_all, 1.0)));
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path base = argc > 1 ? fs::path(argv[1]) : fs::current_path() / "acceptance_out";
  fs::create_directories(base);
  try {
    physics();
    phat();
    normal_hedge();
    const auto room = room_set(scene::Scene{}.training_region);
    tree_structure(room);
    denoising(room);
    const auto [same, detail] = central_walk(base);
    near_mic(base);
    report(9, same, detail);
  } catch (const std::exception& e) {
    std::printf("FAIL acceptance run aborted: %s\n", e.what());
    return 1;
  }
  return failures == 0 ? 0 : 1;
}
