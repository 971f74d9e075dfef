#include "tdoa/filters.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace tdoa::filters {

namespace {

constexpr int kMaxBisection = 200;

void require_tree(const FilterConfig& cfg, const manifold::PdTree* tree) {
  if (cfg.strategy.projects() && tree == nullptr) {
    throw std::invalid_argument("projection strategy '" + cfg.strategy.name() +
                                "' needs a trained tree (run train-tree first)");
  }
}

std::vector<double> weights_of(const Ensemble& particles) {
  std::vector<double> w;
  w.reserve(particles.size());
  for (const auto& p : particles) w.push_back(p.weight);
  return w;
}

// Noise + manifold projection applied to every freshly drawn particle.
Particle respawn(const Particle& source, const FilterConfig& cfg, const manifold::PdTree* tree, Rng& rng) {
  Particle p = source;
  if (cfg.resample_sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, cfg.resample_sigma);
    for (Eigen::Index k = 0; k < p.state.size(); ++k) p.state[k] += noise(rng);
  }
  if (cfg.strategy.projects()) {
    auto d = manifold::denoise(*tree, p.state, cfg.strategy, rng);
    p.state = std::move(d.x);
    p.birth_depth = d.depth;
  } else {
    p.birth_depth = -1;
  }
  return p;
}

void set_uniform(Ensemble& particles) {
  const double w = 1.0 / static_cast<double>(particles.size());
  for (auto& p : particles) p.weight = w;
}

}  // namespace

void ScoringConfig::validate() const {
  if (!(z0 >= 0.0)) throw std::invalid_argument("z0 must be >= 0");
  if (!(sigma_z_sq > 0.0)) throw std::invalid_argument("sigma_z_sq must be positive");
}

void FilterConfig::validate() const {
  if (m < 1) throw std::invalid_argument("particle count m must be >= 1");
  if (!(resample_sigma >= 0.0)) throw std::invalid_argument("resample_sigma must be >= 0");
  if (!(alpha >= 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must be in [0, 1)");
}

double pseudo_likelihood(const Observation& peaks, const Vector& x, const ScoringConfig& cfg) {
  if (static_cast<Eigen::Index>(peaks.size()) != x.size()) {
    throw std::invalid_argument("pseudo_likelihood: need one peak set per pair");
  }
  const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi * cfg.sigma_z_sq);
  double total = 0.0;
  for (std::size_t p = 0; p < peaks.size(); ++p) {
    const double xp = x[static_cast<Eigen::Index>(p)];
    for (const auto& pk : peaks[p].peaks) {
      const double d = static_cast<double>(pk.lag) - xp;
      total += pk.score * norm * std::exp(-0.5 * d * d / cfg.sigma_z_sq);
    }
  }
  return cfg.z0 + total;
}

std::vector<double> score_ensemble(const Ensemble& particles, const Observation& peaks,
                                   const ScoringConfig& cfg) {
  std::vector<double> out;
  out.reserve(particles.size());
  for (const auto& p : particles) out.push_back(pseudo_likelihood(peaks, p.state, cfg));
  return out;
}

Vector weighted_mean(const Ensemble& particles) {
  if (particles.empty()) throw std::invalid_argument("weighted_mean: empty ensemble");
  Vector acc = Vector::Zero(particles.front().state.size());
  for (const auto& p : particles) acc += p.weight * p.state;
  return acc;
}

StepResult sir_step(Ensemble& particles, const Observation& peaks, const FilterConfig& cfg,
                    const ScoringConfig& scoring, const manifold::PdTree* tree, Rng& rng) {
  if (particles.empty()) throw std::invalid_argument("sir_step: empty ensemble");
  require_tree(cfg, tree);
  const std::size_t m = particles.size();

  const auto prior_w = weights_of(particles);
  std::discrete_distribution<std::size_t> draw(prior_w.begin(), prior_w.end());
  Ensemble next;
  next.reserve(m);
  for (std::size_t i = 0; i < m; ++i) next.push_back(respawn(particles[draw(rng)], cfg, tree, rng));

  const auto scores = score_ensemble(next, peaks, scoring);
  const double total = std::accumulate(scores.begin(), scores.end(), 0.0);
  if (total > 0.0) {
    for (std::size_t i = 0; i < m; ++i) next[i].weight = scores[i] / total;
  } else {
    set_uniform(next);
  }

  particles = std::move(next);
  return {weighted_mean(particles), static_cast<int>(m), false};
}

double nh_update_regrets(Ensemble& particles, const Observation& peaks, const ScoringConfig& scoring,
                         double alpha, std::vector<double>* scores_out) {
  const auto scores = score_ensemble(particles, peaks, scoring);
  double g_a = 0.0;
  for (std::size_t i = 0; i < particles.size(); ++i) g_a += particles[i].weight * scores[i];
  for (std::size_t i = 0; i < particles.size(); ++i) {
    particles[i].regret = (1.0 - alpha) * particles[i].regret + (scores[i] - g_a);
  }
  if (scores_out != nullptr) *scores_out = scores;
  return g_a;
}

double ct_potential(std::span<const double> regrets, double c) {
  double sum = 0.0;
  for (double g : regrets) {
    const double gp = std::max(g, 0.0);
    sum += std::exp(gp * gp / (2.0 * c));
  }
  return sum / static_cast<double>(regrets.size());
}

std::optional<double> solve_ct(std::span<const double> regrets) {
  double gmax = 0.0;
  for (double g : regrets) gmax = std::max(gmax, g);
  if (!(gmax > 0.0) || !std::isfinite(gmax)) return std::nullopt;

  // Solve on regrets scaled to max 1; c scales with the square of the regrets.
  std::vector<double> scaled(regrets.begin(), regrets.end());
  for (double& g : scaled) g /= gmax;

  const double target = std::numbers::e;
  // potential(c) - e is strictly decreasing on (0, inf), from +inf to 1 - e.
  double lo = 1e-12;
  double hi = 1.5;
  for (int k = 0; k < 64 && ct_potential(scaled, lo) <= target; ++k) lo *= 1e-3;
  for (int k = 0; k < 64 && ct_potential(scaled, hi) > target; ++k) hi *= 2.0;

  for (int it = 0; it < kMaxBisection; ++it) {
    const double mid = lo + 0.5 * (hi - lo);
    if (mid <= lo || mid >= hi) break;
    if (ct_potential(scaled, mid) > target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double r_lo = std::abs(ct_potential(scaled, lo) - target);
  const double r_hi = std::abs(ct_potential(scaled, hi) - target);
  const double c = gmax * gmax * (r_lo < r_hi ? lo : hi);
  if (!(c > 0.0) || !std::isfinite(c)) return std::nullopt;
  return c;
}

std::optional<std::vector<double>> nh_weights(std::span<const double> regrets, double c) {
  if (!(c > 0.0)) throw std::invalid_argument("nh_weights: c must be positive");
  std::vector<double> w(regrets.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < regrets.size(); ++i) {
    if (regrets[i] > 0.0) {
      const double g = regrets[i];
      w[i] = (g / c) * std::exp(g * g / (2.0 * c));
      total += w[i];
    }
  }
  if (!(total > 0.0) || !std::isfinite(total)) return std::nullopt;
  for (double& v : w) v /= total;
  return w;
}

StepResult nh_step(Ensemble& particles, const Observation& peaks, const FilterConfig& cfg,
                   const ScoringConfig& scoring, const manifold::PdTree* tree, Rng& rng) {
  if (particles.empty()) throw std::invalid_argument("nh_step: empty ensemble");
  require_tree(cfg, tree);
  const Ensemble prior = particles;

  nh_update_regrets(particles, peaks, scoring, cfg.alpha);
  std::vector<double> regrets;
  regrets.reserve(particles.size());
  for (const auto& p : particles) regrets.push_back(p.regret);

  std::optional<std::vector<double>> weights;
  if (const auto c = solve_ct(regrets)) weights = nh_weights(regrets, *c);
  if (!weights) {
    set_uniform(particles);
    for (auto& p : particles) p.regret = 0.0;
    return {weighted_mean(particles), 0, true};
  }
  for (std::size_t i = 0; i < particles.size(); ++i) particles[i].weight = (*weights)[i];

  StepResult result;
  result.prediction = weighted_mean(particles);

  const auto prior_w = weights_of(prior);
  std::discrete_distribution<std::size_t> draw(prior_w.begin(), prior_w.end());
  for (std::size_t i = 0; i < particles.size(); ++i) {
    if (particles[i].weight != 0.0) continue;
    const std::size_t j = draw(rng);
    Particle fresh = respawn(prior[j], cfg, tree, rng);
    fresh.regret = regrets[j];
    fresh.weight = 0.0;
    particles[i] = std::move(fresh);
    ++result.resampled;
  }
  return result;
}

Ensemble initialize_particles(std::span<const Vector> training, int m, double jitter_sigma, Rng& rng) {
  if (training.empty()) throw std::invalid_argument("initialize_particles: empty training set");
  if (m < 1) throw std::invalid_argument("initialize_particles: m must be >= 1");
  std::uniform_int_distribution<std::size_t> pick(0, training.size() - 1);
  std::normal_distribution<double> jitter(0.0, jitter_sigma > 0.0 ? jitter_sigma : 1.0);
  Ensemble out;
  out.reserve(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    Particle p;
    p.state = training[pick(rng)];
    if (jitter_sigma > 0.0) {
      for (Eigen::Index k = 0; k < p.state.size(); ++k) p.state[k] += jitter(rng);
    }
    p.weight = 1.0 / static_cast<double>(m);
    out.push_back(std::move(p));
  }
  return out;
}

std::string to_string(FilterKind kind) { return kind == FilterKind::sir ? "PF" : "NH"; }

FilterKind parse_filter_kind(const std::string& s) {
  if (s == "PF" || s == "pf" || s == "SIR" || s == "sir") return FilterKind::sir;
  if (s == "NH" || s == "nh") return FilterKind::normal_hedge;
  throw std::invalid_argument("unknown filter kind '" + s + "' (expected PF or NH)");
}

Tracker::Tracker(FilterKind kind, FilterConfig cfg, ScoringConfig scoring,
                 std::shared_ptr<const manifold::PdTree> tree, std::span<const Vector> training,
                 double init_jitter)
    : kind_(kind), cfg_(cfg), scoring_(scoring), tree_(std::move(tree)), rng_(cfg.rng_seed) {
  cfg_.validate();
  scoring_.validate();
  require_tree(cfg_, tree_.get());
  particles_ = initialize_particles(training, cfg_.m, init_jitter, rng_);
}

StepResult Tracker::step(const Observation& peaks) {
  StepResult r = kind_ == FilterKind::sir ? sir_step(particles_, peaks, cfg_, scoring_, tree_.get(), rng_)
                                          : nh_step(particles_, peaks, cfg_, scoring_, tree_.get(), rng_);
  ++step_;
  return r;
}

std::vector<int> Tracker::depth_histogram() const {
  const int max_depth = tree_ ? tree_->depth() : 0;
  std::vector<int> hist(static_cast<std::size_t>(max_depth + 2), 0);
  for (const auto& p : particles_) {
    const auto idx = static_cast<std::size_t>(p.birth_depth + 1);
    if (idx >= hist.size()) hist.resize(idx + 1, 0);
    ++hist[idx];
  }
  return hist;
}

}  // namespace tdoa::filters
