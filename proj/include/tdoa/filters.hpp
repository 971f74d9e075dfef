#pragma once

// SIR and NormalHedge particle filters over full delay vectors, sharing
// the peak-based pseudo-likelihood and manifold-constrained resampling.

#include "tdoa/manifold.hpp"
#include "tdoa/pairs.hpp"
#include "tdoa/signal.hpp"

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tdoa::filters {

using Vector = Eigen::VectorXd;

/// One PeakSet per pair, canonical order.
using Observation = std::vector<signal::PeakSet>;

struct Particle {
  Vector state;
  double weight = 0.0;
  /// Discounted cumulative regret (NormalHedge only).
  double regret = 0.0;
  /// Tree depth used the last time this particle was denoised, -1 if never.
  int birth_depth = -1;
};

using Ensemble = std::vector<Particle>;

struct ScoringConfig {
  /// Background likelihood given to every state.
  double z0 = 1.0;
  /// Variance of the Gaussian peak kernel, samples^2.
  double sigma_z_sq = 10.0;

  void validate() const;
};

struct FilterConfig {
  int m = 50;
  /// Per-coordinate std of the resampling noise, in samples. The noise
  /// covariance is resample_sigma^2 * I.
  double resample_sigma = 2.0;
  /// NormalHedge regret discount.
  double alpha = 0.05;
  manifold::ProjectionStrategy strategy;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

/// z0 + sum over pairs and peaks of score * N(lag; x_p, sigma_z^2).
double pseudo_likelihood(const Observation& peaks, const Vector& x, const ScoringConfig& cfg);

/// Scores every particle's current state against the observation.
std::vector<double> score_ensemble(const Ensemble& particles, const Observation& peaks,
                                   const ScoringConfig& cfg);

struct StepResult {
  Vector prediction;
  /// Particles drawn anew this step (m for SIR).
  int resampled = 0;
  /// NormalHedge only: every regret was <= 0 and the ensemble was reset.
  bool degenerate_reset = false;
};

/// Resample m particles by prior weight, add Gaussian noise, denoise
/// through the tree, reweight by pseudo-likelihood and predict the
/// weighted mean. `tree` may be null only when the strategy is none.
StepResult sir_step(Ensemble& particles, const Observation& peaks, const FilterConfig& cfg,
                    const ScoringConfig& scoring, const manifold::PdTree* tree, Rng& rng);

/// g_A = sum_i w_i L_i over prior weights; G_i <- (1-alpha) G_i + L_i - g_A.
/// Returns g_A. `scores` receives L_i when non-null.
double nh_update_regrets(Ensemble& particles, const Observation& peaks, const ScoringConfig& scoring,
                         double alpha, std::vector<double>* scores = nullptr);

/// Unique c > 0 with (1/m) sum exp([G_i]_+^2 / (2c)) = e, by bisection.
/// Empty when no regret is positive (no solution exists).
std::optional<double> solve_ct(std::span<const double> regrets);

/// Left-hand side of the potential equation at c.
double ct_potential(std::span<const double> regrets, double c);

/// w_i proportional to ([G_i]_+ / c) exp([G_i]_+^2 / (2c)), normalized.
/// Exactly zero for G_i <= 0. Empty when every weight would be zero.
std::optional<std::vector<double>> nh_weights(std::span<const double> regrets, double c);

/// Weight update, prediction, then replacement of every zero-weight
/// particle by a noised and denoised draw from the prior ensemble that
/// inherits the drawn particle's regret. If no regret is positive the
/// weights are reset to uniform, regrets to zero, and nothing is resampled.
StepResult nh_step(Ensemble& particles, const Observation& peaks, const FilterConfig& cfg,
                   const ScoringConfig& scoring, const manifold::PdTree* tree, Rng& rng);

Vector weighted_mean(const Ensemble& particles);

/// m particles drawn uniformly from the training set (so they start on the
/// manifold), optional Gaussian jitter, uniform weights, zero regrets.
Ensemble initialize_particles(std::span<const Vector> training, int m, double jitter_sigma, Rng& rng);

enum class FilterKind { sir, normal_hedge };

std::string to_string(FilterKind kind);  // "PF" / "NH"
FilterKind parse_filter_kind(const std::string& s);

/// Sequential tracker: owns the ensemble and its generator. The tree is
/// shared read-only between trackers.
class Tracker {
 public:
  Tracker(FilterKind kind, FilterConfig cfg, ScoringConfig scoring,
          std::shared_ptr<const manifold::PdTree> tree, std::span<const Vector> training,
          double init_jitter = 0.0);

  StepResult step(const Observation& peaks);

  FilterKind kind() const { return kind_; }
  const FilterConfig& config() const { return cfg_; }
  const ScoringConfig& scoring() const { return scoring_; }
  const Ensemble& particles() const { return particles_; }
  std::size_t steps_taken() const { return step_; }

  /// Histogram of birth depths, index depth + 1 (index 0 counts -1).
  std::vector<int> depth_histogram() const;

  /// Structured-text checkpoint; restoring and stepping reproduces the
  /// uninterrupted run bit for bit.
  void save_checkpoint(std::ostream& out) const;
  static Tracker load_checkpoint(std::istream& in, std::shared_ptr<const manifold::PdTree> tree);
  void save_checkpoint(const std::filesystem::path& path) const;
  static Tracker load_checkpoint(const std::filesystem::path& path,
                                 std::shared_ptr<const manifold::PdTree> tree);

 private:
  Tracker() = default;

  FilterKind kind_ = FilterKind::sir;
  FilterConfig cfg_;
  ScoringConfig scoring_;
  std::shared_ptr<const manifold::PdTree> tree_;
  Ensemble particles_;
  Rng rng_;
  std::size_t step_ = 0;
};

}  // namespace tdoa::filters
