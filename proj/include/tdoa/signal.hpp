#pragma once

// GCC-PHAT correlation, z-scored peak extraction and argmax delay
// estimation for microphone pairs.
//
// Lag convention: for pair (i, j) the correlation is computed with
// channel j as the reference, so a positive lag means channel i hears the
// sound later than channel j. This makes the argmax lag equal the pair's
// delay t_i - t_j in samples.

#include "tdoa/pairs.hpp"

#include <span>
#include <stdexcept>
#include <vector>

namespace tdoa::signal {

struct FrameConfig {
  double sample_rate_hz = 16000.0;
  double frame_len_ms = 500.0;
  double overlap_ms = 25.0;
  int max_delay_samples = 1;

  int frame_samples() const;
  int hop_samples() const;
  int lag_count() const { return 2 * max_delay_samples + 1; }

  /// Throws std::invalid_argument on violated invariants.
  void validate() const;
};

struct PhatCorrelation {
  MicPair pair;
  int max_lag = 0;
  /// values[k] is R(k - max_lag).
  std::vector<double> values;
  /// Set when either input frame had no energy; values are then all zero.
  bool silent = false;

  double at(int lag) const { return values.at(static_cast<std::size_t>(lag + max_lag)); }
  double& at(int lag) { return values.at(static_cast<std::size_t>(lag + max_lag)); }
  int min_lag() const { return -max_lag; }

  static PhatCorrelation zeros(MicPair pair, int max_lag);
};

struct Peak {
  int lag = 0;
  double score = 0.0;

  friend bool operator==(const Peak&, const Peak&) = default;
};

struct PeakSet {
  MicPair pair;
  /// Strictly increasing lags, positive scores.
  std::vector<Peak> peaks;

  std::size_t count() const { return peaks.size(); }
  bool empty() const { return peaks.empty(); }
};

struct ZScoreConfig {
  double threshold_c = 2.0;
  int peak_cap = 5;

  void validate() const;
};

/// Thrown by tdoa_argmax when the correlation carries no estimate.
class NoEstimateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Phase-transform correlation of two equal-length frames over lags
/// [-max_delay_samples, +max_delay_samples]. A frame b that is a copy of a
/// delayed by d samples peaks at lag +d.
///
/// Frames are zero-padded to twice their length before the FFT so lags in
/// range never wrap. Bins with cross-power magnitude below 1e-12 are zeroed.
PhatCorrelation phat_correlate(std::span<const double> frame_a,
                               std::span<const double> frame_b,
                               const FrameConfig& cfg, MicPair pair = {0, 1});

/// Z(t) = max((R(t) - mean) / std - C, 0) over the whole lag range, then
/// keeps strict local maxima of Z, at most peak_cap of them (largest first).
/// A constant series yields an empty set.
PeakSet zscore_peaks(const PhatCorrelation& corr, const ZScoreConfig& cfg);

/// Lag of the maximum; ties go to the smallest |lag|, then to the negative
/// lag. Throws NoEstimateError on an all-zero correlation.
int tdoa_argmax(const PhatCorrelation& corr);

/// Channel-major audio: channels[c][n].
using MultiChannel = std::vector<std::vector<double>>;

/// One frame of all channels.
struct Frame {
  std::size_t start = 0;  // first sample index
  std::vector<std::span<const double>> channels;
};

/// Splits audio into frames of frame_samples() with hop hop_samples();
/// a trailing partial frame is dropped. The returned spans view `audio`.
std::vector<Frame> frame_stream(const MultiChannel& audio, const FrameConfig& cfg);

/// Correlations for every pair of the frame, canonical order.
std::vector<PhatCorrelation> correlate_pairs(const Frame& frame, const FrameConfig& cfg);

}  // namespace tdoa::signal
