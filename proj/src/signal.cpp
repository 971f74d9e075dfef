#include "tdoa/signal.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdlib>
#include <memory>
#include <mutex>
#include <string>

namespace tdoa::signal {

namespace {

constexpr double kPhatFloor = 1e-12;

// FFTW's planner is not re-entrant; execution of distinct plans is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};
template <class T>
using FftwBuffer = std::unique_ptr<T[], FftwFree>;

template <class T>
FftwBuffer<T> fftw_alloc(std::size_t n) {
  auto* p = static_cast<T*>(fftw_malloc(sizeof(T) * n));
  if (p == nullptr) throw std::bad_alloc();
  return FftwBuffer<T>(p);
}

class Plan {
 public:
  explicit Plan(fftw_plan p) : plan_(p) {}
  ~Plan() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan_);
  }
  Plan(const Plan&) = delete;
  Plan& operator=(const Plan&) = delete;
  void execute() const { fftw_execute(plan_); }

 private:
  fftw_plan plan_;
};

bool all_zero(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(), [](double v) { return v == 0.0; });
}

}  // namespace

int FrameConfig::frame_samples() const {
  return static_cast<int>(std::lround(sample_rate_hz * frame_len_ms / 1000.0));
}

int FrameConfig::hop_samples() const {
  return frame_samples() - static_cast<int>(std::lround(sample_rate_hz * overlap_ms / 1000.0));
}

void FrameConfig::validate() const {
  if (!(sample_rate_hz > 0.0)) throw std::invalid_argument("sample_rate_hz must be positive");
  if (!(frame_len_ms > 0.0)) throw std::invalid_argument("frame_len_ms must be positive");
  if (!(overlap_ms >= 0.0) || !(overlap_ms < frame_len_ms)) {
    throw std::invalid_argument("overlap_ms must be in [0, frame_len_ms)");
  }
  if (max_delay_samples < 1) throw std::invalid_argument("max_delay_samples must be >= 1");
  if (frame_samples() < 2 * max_delay_samples) {
    throw std::invalid_argument("frame shorter than 2 * max_delay_samples");
  }
  if (hop_samples() < 1) throw std::invalid_argument("hop must be at least one sample");
}

PhatCorrelation PhatCorrelation::zeros(MicPair pair, int max_lag) {
  PhatCorrelation c;
  c.pair = pair;
  c.max_lag = max_lag;
  c.values.assign(static_cast<std::size_t>(2 * max_lag + 1), 0.0);
  return c;
}

void ZScoreConfig::validate() const {
  if (!(threshold_c >= 0.0)) throw std::invalid_argument("threshold_c must be >= 0");
  if (peak_cap < 1) throw std::invalid_argument("peak_cap must be >= 1");
}

PhatCorrelation phat_correlate(std::span<const double> frame_a,
                               std::span<const double> frame_b,
                               const FrameConfig& cfg, MicPair pair) {
  const int max_lag = cfg.max_delay_samples;
  if (max_lag < 1) throw std::invalid_argument("phat_correlate: max_delay_samples must be >= 1");
  if (frame_a.size() != frame_b.size()) {
    throw std::invalid_argument("phat_correlate: frames differ in length");
  }
  const std::size_t len = frame_a.size();
  if (len < static_cast<std::size_t>(2 * max_lag)) {
    throw std::invalid_argument("phat_correlate: frame shorter than 2 * max_delay_samples");
  }
  for (std::size_t n = 0; n < len; ++n) {
    if (!std::isfinite(frame_a[n]) || !std::isfinite(frame_b[n])) {
      throw std::invalid_argument("phat_correlate: non-finite sample");
    }
  }

  PhatCorrelation out = PhatCorrelation::zeros(pair, max_lag);
  if (all_zero(frame_a) || all_zero(frame_b)) {
    out.silent = true;
    return out;
  }

  const std::size_t nfft = 2 * len;
  const std::size_t nbins = nfft / 2 + 1;
  auto time_a = fftw_alloc<double>(nfft);
  auto time_b = fftw_alloc<double>(nfft);
  auto spec_a = fftw_alloc<fftw_complex>(nbins);
  auto spec_b = fftw_alloc<fftw_complex>(nbins);

  std::unique_ptr<Plan> fwd_a, fwd_b, inv;
  {
    std::lock_guard lock(planner_mutex());
    const int n = static_cast<int>(nfft);
    fwd_a = std::make_unique<Plan>(fftw_plan_dft_r2c_1d(n, time_a.get(), spec_a.get(), FFTW_ESTIMATE));
    fwd_b = std::make_unique<Plan>(fftw_plan_dft_r2c_1d(n, time_b.get(), spec_b.get(), FFTW_ESTIMATE));
    inv = std::make_unique<Plan>(fftw_plan_dft_c2r_1d(n, spec_a.get(), time_a.get(), FFTW_ESTIMATE));
  }

  std::fill_n(time_a.get(), nfft, 0.0);
  std::fill_n(time_b.get(), nfft, 0.0);
  std::copy(frame_a.begin(), frame_a.end(), time_a.get());
  std::copy(frame_b.begin(), frame_b.end(), time_b.get());
  fwd_a->execute();
  fwd_b->execute();

  // conj(A) * B, normalized to unit magnitude; result written over spec_a.
  for (std::size_t k = 0; k < nbins; ++k) {
    const std::complex<double> a(spec_a[k][0], spec_a[k][1]);
    const std::complex<double> b(spec_b[k][0], spec_b[k][1]);
    std::complex<double> cross = std::conj(a) * b;
    const double mag = std::abs(cross);
    cross = mag < kPhatFloor ? std::complex<double>(0.0, 0.0) : cross / mag;
    spec_a[k][0] = cross.real();
    spec_a[k][1] = cross.imag();
  }
  inv->execute();

  const double scale = 1.0 / static_cast<double>(nfft);
  for (int lag = -max_lag; lag <= max_lag; ++lag) {
    const std::size_t idx = lag >= 0 ? static_cast<std::size_t>(lag)
                                     : nfft - static_cast<std::size_t>(-lag);
    out.at(lag) = time_a[idx] * scale;
  }
  return out;
}

PeakSet zscore_peaks(const PhatCorrelation& corr, const ZScoreConfig& cfg) {
  cfg.validate();
  PeakSet result;
  result.pair = corr.pair;
  const auto& r = corr.values;
  const std::size_t n = r.size();
  if (n == 0) return result;

  double mean = 0.0;
  for (double v : r) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : r) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n);
  const double sd = std::sqrt(var);
  if (!(sd > 0.0)) return result;

  std::vector<double> z(n);
  for (std::size_t k = 0; k < n; ++k) {
    z[k] = std::max((r[k] - mean) / sd - cfg.threshold_c, 0.0);
  }

  std::vector<Peak> candidates;
  for (std::size_t k = 0; k < n; ++k) {
    if (z[k] <= 0.0) continue;
    const bool above_left = k == 0 || z[k] > z[k - 1];
    const bool above_right = k + 1 == n || z[k] > z[k + 1];
    if (above_left && above_right) {
      candidates.push_back({static_cast<int>(k) - corr.max_lag, z[k]});
    }
  }

  const auto cap = static_cast<std::size_t>(cfg.peak_cap);
  if (candidates.size() > cap) {
    std::stable_sort(candidates.begin(), candidates.end(), [](const Peak& a, const Peak& b) {
      if (a.score != b.score) return a.score > b.score;
      return std::abs(a.lag) < std::abs(b.lag);
    });
    candidates.resize(cap);
    std::sort(candidates.begin(), candidates.end(),
              [](const Peak& a, const Peak& b) { return a.lag < b.lag; });
  }
  result.peaks = std::move(candidates);
  return result;
}

int tdoa_argmax(const PhatCorrelation& corr) {
  if (corr.values.empty() ||
      std::all_of(corr.values.begin(), corr.values.end(), [](double v) { return v == 0.0; })) {
    throw NoEstimateError("tdoa_argmax: correlation is all zero");
  }
  int best = corr.min_lag();
  double best_val = corr.at(best);
  for (int lag = corr.min_lag() + 1; lag <= corr.max_lag; ++lag) {
    const double v = corr.at(lag);
    if (v > best_val) {
      best = lag;
      best_val = v;
    } else if (v == best_val) {
      // Ascending scan: a later equal value wins only with strictly smaller |lag|.
      if (std::abs(lag) < std::abs(best)) best = lag;
    }
  }
  return best;
}

std::vector<Frame> frame_stream(const MultiChannel& audio, const FrameConfig& cfg) {
  std::vector<Frame> frames;
  if (audio.empty()) return frames;
  const std::size_t len = audio.front().size();
  for (const auto& ch : audio) {
    if (ch.size() != len) throw std::invalid_argument("frame_stream: channels differ in length");
  }
  const int f = cfg.frame_samples();
  const int h = cfg.hop_samples();
  if (f < 1 || h < 1) throw std::invalid_argument("frame_stream: bad frame or hop size");
  const auto flen = static_cast<std::size_t>(f);
  for (std::size_t start = 0; start + flen <= len; start += static_cast<std::size_t>(h)) {
    Frame fr;
    fr.start = start;
    for (const auto& ch : audio) fr.channels.emplace_back(ch.data() + start, flen);
    frames.push_back(std::move(fr));
  }
  return frames;
}

std::vector<PhatCorrelation> correlate_pairs(const Frame& frame, const FrameConfig& cfg) {
  const int n = static_cast<int>(frame.channels.size());
  std::vector<PhatCorrelation> out;
  out.reserve(static_cast<std::size_t>(pair_count(n)));
  for (const MicPair& p : canonical_pairs(n)) {
    // Reference channel j, so lag > 0 means channel i lags channel j.
    out.push_back(phat_correlate(frame.channels[static_cast<std::size_t>(p.j)],
                                 frame.channels[static_cast<std::size_t>(p.i)], cfg, p));
  }
  return out;
}

}  // namespace tdoa::signal
