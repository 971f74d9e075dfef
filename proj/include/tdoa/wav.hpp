#pragma once

#include "tdoa/signal.hpp"

#include <filesystem>

namespace tdoa::signal {

struct WavAudio {
  double sample_rate_hz = 0.0;
  /// channels[c][n], samples scaled to [-1, 1) for PCM input.
  MultiChannel channels;
};

enum class WavFormat { pcm16, float32 };

/// Reads a RIFF/WAVE file holding 16-bit PCM or 32-bit float samples.
/// Throws std::runtime_error on I/O or format problems.
WavAudio read_wav(const std::filesystem::path& path);

void write_wav(const std::filesystem::path& path, const WavAudio& audio, WavFormat format);

}  // namespace tdoa::signal
