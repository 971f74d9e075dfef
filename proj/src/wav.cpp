#include "tdoa/wav.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>

namespace tdoa::signal {

namespace {

static_assert(std::endian::native == std::endian::little, "WAV I/O assumes a little-endian host");

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

template <class T>
T read_le(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

template <class T>
void put_le(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

}  // namespace

WavAudio read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || bytes.compare(0, 4, "RIFF") != 0 || bytes.compare(8, 4, "WAVE") != 0) {
    throw std::runtime_error(path.string() + ": not a RIFF/WAVE file");
  }

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const char* data = nullptr;
  std::size_t data_len = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::string id = bytes.substr(pos, 4);
    const auto size = read_le<std::uint32_t>(bytes.data() + pos + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) throw std::runtime_error(path.string() + ": truncated chunk " + id);
    if (id == "fmt ") {
      if (size < 16) throw std::runtime_error(path.string() + ": short fmt chunk");
      format = read_le<std::uint16_t>(bytes.data() + body);
      channels = read_le<std::uint16_t>(bytes.data() + body + 2);
      rate = read_le<std::uint32_t>(bytes.data() + body + 4);
      bits = read_le<std::uint16_t>(bytes.data() + body + 14);
      if (format == kFormatExtensible && size >= 26) {
        format = read_le<std::uint16_t>(bytes.data() + body + 24);
      }
    } else if (id == "data") {
      data = bytes.data() + body;
      data_len = size;
    }
    pos = body + size + (size & 1u);
  }

  if (channels == 0 || rate == 0) throw std::runtime_error(path.string() + ": missing fmt chunk");
  if (data == nullptr) throw std::runtime_error(path.string() + ": missing data chunk");
  const bool pcm16 = format == kFormatPcm && bits == 16;
  const bool f32 = format == kFormatFloat && bits == 32;
  if (!pcm16 && !f32) {
    throw std::runtime_error(path.string() + ": only 16-bit PCM and 32-bit float are supported");
  }

  const std::size_t width = bits / 8;
  const std::size_t frames = data_len / (width * channels);
  WavAudio audio;
  audio.sample_rate_hz = rate;
  audio.channels.assign(channels, std::vector<double>(frames));
  for (std::size_t n = 0; n < frames; ++n) {
    for (std::size_t c = 0; c < channels; ++c) {
      const char* p = data + (n * channels + c) * width;
      audio.channels[c][n] = pcm16 ? read_le<std::int16_t>(p) / 32768.0
                                   : static_cast<double>(read_le<float>(p));
    }
  }
  return audio;
}

void write_wav(const std::filesystem::path& path, const WavAudio& audio, WavFormat format) {
  if (audio.channels.empty()) throw std::invalid_argument("write_wav: no channels");
  const std::size_t frames = audio.channels.front().size();
  const auto nch = static_cast<std::uint16_t>(audio.channels.size());
  const std::uint16_t bits = format == WavFormat::pcm16 ? 16 : 32;
  const std::uint32_t data_len = static_cast<std::uint32_t>(frames * nch * (bits / 8));
  const auto rate = static_cast<std::uint32_t>(std::lround(audio.sample_rate_hz));

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write("RIFF", 4);
  put_le<std::uint32_t>(out, 36 + data_len);
  out.write("WAVEfmt ", 8);
  put_le<std::uint32_t>(out, 16);
  put_le<std::uint16_t>(out, format == WavFormat::pcm16 ? kFormatPcm : kFormatFloat);
  put_le<std::uint16_t>(out, nch);
  put_le<std::uint32_t>(out, rate);
  put_le<std::uint32_t>(out, rate * nch * (bits / 8));
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(nch * (bits / 8)));
  put_le<std::uint16_t>(out, bits);
  out.write("data", 4);
  put_le<std::uint32_t>(out, data_len);
  for (std::size_t n = 0; n < frames; ++n) {
    for (const auto& ch : audio.channels) {
      if (format == WavFormat::pcm16) {
        const double s = std::clamp(ch.at(n), -1.0, 32767.0 / 32768.0);
        put_le<std::int16_t>(out, static_cast<std::int16_t>(std::lround(s * 32768.0)));
      } else {
        put_le<float>(out, static_cast<float>(ch.at(n)));
      }
    }
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace tdoa::signal
