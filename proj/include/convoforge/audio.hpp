#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "convoforge/common.hpp"
#include "convoforge/io.hpp"
#include "convoforge/rng.hpp"

namespace convoforge {

// Mono sample sequence, nominal range [-1, 1]. The unit of all DSP.
struct AudioBuffer {
  std::vector<double> samples;
  int sample_rate = 16000;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  double duration_s() const {
    return sample_rate > 0
               ? static_cast<double>(samples.size()) / sample_rate
               : 0.0;
  }
};

inline void check_finite(const AudioBuffer& buf, const char* what) {
  if (buf.sample_rate <= 0)
    throw ValidationError(std::string(what) + ": sample_rate must be > 0");
  for (double s : buf.samples) {
    if (!std::isfinite(s))
      throw ValidationError(std::string(what) + ": non-finite sample");
  }
}

inline double peak_abs(const AudioBuffer& buf) {
  double peak = 0.0;
  for (double s : buf.samples) peak = std::max(peak, std::fabs(s));
  return peak;
}

inline double rms(const AudioBuffer& buf) {
  if (buf.samples.empty()) return 0.0;
  double acc = 0.0;
  for (double s : buf.samples) acc += s * s;
  return std::sqrt(acc / static_cast<double>(buf.samples.size()));
}

inline double mean_power(const std::vector<double>& samples) {
  if (samples.empty()) return 0.0;
  double acc = 0.0;
  for (double s : samples) acc += s * s;
  return acc / static_cast<double>(samples.size());
}

// dst[at + i] += src[i] * gain, growing dst as needed.
inline void mix_into(std::vector<double>& dst, const std::vector<double>& src,
                     std::size_t at, double gain) {
  if (dst.size() < at + src.size()) dst.resize(at + src.size(), 0.0);
  for (std::size_t i = 0; i < src.size(); ++i) dst[at + i] += src[i] * gain;
}

// ----- WAV I/O: 16-bit PCM mono, the published-audio format -----

namespace detail {
inline void put_u32(std::string& s, std::uint32_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
  s.push_back(static_cast<char>((v >> 16) & 0xff));
  s.push_back(static_cast<char>((v >> 24) & 0xff));
}
inline void put_u16(std::string& s, std::uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
}
inline std::uint32_t get_u32(std::string_view s, std::size_t at) {
  return static_cast<std::uint8_t>(s[at]) |
         static_cast<std::uint32_t>(static_cast<std::uint8_t>(s[at + 1])) << 8 |
         static_cast<std::uint32_t>(static_cast<std::uint8_t>(s[at + 2])) << 16 |
         static_cast<std::uint32_t>(static_cast<std::uint8_t>(s[at + 3])) << 24;
}
inline std::uint16_t get_u16(std::string_view s, std::size_t at) {
  return static_cast<std::uint16_t>(
      static_cast<std::uint8_t>(s[at]) |
      static_cast<std::uint16_t>(static_cast<std::uint8_t>(s[at + 1])) << 8);
}
}  // namespace detail

inline std::string encode_wav(const AudioBuffer& buf) {
  const std::uint32_t n = static_cast<std::uint32_t>(buf.samples.size());
  const std::uint32_t data_bytes = n * 2;
  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  detail::put_u32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  detail::put_u32(out, 16);
  detail::put_u16(out, 1);  // PCM
  detail::put_u16(out, 1);  // mono
  detail::put_u32(out, static_cast<std::uint32_t>(buf.sample_rate));
  detail::put_u32(out, static_cast<std::uint32_t>(buf.sample_rate) * 2);
  detail::put_u16(out, 2);
  detail::put_u16(out, 16);
  out += "data";
  detail::put_u32(out, data_bytes);
  for (double s : buf.samples) {
    double c = std::max(-1.0, std::min(1.0, s));
    auto v = static_cast<std::int16_t>(std::lround(c * 32767.0));
    detail::put_u16(out, static_cast<std::uint16_t>(v));
  }
  return out;
}

inline AudioBuffer decode_wav(std::string_view data) {
  if (data.size() < 44 || data.substr(0, 4) != "RIFF" ||
      data.substr(8, 4) != "WAVE")
    throw IoError("not a RIFF/WAVE file");
  std::size_t pos = 12;
  int sample_rate = 0;
  int channels = 0;
  int bits = 0;
  AudioBuffer buf;
  bool got_fmt = false, got_data = false;
  while (pos + 8 <= data.size()) {
    std::string_view id = data.substr(pos, 4);
    std::uint32_t len = detail::get_u32(data, pos + 4);
    pos += 8;
    if (pos + len > data.size()) throw IoError("truncated WAV chunk");
    if (id == "fmt ") {
      if (len < 16) throw IoError("short fmt chunk");
      std::uint16_t format = detail::get_u16(data, pos);
      channels = detail::get_u16(data, pos + 2);
      sample_rate = static_cast<int>(detail::get_u32(data, pos + 4));
      bits = detail::get_u16(data, pos + 14);
      if (format != 1 || bits != 16)
        throw IoError("unsupported WAV encoding (need 16-bit PCM)");
      got_fmt = true;
    } else if (id == "data") {
      if (!got_fmt) throw IoError("data chunk before fmt");
      std::size_t frames = len / 2 / static_cast<std::size_t>(channels);
      buf.samples.resize(frames);
      for (std::size_t i = 0; i < frames; ++i) {
        // Downmix by taking channel 0; published audio is mono anyway.
        auto raw = static_cast<std::int16_t>(
            detail::get_u16(data, pos + i * 2 * channels));
        buf.samples[i] = static_cast<double>(raw) / 32767.0;
      }
      got_data = true;
    }
    pos += len + (len & 1);
  }
  if (!got_fmt || !got_data) throw IoError("missing fmt or data chunk");
  buf.sample_rate = sample_rate;
  return buf;
}

inline void write_wav_file(const std::filesystem::path& path,
                           const AudioBuffer& buf) {
  io::write_file_atomic(path, encode_wav(buf));
}

inline AudioBuffer read_wav_file(const std::filesystem::path& path) {
  return decode_wav(io::read_file(path));
}

// ----- Procedural sources (mock TTS words, event clips, fallback noise) ---

inline AudioBuffer tone_burst(double freq_hz, double dur_s, int sample_rate,
                              double amp, double fade_s = 0.010) {
  AudioBuffer buf;
  buf.sample_rate = sample_rate;
  const std::size_t n =
      static_cast<std::size_t>(std::llround(dur_s * sample_rate));
  const std::size_t fade =
      std::min(static_cast<std::size_t>(std::llround(fade_s * sample_rate)),
               n / 2);
  buf.samples.resize(n);
  const double w = 2.0 * 3.14159265358979323846 * freq_hz / sample_rate;
  for (std::size_t i = 0; i < n; ++i) {
    double env = 1.0;
    if (fade > 0) {
      if (i < fade)
        env = 0.5 - 0.5 * std::cos(3.14159265358979323846 * i / fade);
      else if (i >= n - fade)
        env = 0.5 - 0.5 * std::cos(3.14159265358979323846 * (n - 1 - i) / fade);
    }
    buf.samples[i] = amp * env * std::sin(w * static_cast<double>(i));
  }
  return buf;
}

// Pink-ish noise (Paul Kellet filter) with a gentle band emphasis around
// 50-500 Hz, the synthetic stand-in for an HVAC recording.
inline AudioBuffer synth_hvac_noise(double dur_s, int sample_rate,
                                    std::uint64_t seed, double amp = 0.1) {
  AudioBuffer buf;
  buf.sample_rate = sample_rate;
  const std::size_t n =
      static_cast<std::size_t>(std::llround(dur_s * sample_rate));
  buf.samples.resize(n);
  Rng rng(seed);
  double b0 = 0, b1 = 0, b2 = 0, b3 = 0, b4 = 0, b5 = 0, b6 = 0;
  double lp = 0.0, lp2 = 0.0;
  // One-pole low-pass pair approximating the 50-500 Hz emphasis.
  const double a_hi = std::exp(-2.0 * 3.14159265358979323846 * 500.0 / sample_rate);
  const double a_lo = std::exp(-2.0 * 3.14159265358979323846 * 50.0 / sample_rate);
  for (std::size_t i = 0; i < n; ++i) {
    const double white = rng.uniform(-1.0, 1.0);
    b0 = 0.99886 * b0 + white * 0.0555179;
    b1 = 0.99332 * b1 + white * 0.0750759;
    b2 = 0.96900 * b2 + white * 0.1538520;
    b3 = 0.86650 * b3 + white * 0.3104856;
    b4 = 0.55000 * b4 + white * 0.5329522;
    b5 = -0.7616 * b5 - white * 0.0168980;
    const double pink =
        (b0 + b1 + b2 + b3 + b4 + b5 + b6 + white * 0.5362) * 0.11;
    b6 = white * 0.115926;
    lp = a_hi * lp + (1.0 - a_hi) * pink;       // keep < 500 Hz
    lp2 = a_lo * lp2 + (1.0 - a_lo) * lp;       // floor < 50 Hz
    buf.samples[i] = amp * (lp - 0.5 * lp2);
  }
  return buf;
}

// Loop or truncate a noise bed to an exact sample count.
inline std::vector<double> loop_to_length(const std::vector<double>& src,
                                          std::size_t n) {
  std::vector<double> out(n, 0.0);
  if (src.empty()) return out;
  for (std::size_t i = 0; i < n; ++i) out[i] = src[i % src.size()];
  return out;
}

}  // namespace convoforge
