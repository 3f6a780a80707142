#pragma once

#include <array>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "convoforge/audio.hpp"
#include "convoforge/common.hpp"
#include "convoforge/fft.hpp"
#include "convoforge/persona.hpp"
#include "convoforge/scene.hpp"

namespace convoforge::acoustics {

using persona::Role;
using scene::SceneTimeline;

// ----- Room model -----------------------------------------------------------

using Vec3 = std::array<double, 3>;

inline double distance(const Vec3& a, const Vec3& b) {
  const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

// Shoebox room for the image-source simulation. Default follows a typical
// small examination room: 4 x 2 m floor, 2.6 m ceiling.
struct RoomSpec {
  Vec3 dimensions = {4.0, 2.0, 2.6};
  double absorption = 0.35;  // energy absorption per wall hit, in (0, 1]
  int max_order = 12;
  double speed_of_sound = 343.0;
  std::vector<Vec3> sources;  // doctor first, then patient by convention
  Vec3 microphone = {2.0, 1.0, 1.2};

  void validate() const {
    for (double d : dimensions)
      if (d <= 0.0) throw ValidationError("room dimensions must be positive");
    if (!(absorption > 0.0 && absorption <= 1.0))
      throw ValidationError("absorption must be in (0, 1]");
    if (max_order < 0) throw ValidationError("max reflection order < 0");
    if (speed_of_sound <= 0.0)
      throw ValidationError("speed of sound must be positive");
    auto inside = [&](const Vec3& p) {
      for (int i = 0; i < 3; ++i)
        if (!(p[i] > 0.0 && p[i] < dimensions[i])) return false;
      return true;
    };
    if (!inside(microphone))
      throw ValidationError("microphone position outside room");
    for (const auto& s : sources)
      if (!inside(s)) throw ValidationError("source position outside room");
  }
};

// One mirrored virtual source.
struct ImageSource {
  Vec3 position;
  int reflections = 0;  // total wall hits
  double distance_m = 0.0;
};

namespace detail {

struct AxisImage {
  double coord;
  int reflections;
};

// Mirror images of coordinate s in [0, L]: s + 2nL carries |2n| hits,
// -s + 2nL carries |2n - 1|.
inline std::vector<AxisImage> axis_images(double s, double length,
                                          int max_order) {
  std::vector<AxisImage> out;
  const int n_cap = max_order / 2 + 1;
  for (int n = -n_cap; n <= n_cap; ++n) {
    const int k_even = std::abs(2 * n);
    if (k_even <= max_order)
      out.push_back({s + 2.0 * n * length, k_even});
    const int k_odd = std::abs(2 * n - 1);
    if (k_odd <= max_order)
      out.push_back({-s + 2.0 * n * length, k_odd});
  }
  return out;
}

}  // namespace detail

inline std::vector<ImageSource> image_sources(const RoomSpec& room,
                                              std::size_t source_index,
                                              int max_order) {
  room.validate();
  if (source_index >= room.sources.size())
    throw ValidationError("source index out of range");
  const Vec3& src = room.sources[source_index];
  const auto xs = detail::axis_images(src[0], room.dimensions[0], max_order);
  const auto ys = detail::axis_images(src[1], room.dimensions[1], max_order);
  const auto zs = detail::axis_images(src[2], room.dimensions[2], max_order);
  std::vector<ImageSource> images;
  for (const auto& x : xs) {
    for (const auto& y : ys) {
      const int kxy = x.reflections + y.reflections;
      if (kxy > max_order) continue;
      for (const auto& z : zs) {
        const int k = kxy + z.reflections;
        if (k > max_order) continue;
        ImageSource img;
        img.position = {x.coord, y.coord, z.coord};
        img.reflections = k;
        img.distance_m = distance(img.position, room.microphone);
        images.push_back(img);
      }
    }
  }
  return images;
}

// ----- RIR ---------------------------------------------------------------------

constexpr double kMinSourceMicDistance = 0.01;
constexpr int kSincHalfWidth = 40;  // taps each side of the arrival

// Image-source impulse response: order-k images contribute an impulse of
// amplitude (1 - a)^(k/2) / d at delay d/c, rendered with a Hann-windowed
// sinc so fractional delays land between samples.
inline AudioBuffer compute_rir(const RoomSpec& room, std::size_t source_index,
                               int sample_rate = 16000) {
  room.validate();
  const auto images = image_sources(room, source_index, room.max_order);
  double max_delay = 0.0;
  for (const auto& img : images)
    max_delay = std::max(max_delay, img.distance_m / room.speed_of_sound);
  AudioBuffer rir;
  rir.sample_rate = sample_rate;
  const std::size_t length =
      static_cast<std::size_t>(std::ceil(max_delay * sample_rate)) +
      kSincHalfWidth + 2;
  rir.samples.assign(length, 0.0);
  const double pi = 3.14159265358979323846;
  bool clamped = false;
  for (const auto& img : images) {
    double d = img.distance_m;
    if (d < kMinSourceMicDistance) {
      d = kMinSourceMicDistance;
      clamped = true;
    }
    const double delay = d / room.speed_of_sound * sample_rate;
    const double amp =
        std::pow(1.0 - room.absorption,
                 static_cast<double>(img.reflections) / 2.0) /
        d;
    const long long lo = std::max<long long>(
        0, static_cast<long long>(std::ceil(delay)) - kSincHalfWidth);
    const long long hi = std::min<long long>(
        static_cast<long long>(length) - 1,
        static_cast<long long>(std::floor(delay)) + kSincHalfWidth);
    for (long long n = lo; n <= hi; ++n) {
      const double x = static_cast<double>(n) - delay;
      const double sinc = x == 0.0 ? 1.0 : std::sin(pi * x) / (pi * x);
      const double window =
          0.5 * (1.0 + std::cos(pi * x / (kSincHalfWidth + 1)));
      rir.samples[static_cast<std::size_t>(n)] += amp * sinc * window;
    }
  }
  if (clamped)
    log_warn("source-microphone distance clamped to " +
             std::to_string(kMinSourceMicDistance) + " m");
  return rir;
}

inline double rir_energy(const AudioBuffer& rir) {
  double e = 0.0;
  for (double s : rir.samples) e += s * s;
  return e;
}

// ----- Augmentation spec ----------------------------------------------------------

enum class Codec { none, opus };

struct AugmentSpec {
  Codec codec = Codec::none;
  int bitrate_bps = 16000;
  std::map<Role, double> speaker_gains = {{Role::doctor, 1.0},
                                          {Role::patient, 0.25}};
  std::optional<double> noise_snr_db = 20.0;
  double normalize_peak = 0.95;  // applied by the render stage; <= 0 skips

  void validate() const {
    if (bitrate_bps <= 0) throw ValidationError("bitrate must be positive");
    for (const auto& [role, g] : speaker_gains)
      if (!(g > 0.0)) throw ValidationError("speaker gains must be positive");
  }
};

// ----- Scene rendering -------------------------------------------------------------

// Stems are returned alongside the mix so tests can re-measure the SNR and
// gain contracts on the rendered output.
struct RenderResult {
  AudioBuffer mix;
  AudioBuffer speech;
  AudioBuffer events;
  AudioBuffer noise;
};

using BufferResolver = std::function<AudioBuffer(const std::string& source)>;

inline RenderResult render_scene(const SceneTimeline& timeline,
                                 const std::map<Role, AudioBuffer>& rirs,
                                 const BufferResolver& resolve,
                                 const AudioBuffer& noise_bed,
                                 const AugmentSpec& spec,
                                 const AudioBuffer* event_rir = nullptr) {
  spec.validate();
  int sr = 0;
  for (const auto& [role, rir] : rirs) {
    if (sr == 0) sr = rir.sample_rate;
    if (rir.sample_rate != sr)
      throw ValidationError("render: RIR sample rates disagree");
  }
  if (sr == 0) throw ValidationError("render: no RIRs supplied");
  std::size_t rir_tail = 0;
  for (const auto& [role, rir] : rirs)
    rir_tail = std::max(rir_tail, rir.size());
  if (event_rir) rir_tail = std::max(rir_tail, event_rir->size());
  const std::size_t base_len =
      static_cast<std::size_t>(std::ceil(timeline.total_duration_s * sr)) +
      rir_tail;

  std::vector<double> speech(base_len, 0.0);
  std::vector<char> active(base_len, 0);
  for (const auto& seg : timeline.speech) {
    AudioBuffer dry = resolve(seg.source);
    if (dry.sample_rate != sr)
      throw ValidationError("render: segment " + seg.source +
                            " sample rate mismatch");
    auto rir_it = rirs.find(seg.speaker);
    if (rir_it == rirs.end())
      throw ValidationError("render: no RIR for speaker " +
                            persona::to_string(seg.speaker));
    const auto wet = convolve(dry.samples, rir_it->second.samples);
    const double gain = seg.gain * spec.speaker_gains.at(seg.speaker);
    const std::size_t at =
        static_cast<std::size_t>(std::llround(seg.onset_s * sr));
    mix_into(speech, wet, at, gain);
    for (std::size_t i = at; i < std::min(at + wet.size(), speech.size()); ++i)
      active[i] = 1;
  }

  std::vector<double> events(speech.size(), 0.0);
  const AudioBuffer* erir = event_rir;
  if (!erir) {
    auto it = rirs.find(Role::doctor);  // most events originate near the desk
    if (it != rirs.end()) erir = &it->second;
  }
  for (const auto& ev : timeline.events) {
    AudioBuffer clip = resolve(ev.source);
    if (clip.sample_rate != sr)
      throw ValidationError("render: event clip " + ev.source +
                            " sample rate mismatch");
    std::vector<double> wet =
        erir ? convolve(clip.samples, erir->samples) : clip.samples;
    const std::size_t at =
        static_cast<std::size_t>(std::llround(ev.onset_s * sr));
    mix_into(events, wet, at, ev.gain);
  }

  const std::size_t len = std::max(speech.size(), events.size());
  speech.resize(len, 0.0);
  events.resize(len, 0.0);
  active.resize(len, 0);

  std::vector<double> noise(len, 0.0);
  if (spec.noise_snr_db) {
    if (noise_bed.empty())
      throw ValidationError("render: SNR requested but no noise bed supplied");
    if (noise_bed.sample_rate != sr)
      throw ValidationError("render: noise bed sample rate mismatch");
    noise = loop_to_length(noise_bed.samples, len);
    double p_speech = 0.0, p_noise = 0.0;
    std::size_t n_active = 0;
    for (std::size_t i = 0; i < len; ++i) {
      if (!active[i]) continue;
      p_speech += speech[i] * speech[i];
      p_noise += noise[i] * noise[i];
      ++n_active;
    }
    if (n_active == 0 || p_speech <= 0.0)
      throw ValidationError(
          "render: silent speech track with finite SNR requested");
    if (p_noise <= 0.0)
      throw ValidationError("render: noise bed is silent over speech region");
    const double target_ratio = std::pow(10.0, *spec.noise_snr_db / 10.0);
    const double scale = std::sqrt(p_speech / (p_noise * target_ratio));
    for (auto& x : noise) x *= scale;
  }

  RenderResult out;
  out.speech.sample_rate = sr;
  out.speech.samples = std::move(speech);
  out.events.sample_rate = sr;
  out.events.samples = std::move(events);
  out.noise.sample_rate = sr;
  out.noise.samples = std::move(noise);
  out.mix.sample_rate = sr;
  out.mix.samples.resize(len);
  for (std::size_t i = 0; i < len; ++i)
    out.mix.samples[i] =
        out.speech.samples[i] + out.events.samples[i] + out.noise.samples[i];
  return out;
}

// Measured SNR over the speech-active region of a rendered result.
inline double measure_snr_db(const RenderResult& r) {
  double p_speech = 0.0, p_noise = 0.0;
  for (std::size_t i = 0; i < r.speech.samples.size(); ++i) {
    if (r.speech.samples[i] == 0.0) continue;
    p_speech += r.speech.samples[i] * r.speech.samples[i];
    p_noise += r.noise.samples[i] * r.noise.samples[i];
  }
  if (p_noise <= 0.0) throw ValidationError("no noise to measure");
  return 10.0 * std::log10(p_speech / p_noise);
}

// ----- Peak normalization -------------------------------------------------------

inline AudioBuffer peak_normalize(const AudioBuffer& buf, double target = 1.0) {
  const double peak = peak_abs(buf);
  if (peak <= 0.0)
    throw ValidationError("peak_normalize: all-zero buffer");
  AudioBuffer out = buf;
  const double scale = target / peak;
  for (auto& s : out.samples) s *= scale;
  return out;
}

// ----- Codec round trip -----------------------------------------------------------

struct CodecResult {
  AudioBuffer buffer;
  std::size_t encoded_bytes = 0;
  std::size_t raw_pcm_bytes = 0;
  std::string codec_name = "none";

  double compression_ratio() const {
    return encoded_bytes == 0
               ? 0.0
               : static_cast<double>(raw_pcm_bytes) /
                     static_cast<double>(encoded_bytes);
  }
};

namespace detail {

inline bool command_exists(const std::string& cmd) {
  const std::string probe = "command -v " + cmd + " >/dev/null 2>&1";
  return std::system(probe.c_str()) == 0;
}

inline int run_quiet(const std::string& cmd) {
  return std::system((cmd + " >/dev/null 2>&1").c_str());
}

}  // namespace detail

// External-tool Opus adapter behind the narrow encode/decode interface.
// Probes opusenc/opusdec first, then ffmpeg.
class OpusShellCodec {
 public:
  static bool available() {
    return (detail::command_exists("opusenc") &&
            detail::command_exists("opusdec")) ||
           detail::command_exists("ffmpeg");
  }

  static CodecResult roundtrip(const AudioBuffer& buf, int bitrate_bps) {
    namespace fs = std::filesystem;
    if (!available())
      throw DependencyError(
          "opus codec unavailable: neither opusenc/opusdec nor ffmpeg found");
    const fs::path dir =
        fs::temp_directory_path() /
        ("cf_opus_" + hex64(fnv1a64(std::to_string(
                          std::chrono::steady_clock::now().time_since_epoch().count()))));
    fs::create_directories(dir);
    const fs::path in = dir / "in.wav";
    const fs::path enc = dir / "enc.opus";
    const fs::path dec = dir / "dec.wav";
    write_wav_file(in, buf);
    const int kbps = std::max(1, bitrate_bps / 1000);
    int rc;
    if (detail::command_exists("opusenc")) {
      rc = detail::run_quiet("opusenc --quiet --bitrate " +
                             std::to_string(kbps) + " " + in.string() + " " +
                             enc.string());
      if (rc == 0)
        rc = detail::run_quiet("opusdec --quiet --rate " +
                               std::to_string(buf.sample_rate) + " " +
                               enc.string() + " " + dec.string());
    } else {
      rc = detail::run_quiet("ffmpeg -y -i " + in.string() +
                             " -c:a libopus -b:a " + std::to_string(kbps) +
                             "k " + enc.string());
      if (rc == 0)
        rc = detail::run_quiet("ffmpeg -y -i " + enc.string() + " -ar " +
                               std::to_string(buf.sample_rate) + " -ac 1 " +
                               dec.string());
    }
    if (rc != 0) {
      std::error_code ec;
      fs::remove_all(dir, ec);
      throw TransportError("opus codec round trip failed (exit " +
                           std::to_string(rc) + ")");
    }
    CodecResult result;
    result.codec_name = "opus";
    result.encoded_bytes = static_cast<std::size_t>(fs::file_size(enc));
    result.raw_pcm_bytes = buf.samples.size() * 2;
    result.buffer = read_wav_file(dec);
    std::error_code ec;
    fs::remove_all(dir, ec);
    return result;
  }
};

inline CodecResult codec_roundtrip(const AudioBuffer& buf,
                                   const AugmentSpec& spec) {
  spec.validate();
  if (spec.codec == Codec::none) {
    CodecResult result;
    result.buffer = buf;
    result.raw_pcm_bytes = buf.samples.size() * 2;
    result.encoded_bytes = result.raw_pcm_bytes;
    return result;
  }
  CodecResult result = OpusShellCodec::roundtrip(buf, spec.bitrate_bps);
  const double delta =
      std::fabs(result.buffer.duration_s() - buf.duration_s());
  if (delta > 0.020)
    log_warn("codec round trip changed duration by " + std::to_string(delta) +
             " s");
  return result;
}

}  // namespace convoforge::acoustics
