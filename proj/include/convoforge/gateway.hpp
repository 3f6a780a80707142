#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "convoforge/audio.hpp"
#include "convoforge/common.hpp"
#include "convoforge/io.hpp"
#include "convoforge/rng.hpp"
#include "convoforge/text.hpp"

namespace convoforge::gateway {

using nlohmann::json;

// ----- Requests ------------------------------------------------------------

struct ChatMessage {
  std::string role;  // system | user | assistant
  std::string content;
};

struct ChatRequest {
  std::vector<ChatMessage> messages;
  double temperature = 0.8;
  int max_tokens = 1024;
  std::optional<std::uint64_t> seed;
  // Mock-routing hint; never serialized to the wire.
  std::string tag;

  void validate() const {
    if (messages.empty()) throw ValidationError("chat: empty message list");
    if (temperature < 0.0)
      throw ValidationError("chat: negative temperature");
    std::size_t start = 0;
    if (messages[0].role == "system") start = 1;
    std::string prev;
    for (std::size_t i = start; i < messages.size(); ++i) {
      const auto& role = messages[i].role;
      if (role != "user" && role != "assistant")
        throw ValidationError("chat: bad role '" + role + "' at " +
                              std::to_string(i));
      if (role == prev)
        throw ValidationError("chat: consecutive '" + role + "' messages");
      prev = role;
    }
  }

  json wire_json(const std::string& model) const {
    json msgs = json::array();
    for (const auto& m : messages)
      msgs.push_back({{"role", m.role}, {"content", m.content}});
    json j{{"model", model},
           {"messages", msgs},
           {"temperature", temperature},
           {"max_tokens", max_tokens}};
    if (seed) j["seed"] = *seed;
    return j;
  }

  // Stable content key for fixtures and mock seeding; tag excluded so that
  // wire-identical requests share fixtures.
  std::string canonical() const { return wire_json("-").dump(); }
  std::uint64_t content_hash() const { return fnv1a64(canonical()); }
};

struct TtsRequest {
  std::string text;
  AudioBuffer voice_reference;  // ~30 s normalized sample
  std::string voice_id;         // bank entry id, used by remote dialects
  int sample_rate = 16000;

  void validate() const {
    if (trim(text).empty()) throw ValidationError("tts: empty text");
    if (voice_reference.empty())
      throw ValidationError("tts: voice reference has zero duration");
    if (sample_rate <= 0) throw ValidationError("tts: bad sample rate");
  }

  std::string canonical() const {
    json j{{"text", text},
           {"voice_id", voice_id},
           {"sample_rate", sample_rate},
           {"ref_digest", hex64(fnv1a64(std::string_view(
                              reinterpret_cast<const char*>(
                                  voice_reference.samples.data()),
                              voice_reference.samples.size() *
                                  sizeof(double))))}};
    return j.dump();
  }
  std::uint64_t content_hash() const { return fnv1a64(canonical()); }
};

// Per-token timing within one utterance.
struct AlignmentResult {
  struct Token {
    std::string text;
    double onset_s = 0.0;
    double duration_s = 0.0;
  };
  std::vector<Token> tokens;

  void validate(double utterance_duration_s) const {
    double prev = 0.0;
    for (const auto& t : tokens) {
      if (t.onset_s < prev - 1e-9)
        throw ValidationError("alignment: onsets must be non-decreasing");
      if (t.onset_s + t.duration_s > utterance_duration_s + 1e-6)
        throw ValidationError("alignment: token extends past utterance end");
      prev = t.onset_s;
    }
  }
};

// ----- Backend contracts -----------------------------------------------------

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual std::string complete(const ChatRequest& request) = 0;
  virtual std::string name() const = 0;
};

class TtsBackend {
 public:
  virtual ~TtsBackend() = default;
  virtual AudioBuffer synthesize(const TtsRequest& request) = 0;
  virtual std::string name() const = 0;
};

class AlignBackend {
 public:
  virtual ~AlignBackend() = default;
  virtual AlignmentResult align(const std::string& text,
                                const AudioBuffer& audio) = 0;
  virtual std::string name() const = 0;
};

// ----- Retry / concurrency ---------------------------------------------------

struct RetryPolicy {
  int attempts = 3;
  std::vector<double> backoff_s = {1.0, 4.0};
  double chat_timeout_s = 120.0;
  double tts_timeout_s = 300.0;
};

// Caps in-flight requests per backend so one model server is not overloaded.
class ConcurrencyLimiter {
 public:
  explicit ConcurrencyLimiter(int limit) : limit_(limit) {}

  class Slot {
   public:
    explicit Slot(ConcurrencyLimiter* l) : l_(l) {
      if (l_) l_->acquire();
    }
    ~Slot() {
      if (l_) l_->release();
    }
    Slot(const Slot&) = delete;
    Slot& operator=(const Slot&) = delete;

   private:
    ConcurrencyLimiter* l_;
  };

 private:
  void acquire() {
    std::unique_lock<std::mutex> lock(mu_);
    cv_.wait(lock, [&] { return active_ < limit_; });
    ++active_;
  }
  void release() {
    {
      std::lock_guard<std::mutex> lock(mu_);
      --active_;
    }
    cv_.notify_one();
  }

  std::mutex mu_;
  std::condition_variable cv_;
  int limit_;
  int active_ = 0;
};

namespace detail {
// Injectable sleeper so retry tests do not wall-clock wait.
inline std::function<void(double)>& sleeper() {
  static std::function<void(double)> fn = [](double s) {
    std::this_thread::sleep_for(std::chrono::duration<double>(s));
  };
  return fn;
}
}  // namespace detail

// Bounded-backoff retry around one backend call.
template <typename Fn>
auto with_retries(const RetryPolicy& policy, const std::string& what, Fn&& fn)
    -> decltype(fn()) {
  std::string last_error;
  for (int attempt = 1; attempt <= policy.attempts; ++attempt) {
    try {
      return fn();
    } catch (const TransportError& e) {
      last_error = e.what();
      if (attempt == policy.attempts) break;
      const auto& b = policy.backoff_s;
      const double wait =
          b.empty() ? 0.0
                    : b[std::min<std::size_t>(attempt - 1, b.size() - 1)];
      log_warn(what + " attempt " + std::to_string(attempt) + " failed (" +
               last_error + "), retrying in " + std::to_string(wait) + "s");
      if (wait > 0.0) detail::sleeper()(wait);
    }
  }
  throw TransportError(what + " failed after " +
                       std::to_string(policy.attempts) +
                       " attempts: " + last_error);
}

// ----- Gateway facade --------------------------------------------------------

struct AuditLogger {
  std::filesystem::path dir;
  void log_exchange(const std::string& kind, const std::string& request,
                    const std::string& response) const {
    if (dir.empty()) return;
    const std::string key = hex64(fnv1a64(request));
    json j{{"kind", kind}, {"request", request}, {"response", response}};
    io::write_file_atomic(dir / (kind + "-" + key + ".json"), j.dump(2));
  }
};

class Gateway {
 public:
  Gateway() = default;
  Gateway(std::shared_ptr<ChatBackend> chat, std::shared_ptr<TtsBackend> tts,
          RetryPolicy policy = {}, int concurrency_limit = 4)
      : chat_(std::move(chat)),
        tts_(std::move(tts)),
        policy_(policy),
        limiter_(std::make_shared<ConcurrencyLimiter>(concurrency_limit)) {}

  std::string chat(const ChatRequest& request) const {
    request.validate();
    if (!chat_) throw ConfigError("no chat backend configured");
    ConcurrencyLimiter::Slot slot(limiter_.get());
    auto reply = with_retries(policy_, "chat(" + chat_->name() + ")",
                              [&] { return chat_->complete(request); });
    audit_.log_exchange("chat", request.canonical(), reply);
    return reply;
  }

  AudioBuffer synthesize(const TtsRequest& request) const {
    request.validate();
    if (!tts_) throw ConfigError("no tts backend configured");
    ConcurrencyLimiter::Slot slot(limiter_.get());
    auto buf = with_retries(policy_, "tts(" + tts_->name() + ")", [&] {
      AudioBuffer out = tts_->synthesize(request);
      if (out.empty())
        throw TransportError("tts returned zero-length audio");
      return out;
    });
    check_finite(buf, "tts output");
    return buf;
  }

  std::shared_ptr<AlignBackend> aligner;  // optional
  void set_audit_dir(const std::filesystem::path& dir) { audit_.dir = dir; }
  const RetryPolicy& policy() const { return policy_; }
  bool has_chat() const { return static_cast<bool>(chat_); }
  bool has_tts() const { return static_cast<bool>(tts_); }

 private:
  std::shared_ptr<ChatBackend> chat_;
  std::shared_ptr<TtsBackend> tts_;
  RetryPolicy policy_;
  std::shared_ptr<ConcurrencyLimiter> limiter_ =
      std::make_shared<ConcurrencyLimiter>(4);
  AuditLogger audit_;
};

// ----- Mock backends ---------------------------------------------------------

// Fixed response list consumed in order. Exhaustion is a transport error so
// runaway generation loops fail loudly in tests.
class ScriptedChatBackend : public ChatBackend {
 public:
  explicit ScriptedChatBackend(std::vector<std::string> script)
      : script_(std::move(script)) {}

  static std::shared_ptr<ScriptedChatBackend> from_file(
      const std::filesystem::path& path) {
    json j = json::parse(io::read_file(path));
    if (!j.is_array())
      throw ConfigError("mock script must be a JSON array of strings: " +
                        path.string());
    return std::make_shared<ScriptedChatBackend>(
        j.get<std::vector<std::string>>());
  }

  std::string complete(const ChatRequest&) override {
    std::lock_guard<std::mutex> lock(mu_);
    if (next_ >= script_.size())
      throw TransportError("scripted mock exhausted after " +
                           std::to_string(script_.size()) + " replies");
    return script_[next_++];
  }

  std::string name() const override { return "mock:script"; }
  std::size_t consumed() const {
    std::lock_guard<std::mutex> lock(mu_);
    return next_;
  }

 private:
  mutable std::mutex mu_;
  std::vector<std::string> script_;
  std::size_t next_ = 0;
};

// Always fails with a transport error; exercises the retry budget.
class FailingChatBackend : public ChatBackend {
 public:
  std::string complete(const ChatRequest&) override {
    ++calls_;
    throw TransportError("injected failure");
  }
  std::string name() const override { return "mock:fail"; }
  int calls() const { return calls_; }

 private:
  std::atomic<int> calls_ = 0;
};

// Deterministic per-word tone bursts: word hash -> frequency in 120-300 Hz,
// slot length from a words-per-minute constant, 10 ms cosine fades. Audible
// and alignable; realism is not the goal.
class MockTtsBackend : public TtsBackend {
 public:
  explicit MockTtsBackend(double words_per_minute = 160.0)
      : wpm_(words_per_minute) {}

  AudioBuffer synthesize(const TtsRequest& request) override {
    const auto words = split_ws(request.text);
    const int sr = request.sample_rate;
    const std::size_t slot =
        static_cast<std::size_t>(std::llround(60.0 / wpm_ * sr));
    AudioBuffer out;
    out.sample_rate = sr;
    out.samples.assign(words.size() * slot, 0.0);
    // voice identity shifts the base pitch
    const std::uint64_t voice_hash =
        fnv1a64(request.voice_id) ^
        fnv1a64(std::string_view(
            reinterpret_cast<const char*>(request.voice_reference.samples.data()),
            std::min<std::size_t>(request.voice_reference.samples.size(), 256) *
                sizeof(double)));
    const double base = static_cast<double>(voice_hash % 60);
    for (std::size_t w = 0; w < words.size(); ++w) {
      const double freq =
          120.0 + base + static_cast<double>(fnv1a64(words[w]) % 121);
      const double speech_s = 0.8 * static_cast<double>(slot) / sr;
      AudioBuffer burst = tone_burst(freq, speech_s, sr, 0.30);
      mix_into(out.samples, burst.samples, w * slot, 1.0);
    }
    return out;
  }

  std::string name() const override { return "mock:tts"; }

 private:
  double wpm_;
};

// Uniform per-word spacing weighted by word length; the offline stand-in for
// a forced-alignment service.
class MockAlignBackend : public AlignBackend {
 public:
  AlignmentResult align(const std::string& text,
                        const AudioBuffer& audio) override {
    AlignmentResult result;
    const auto words = split_ws(text);
    if (words.empty()) return result;
    double total_weight = 0.0;
    for (const auto& w : words)
      total_weight += static_cast<double>(w.size()) + 1.0;
    const double dur = audio.duration_s();
    double at = 0.0;
    for (const auto& w : words) {
      const double span =
          dur * (static_cast<double>(w.size()) + 1.0) / total_weight;
      result.tokens.push_back({w, at, span});
      at += span;
    }
    return result;
  }
  std::string name() const override { return "mock:align"; }
};

// ----- Record / replay fixtures ----------------------------------------------

enum class FixtureMode { record, replay };

// Wraps a live backend so integration tests never need model servers:
// record once, replay thereafter. Fixtures are request-hash-keyed files.
class RecordReplayChat : public ChatBackend {
 public:
  RecordReplayChat(std::shared_ptr<ChatBackend> inner,
                   std::filesystem::path dir, FixtureMode mode)
      : inner_(std::move(inner)), dir_(std::move(dir)), mode_(mode) {}

  std::string complete(const ChatRequest& request) override {
    const auto path = dir_ / ("chat-" + hex64(request.content_hash()) + ".json");
    if (mode_ == FixtureMode::replay) {
      if (!std::filesystem::exists(path))
        throw TransportError("no recorded fixture: " + path.string());
      return json::parse(io::read_file(path)).at("response").get<std::string>();
    }
    if (!inner_) throw ConfigError("record mode requires a live backend");
    std::string reply = inner_->complete(request);
    json j{{"request", json::parse(request.canonical())}, {"response", reply}};
    io::write_file_atomic(path, j.dump(2));
    return reply;
  }

  std::string name() const override {
    return mode_ == FixtureMode::record ? "record" : "replay";
  }

 private:
  std::shared_ptr<ChatBackend> inner_;
  std::filesystem::path dir_;
  FixtureMode mode_;
};

class RecordReplayTts : public TtsBackend {
 public:
  RecordReplayTts(std::shared_ptr<TtsBackend> inner, std::filesystem::path dir,
                  FixtureMode mode)
      : inner_(std::move(inner)), dir_(std::move(dir)), mode_(mode) {}

  AudioBuffer synthesize(const TtsRequest& request) override {
    const auto path = dir_ / ("tts-" + hex64(request.content_hash()) + ".wav");
    if (mode_ == FixtureMode::replay) {
      if (!std::filesystem::exists(path))
        throw TransportError("no recorded fixture: " + path.string());
      return read_wav_file(path);
    }
    if (!inner_) throw ConfigError("record mode requires a live backend");
    AudioBuffer buf = inner_->synthesize(request);
    write_wav_file(path, buf);
    return buf;
  }

  std::string name() const override {
    return mode_ == FixtureMode::record ? "record" : "replay";
  }

 private:
  std::shared_ptr<TtsBackend> inner_;
  std::filesystem::path dir_;
  FixtureMode mode_;
};

}  // namespace convoforge::gateway
