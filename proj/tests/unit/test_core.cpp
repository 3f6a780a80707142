#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "convoforge/audio.hpp"
#include "convoforge/fft.hpp"
#include "convoforge/io.hpp"
#include "convoforge/normalize.hpp"
#include "convoforge/rng.hpp"
#include "convoforge/text.hpp"

using namespace convoforge;

TEST_CASE("rng is deterministic and stable") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());
  Rng c(43);
  REQUIRE(Rng(42).next_u64() != c.next_u64());
}

TEST_CASE("rng below has no out-of-range values") {
  Rng rng(7);
  for (int i = 0; i < 10000; ++i) REQUIRE(rng.below(13) < 13);
}

TEST_CASE("rng uniform in [0,1)") {
  Rng rng(9);
  double mn = 1.0, mx = 0.0;
  for (int i = 0; i < 10000; ++i) {
    double u = rng.uniform();
    mn = std::min(mn, u);
    mx = std::max(mx, u);
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
  }
  REQUIRE(mn < 0.01);
  REQUIRE(mx > 0.99);
}

TEST_CASE("derive_seed separates ids") {
  auto s1 = derive_seed(1, {"doc-0", "pat-0"});
  auto s2 = derive_seed(1, {"doc-0", "pat-1"});
  auto s3 = derive_seed(2, {"doc-0", "pat-0"});
  REQUIRE(s1 != s2);
  REQUIRE(s1 != s3);
  REQUIRE(s1 == derive_seed(1, {"doc-0", "pat-0"}));
}

TEST_CASE("fnv1a64 known vector") {
  // FNV-1a 64 of empty input is the offset basis.
  REQUIRE(fnv1a64("") == 0xcbf29ce484222325ULL);
  REQUIRE(fnv1a64("a") != fnv1a64("b"));
}

TEST_CASE("text helpers") {
  REQUIRE(trim("  a b \n") == "a b");
  REQUIRE(split_ws("  a  b\tc ") == std::vector<std::string>{"a", "b", "c"});
  REQUIRE(join({"a", "b"}, ",") == "a,b");
  REQUIRE(word_count("one two three") == 3);
  REQUIRE(fixed6(1.5) == "1.500000");
  REQUIRE(quantize6(0.1234564) == Catch::Approx(0.123456).margin(1e-12));
}

TEST_CASE("render_template substitutes and keeps unknown keys") {
  std::string out = render_template("Hi {{name}}, {{x}}", {{"name", "Ada"}});
  REQUIRE(out == "Hi Ada, {{x}}");
}

TEST_CASE("file io round trip and digest") {
  auto dir = std::filesystem::temp_directory_path() / "cf_test_io";
  std::filesystem::create_directories(dir);
  auto p = dir / "f.txt";
  io::write_file_atomic(p, "hello");
  REQUIRE(io::read_file(p) == "hello");
  REQUIRE(io::digest_file(p) == io::digest_bytes("hello"));
  io::write_file_atomic(p, "hello2");
  REQUIRE(io::read_file(p) == "hello2");
  std::filesystem::remove_all(dir);
}

TEST_CASE("read audit records reads when enabled") {
  auto dir = std::filesystem::temp_directory_path() / "cf_test_audit";
  std::filesystem::create_directories(dir);
  auto p = dir / "seen.txt";
  io::write_file_atomic(p, "x");
  io::ReadAudit::instance().enable();
  (void)io::read_file(p);
  auto reads = io::ReadAudit::instance().reads();
  io::ReadAudit::instance().disable();
  REQUIRE(reads.count(std::filesystem::weakly_canonical(p).string()) == 1);
  std::filesystem::remove_all(dir);
}

TEST_CASE("wav round trip") {
  AudioBuffer buf;
  buf.sample_rate = 16000;
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) buf.samples.push_back(rng.uniform(-0.9, 0.9));
  auto bytes = encode_wav(buf);
  auto back = decode_wav(bytes);
  REQUIRE(back.sample_rate == 16000);
  REQUIRE(back.samples.size() == buf.samples.size());
  for (std::size_t i = 0; i < buf.samples.size(); ++i)
    REQUIRE(back.samples[i] == Catch::Approx(buf.samples[i]).margin(1.0 / 32767.0));
  // re-encode is byte stable
  REQUIRE(encode_wav(back) == encode_wav(decode_wav(bytes)));
}

TEST_CASE("wav rejects garbage") {
  REQUIRE_THROWS_AS(decode_wav("not a wav"), IoError);
}

TEST_CASE("tone burst has requested duration and fades") {
  auto buf = tone_burst(220.0, 0.5, 16000, 0.5);
  REQUIRE(buf.samples.size() == 8000);
  REQUIRE(std::fabs(buf.samples.front()) < 1e-9);
  REQUIRE(std::fabs(buf.samples.back()) < 1e-3);
  REQUIRE(peak_abs(buf) <= 0.5 + 1e-9);
  REQUIRE(peak_abs(buf) > 0.4);
}

TEST_CASE("hvac noise is deterministic and bounded") {
  auto a = synth_hvac_noise(0.5, 16000, 11);
  auto b = synth_hvac_noise(0.5, 16000, 11);
  REQUIRE(a.samples == b.samples);
  REQUIRE(peak_abs(a) < 1.0);
  REQUIRE(rms(a) > 0.0);
}

TEST_CASE("fft convolution matches direct form") {
  Rng rng(3);
  std::vector<double> a(300), b(150);
  for (auto& x : a) x = rng.uniform(-1, 1);
  for (auto& x : b) x = rng.uniform(-1, 1);
  auto direct = [&] {
    std::vector<double> out(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
    return out;
  }();
  auto fast = convolve(a, b);
  REQUIRE(fast.size() == direct.size());
  for (std::size_t i = 0; i < fast.size(); ++i)
    REQUIRE(fast[i] == Catch::Approx(direct[i]).margin(1e-9));
}

TEST_CASE("convolution identity with unit impulse") {
  std::vector<double> sig = {0.1, -0.4, 0.9, 0.3};
  std::vector<double> delta = {1.0};
  REQUIRE(convolve(sig, delta) == sig);
}

TEST_CASE("ascii_fold handles quotes dashes ligatures accents") {
  REQUIRE(ascii_fold("don’t") == "don't");
  REQUIRE(ascii_fold("“hi”") == "\"hi\"");
  REQUIRE(ascii_fold("a—b") == "a-b");
  REQUIRE(ascii_fold("ﬁne") == "fine");
  REQUIRE(ascii_fold("café") == "cafe");
  REQUIRE(ascii_fold("a b") == "a b");
  REQUIRE(ascii_fold("plain") == "plain");
}

TEST_CASE("transcript_norm behavior") {
  REQUIRE(transcript_norm("Hello, World!") == "hello world");
  REQUIRE(transcript_norm("don't stop") == "don't stop");
  REQUIRE(transcript_norm("'quoted'") == "quoted");
  REQUIRE(transcript_norm("50% off") == "50 percent off");
  REQUIRE(transcript_norm("a  \t b") == "a b");
  REQUIRE(transcript_norm("well-known") == "well known");
}

TEST_CASE("normalizer chain is idempotent on random unicode") {
  NormalizerChain chain;
  Rng rng(123);
  for (int iter = 0; iter < 500; ++iter) {
    std::string s;
    const int len = static_cast<int>(rng.below(60));
    for (int i = 0; i < len; ++i) {
      switch (rng.below(6)) {
        case 0: s += static_cast<char>('a' + rng.below(26)); break;
        case 1: s += static_cast<char>('A' + rng.below(26)); break;
        case 2: s += " .,'!?-%&"[rng.below(9)]; break;
        case 3: s += "’"; break;
        case 4: s += "“"; break;
        default: {
          // arbitrary utf-8 bytes, including malformed ones
          s += static_cast<char>(rng.below(256));
          break;
        }
      }
    }
    const std::string once = chain.apply(s);
    const std::string twice = chain.apply(once);
    REQUIRE(once == twice);
    for (char c : once) REQUIRE(static_cast<unsigned char>(c) < 0x80);
  }
}

TEST_CASE("normalized_contains matches across quote styles") {
  NormalizerChain chain;
  REQUIRE(normalized_contains(chain, "I don’t know.", "don't know"));
  REQUIRE_FALSE(normalized_contains(chain, "I don't know.", "do not know"));
  // word-boundary aware: "art" is not inside "heart"
  REQUIRE_FALSE(normalized_contains(chain, "my heart hurts", "art"));
  REQUIRE_FALSE(normalized_contains(chain, "anything", ""));
}
