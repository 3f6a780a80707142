#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "convoforge/io.hpp"
#include "convoforge/metrics.hpp"

using namespace convoforge;
using namespace convoforge::metrics;

TEST_CASE("wer identical strings is zero") {
  auto r = wer("a b c", "a b c");
  REQUIRE(r.wer == 0.0);
  REQUIRE(r.substitutions + r.deletions + r.insertions == 0);
}

TEST_CASE("wer hand alignment a b c vs a x c") {
  auto r = wer("a b c", "a x c");
  REQUIRE(r.wer == Catch::Approx(1.0 / 3.0));
  REQUIRE(r.substitutions == 1);
  REQUIRE(r.deletions == 0);
  REQUIRE(r.insertions == 0);
}

TEST_CASE("wer absorbs curly quotes via normalizer") {
  auto r = wer("don’t stop", "don't stop");
  REQUIRE(r.wer == 0.0);
}

TEST_CASE("wer counts deletions and insertions") {
  auto del = wer("a b c d", "a c d");
  REQUIRE(del.deletions == 1);
  REQUIRE(del.wer == Catch::Approx(0.25));
  auto ins = wer("a c", "a b c");
  REQUIRE(ins.insertions == 1);
  REQUIRE(ins.wer == Catch::Approx(0.5));
}

TEST_CASE("wer grows when hypothesis gains an insertion") {
  const std::string ref = "the quick brown fox jumps";
  double base = wer(ref, "the quick brown fox jumps").wer;
  double more = wer(ref, "the quick brown fox jumps extra").wer;
  REQUIRE(more > base);
}

TEST_CASE("wer empty reference throws") {
  REQUIRE_THROWS_AS(wer("...", "hi"), ValidationError);
}

TEST_CASE("rouge identical texts scores one") {
  for (auto v : {RougeVariant::R2, RougeVariant::R3, RougeVariant::RL}) {
    auto s = rouge_f1("the cat sat on the mat", "the cat sat on the mat", v);
    REQUIRE(s.f1 == Catch::Approx(1.0));
    REQUIRE_FALSE(s.degenerate);
  }
}

TEST_CASE("rouge disjoint vocabulary scores zero") {
  for (auto v : {RougeVariant::R2, RougeVariant::R3, RougeVariant::RL}) {
    REQUIRE(rouge_f1("alpha beta gamma", "delta epsilon zeta", v).f1 == 0.0);
  }
}

TEST_CASE("rouge2 hand case equals two thirds") {
  // ref bigrams: the-cat cat-sat sat-on on-the the-mat (5)
  // hyp bigrams: the-cat cat-on on-the the-mat (4), common 3
  auto s = rouge_f1("the cat sat on the mat", "the cat on the mat",
                    RougeVariant::R2);
  REQUIRE(s.f1 == Catch::Approx(2.0 / 3.0));
}

TEST_CASE("rouge empty side is degenerate zero") {
  auto s = rouge_f1("some words here", "...", RougeVariant::R2);
  REQUIRE(s.f1 == 0.0);
  REQUIRE(s.degenerate);
}

TEST_CASE("rougeL respects order") {
  auto forward = rouge_f1("a b c d", "a b c d", RougeVariant::RL);
  auto scrambled = rouge_f1("a b c d", "d c b a", RougeVariant::RL);
  REQUIRE(forward.f1 == Catch::Approx(1.0));
  REQUIRE(scrambled.f1 < 0.5);
}

static ConceptLexicon make_lexicon() {
  ConceptLexicon lex;
  lex.add("hypertension", {"high blood pressure", "elevated blood pressure"});
  lex.add("cough", {"coughing"});
  lex.add("diabetes mellitus", {"diabetes"});
  return lex;
}

TEST_CASE("concept extraction longest match and variants") {
  auto lex = make_lexicon();
  auto found = lex.extract("Patient has high blood pressure and a cough.");
  REQUIRE(found == std::set<std::string>{"hypertension", "cough"});
}

TEST_CASE("concept f1 hand case") {
  auto lex = make_lexicon();
  // ref {hypertension, cough}, hyp {cough} -> P=1 R=0.5 F1=2/3
  auto r = concept_f1("hypertension and coughing noted", "the cough persists",
                      lex);
  REQUIRE(r.f1 == Catch::Approx(2.0 / 3.0));
  REQUIRE_FALSE(r.vacuous);
}

TEST_CASE("concept f1 identical sets is one") {
  auto lex = make_lexicon();
  auto r = concept_f1("diabetes and cough", "cough with diabetes mellitus", lex);
  REQUIRE(r.f1 == Catch::Approx(1.0));
}

TEST_CASE("concept f1 vacuous agreement flagged") {
  auto lex = make_lexicon();
  auto r = concept_f1("nothing medical", "also nothing", lex);
  REQUIRE(r.f1 == 1.0);
  REQUIRE(r.vacuous);
}

TEST_CASE("concept f1 order invariance") {
  auto lex = make_lexicon();
  auto a = concept_f1("cough early. hypertension later.",
                      "diabetes then cough", lex);
  auto b = concept_f1("hypertension later. cough early.",
                      "cough then diabetes", lex);
  REQUIRE(a.f1 == Catch::Approx(b.f1));
}

TEST_CASE("concept f1 with no lexicon and no tagger throws") {
  ConceptLexicon empty;
  REQUIRE_THROWS_AS(concept_f1("a", "b", empty), ConfigError);
}

TEST_CASE("concept lexicon rejects ambiguous variant") {
  ConceptLexicon lex;
  lex.add("fever", {"high temperature"});
  REQUIRE_THROWS_AS(lex.add("pyrexia", {"high temperature"}),
                    ValidationError);
}

TEST_CASE("concept lexicon loads tsv") {
  auto dir = std::filesystem::temp_directory_path() / "cf_test_lex";
  std::filesystem::create_directories(dir);
  auto p = dir / "lex.tsv";
  io::write_file_atomic(p,
                        "# comment\n"
                        "hypertension\thigh blood pressure\n"
                        "cough\n");
  auto lex = ConceptLexicon::load(p);
  REQUIRE(lex.concept_count() == 2);
  REQUIRE(lex.extract("high blood pressure") ==
          std::set<std::string>{"hypertension"});
  std::filesystem::remove_all(dir);
}

TEST_CASE("gunning fog hand case") {
  REQUIRE(gunning_fog("The cat sat.") == Catch::Approx(1.2));
}

TEST_CASE("gunning fog ratio invariance under duplication") {
  const std::string s = "The patient described a persistent headache. It began last week.";
  REQUIRE(gunning_fog(s) == Catch::Approx(gunning_fog(s + " " + s)));
}

TEST_CASE("gunning fog counts complex words") {
  auto fog = gunning_fog_breakdown("Unbelievable complexity overwhelms.");
  REQUIRE(fog.sentences == 1);
  REQUIRE(fog.words == 3);
  REQUIRE(fog.complex_words == 3);
}

TEST_CASE("gunning fog suffix inflation does not make complex") {
  // "advised" strips -ed -> "advis" -> 2 syllable groups -> not complex
  auto fog = gunning_fog_breakdown("He advised rest.");
  REQUIRE(fog.complex_words == 0);
}

TEST_CASE("gunning fog empty text throws") {
  REQUIRE_THROWS_AS(gunning_fog("   "), ValidationError);
}

TEST_CASE("syllable counter golden values") {
  using metrics::detail::syllable_count;
  REQUIRE(syllable_count("cat") == 1);
  REQUIRE(syllable_count("table") == 2);
  REQUIRE(syllable_count("make") == 1);
  // vowel digraphs count once; "area" is 2 under the frozen heuristic
  REQUIRE(syllable_count("area") == 2);
  REQUIRE(syllable_count("people") == 2);
  REQUIRE(syllable_count("medication") == 4);
  REQUIRE(syllable_count("see") == 1);
}

TEST_CASE("metrics are bit identical across runs") {
  const std::string ref = "the quick brown fox jumps over the lazy dog";
  const std::string hyp = "the quick brown fox leaped over a lazy dog";
  auto w1 = wer(ref, hyp), w2 = wer(ref, hyp);
  REQUIRE(w1.wer == w2.wer);
  auto r1 = rouge_f1(ref, hyp, RougeVariant::R2);
  auto r2 = rouge_f1(ref, hyp, RougeVariant::R2);
  REQUIRE(r1.f1 == r2.f1);
  REQUIRE(gunning_fog(ref + ".") == gunning_fog(ref + "."));
}

TEST_CASE("mean_std sample statistics") {
  auto ms = mean_std({1.0, 5.0});
  REQUIRE(ms.mean == Catch::Approx(3.0));
  REQUIRE(ms.stddev == Catch::Approx(std::sqrt(8.0)));
  REQUIRE(mean_std({2.0}).stddev == 0.0);
  REQUIRE(mean_std({}).n == 0);
}
