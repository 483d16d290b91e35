#include <doctest.h>

#include <algorithm>

#include "latentlens/error.hpp"
#include "latentlens/nlgmetrics.hpp"
#include "latentlens/porter.hpp"
#include "latentlens/rng.hpp"
#include "oracles.hpp"

using namespace latentlens;

namespace {

TokenSequence random_tokens(SplitMix64& g, std::size_t max_len, std::size_t vocab) {
  static const std::vector<std::string> words = {"the",   "shape", "moves", "left",  "right",
                                                 "size",  "grows", "turns", "digit", "thick",
                                                 "moving", "grown", "turning", "shapes"};
  TokenSequence t(g.below(max_len + 1));
  for (auto& w : t) w = words[g.below(std::min(vocab, words.size()))];
  return t;
}

}  // namespace

TEST_SUITE("nlgmetrics") {
  TEST_CASE("tokenizer") {
    CHECK(tokenize("The cat, sat.") == TokenSequence{"the", "cat", "sat"});
    CHECK(tokenize("").empty());
    CHECK(tokenize("z_1 moves left-to-right") ==
          TokenSequence{"z", "1", "moves", "left", "to", "right"});
    CHECK(tokenize("Größe ÄNDERT sich") == TokenSequence{"größe", "ändert", "sich"});
    CHECK(tokenize("ΓΩΝΙΑ Угол") == TokenSequence{"γωνια", "угол"});
  }

  TEST_CASE("porter stemmer reference vocabulary") {
    const std::vector<std::pair<std::string, std::string>> cases = {
        {"caresses", "caress"},   {"ponies", "poni"},        {"ties", "ti"},
        {"caress", "caress"},     {"cats", "cat"},           {"feed", "feed"},
        {"agreed", "agre"},       {"plastered", "plaster"},  {"bled", "bled"},
        {"motoring", "motor"},    {"sing", "sing"},          {"conflated", "conflat"},
        {"troubled", "troubl"},   {"sized", "size"},         {"hopping", "hop"},
        {"tanned", "tan"},        {"falling", "fall"},       {"hissing", "hiss"},
        {"fizzed", "fizz"},       {"failing", "fail"},       {"filing", "file"},
        {"happy", "happi"},       {"sky", "sky"},            {"relational", "relat"},
        {"conditional", "condit"}, {"rational", "ration"},   {"valenci", "valenc"},
        {"hesitanci", "hesit"},   {"digitizer", "digit"},    {"conformabli", "conform"},
        {"radicalli", "radic"},   {"differentli", "differ"}, {"vileli", "vile"},
        {"analogousli", "analog"}, {"vietnamization", "vietnam"}, {"predication", "predic"},
        {"operator", "oper"},     {"feudalism", "feudal"},   {"decisiveness", "decis"},
        {"hopefulness", "hope"},  {"callousness", "callous"}, {"formaliti", "formal"},
        {"sensitiviti", "sensit"}, {"sensibiliti", "sensibl"}, {"triplicate", "triplic"},
        {"formative", "form"},    {"formalize", "formal"},   {"electriciti", "electr"},
        {"electrical", "electr"}, {"hopeful", "hope"},       {"goodness", "good"},
        {"revival", "reviv"},     {"allowance", "allow"},    {"inference", "infer"},
        {"airliner", "airlin"},   {"gyroscopic", "gyroscop"}, {"adjustable", "adjust"},
        {"defensible", "defens"}, {"irritant", "irrit"},     {"replacement", "replac"},
        {"adjustment", "adjust"}, {"dependent", "depend"},   {"adoption", "adopt"},
        {"homologou", "homolog"}, {"communism", "commun"},   {"activate", "activ"},
        {"angulariti", "angular"}, {"homologous", "homolog"}, {"effective", "effect"},
        {"bowdlerize", "bowdler"}, {"probate", "probat"},    {"rate", "rate"},
        {"cease", "ceas"},        {"controll", "control"},   {"roll", "roll"},
        {"generalizations", "gener"}, {"oscillators", "oscil"}, {"is", "is"},
    };
    for (const auto& [word, stem] : cases) {
      CAPTURE(word);
      CHECK(porter_stem(word) == stem);
    }
  }

  TEST_CASE("lcs matches exhaustive search") {
    SplitMix64 g(1);
    for (int t = 0; t < 500; ++t) {
      const auto a = random_tokens(g, 12, 5), b = random_tokens(g, 12, 5);
      REQUIRE(lcs_length(a, b) == oracle::lcs_exhaustive(a, b));
      CHECK(lcs_length(a, b) == lcs_length(b, a));
      auto longer = a;
      if (!b.empty()) {
        longer.push_back(b.back());
        CHECK(lcs_length(longer, b) >= lcs_length(a, b));
      }
    }
  }

  TEST_CASE("rouge-l worked examples and oracle") {
    CHECK(rouge_l(tokenize("a b c"), tokenize("a b c")) == 1.0);
    CHECK(rouge_l(tokenize("a b"), tokenize("c d")) == 0.0);
    CHECK(rouge_l(tokenize("the cat sat"), tokenize("the cat sat on the mat")) ==
          doctest::Approx(2.0 / 3).epsilon(1e-15));
    CHECK(rouge_l(TokenSequence{}, tokenize("a")) == 0.0);
    SplitMix64 g(2);
    for (int t = 0; t < 100; ++t) {
      const auto a = random_tokens(g, 12, 8), b = random_tokens(g, 12, 8);
      CHECK(std::abs(rouge_l(a, b) - oracle::rouge_l(a, b)) < 1e-9);
    }
  }

  TEST_CASE("bleu") {
    const std::vector<TokenSequence> c{tokenize("the shape moves to the left side"),
                                       tokenize("a digit becomes thicker over time")};
    CHECK(bleu_corpus(c, {{c[0]}, {c[1]}}) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(bleu_corpus({TokenSequence{}}, {{tokenize("the cat")}}) == 0.0);
    CHECK(bleu_corpus({tokenize("the the the the")}, {{tokenize("the cat")}}) == 0.0);
    CHECK(bleu_corpus({tokenize("the the the the")}, {{tokenize("the cat")}}, 1) ==
          doctest::Approx(0.25).epsilon(1e-15));
    CHECK_THROWS_AS(bleu_corpus(c, {{c[0]}}), Error);

    SplitMix64 g(3);
    for (int t = 0; t < 100; ++t) {
      std::vector<TokenSequence> cands;
      std::vector<std::vector<TokenSequence>> refs;
      for (int s = 0; s < 3; ++s) {
        cands.push_back(random_tokens(g, 12, 4));
        std::vector<TokenSequence> r;
        for (std::size_t k = 0, n = 1 + g.below(4); k < n; ++k) r.push_back(random_tokens(g, 12, 4));
        refs.push_back(r);
      }
      CHECK(std::abs(bleu_corpus(cands, refs) - oracle::bleu(cands, refs)) < 1e-9);
      CHECK(std::abs(bleu_corpus(cands, refs, 2) - oracle::bleu(cands, refs, 2)) < 1e-9);
    }
  }

  TEST_CASE("meteor") {
    CHECK(meteor(tokenize("a b c"), tokenize("a b c")) ==
          doctest::Approx(1 - 0.5 / 27).epsilon(1e-15));
    CHECK(meteor(tokenize("x y"), tokenize("a b")) == 0.0);
    CHECK(meteor(tokenize("cats"), tokenize("cat")) == doctest::Approx(0.5).epsilon(1e-15));
    const auto a = meteor_align(tokenize("b a"), tokenize("a b"));
    CHECK(a.chunks == 2);
    SplitMix64 g(4);
    for (int t = 0; t < 100; ++t) {
      const auto c = random_tokens(g, 12, 14), r = random_tokens(g, 12, 14);
      CHECK(std::abs(meteor(c, r) - oracle::meteor(c, r)) < 1e-9);
    }
  }

  TEST_CASE("multi-reference wrappers ignore reference order") {
    SplitMix64 g(5);
    HashedTokenEmbedder emb;
    for (int t = 0; t < 30; ++t) {
      auto c = random_tokens(g, 8, 10);
      if (c.empty()) c.push_back("shape");
      std::vector<TokenSequence> refs;
      for (int k = 0; k < 4; ++k) {
        auto r = random_tokens(g, 8, 10);
        if (r.empty()) r.push_back("digit");
        refs.push_back(r);
      }
      auto rev = refs;
      std::reverse(rev.begin(), rev.end());
      CHECK(rouge_l(c, refs) == rouge_l(c, rev));
      CHECK(meteor(c, refs) == meteor(c, rev));
      CHECK(embed_f1(c, refs, emb) == embed_f1(c, rev, emb));
      CHECK(bleu_corpus({c}, {refs}) == bleu_corpus({c}, {rev}));
    }
  }

  TEST_CASE("embed_f1 under the hashed embedder") {
    HashedTokenEmbedder emb;
    CHECK(embed_f1(tokenize("the shape moves"), tokenize("the shape moves"), emb) == 1.0);
    REQUIRE(hash_token("alpha") != hash_token("omega"));
    CHECK(embed_f1(tokenize("alpha"), tokenize("omega"), emb) == 0.0);
    REQUIRE(hash_token("b") != hash_token("c"));
    CHECK(embed_f1(tokenize("a b"), tokenize("a c"), emb) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK_THROWS_AS(embed_f1(TokenSequence{}, tokenize("a"), emb), Error);
    CHECK(hash_token("anything") < kHashedVocabSize);
  }

  TEST_CASE("evaluation table") {
    const std::map<std::string, std::vector<std::string>> ann = {
        {"s1", {"the shape moves from left to right", "position changes horizontally"}},
        {"s2", {"the digit gets thicker", "stroke width increases"}},
        {"s3", {"the object grows larger", "size increases steadily"}},
    };
    std::vector<ExplanationRecord> ex;
    for (const auto& [id, refs] : ann) ex.push_back({id, "shapes", "vae", "scripted", refs[0]});
    ex.push_back({"s1", "shapes", "vae", "heuristic", "it moves left"});
    ex.push_back({"s9", "shapes", "vae", "heuristic", "unmatched"});
    HashedTokenEmbedder emb;
    const auto rows = evaluate_table(ex, ann, emb);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].backend == "heuristic");
    CHECK(rows[1].backend == "scripted");
    CHECK(rows[1].scores.bleu == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rows[1].scores.rouge_l == 1.0);
    CHECK(rows[1].scores.meteor >= 0.98);
    CHECK(rows[1].scores.embed_f1 == 1.0);
    CHECK(rows[0].per_sequence.size() == 1);

    // heuristic row by direct evaluation
    std::vector<TokenSequence> refs;
    for (const auto& r : ann.at("s1")) refs.push_back(tokenize(r));
    const auto cand = tokenize("it moves left");
    double ro = 0, me = 0;
    for (const auto& r : refs) {
      ro = std::max(ro, oracle::rouge_l(cand, r));
      me = std::max(me, oracle::meteor(cand, r));
    }
    CHECK(std::abs(rows[0].scores.rouge_l - ro) < 1e-9);
    CHECK(std::abs(rows[0].scores.meteor - me) < 1e-9);
    CHECK(std::abs(rows[0].scores.bleu - oracle::bleu({cand}, {refs})) < 1e-9);

    const auto csv = metrics_csv(rows);
    CHECK(csv.rfind("dataset,vae_variant,backend,bleu,rouge_l,meteor,embed_f1\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);

    CHECK_THROWS_AS(evaluate_table({{"zz", "d", "v", "b", "text"}}, ann, emb), Error);
  }
}
