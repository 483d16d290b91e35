#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace latentlens {

// Lowercase tokens, none empty.
using TokenSequence = std::vector<std::string>;

// Lowercases (ASCII, Latin-1, Latin Extended-A, Greek, Cyrillic) and splits
// into maximal runs of letters and digits. Punctuation, symbols and
// whitespace separate tokens and are dropped.
TokenSequence tokenize(std::string_view text);

// Bucket of a token in the 2^15-wide hashed vocabulary (FNV-1a 64).
constexpr std::uint32_t kHashedVocabBits = 15;
constexpr std::uint32_t kHashedVocabSize = 1U << kHashedVocabBits;
std::uint32_t hash_token(std::string_view token);

std::size_t lcs_length(const TokenSequence& a, const TokenSequence& b);

// ROUGE-L F1 (beta = 1).
double rouge_l(const TokenSequence& candidate, const TokenSequence& reference);
double rouge_l(const TokenSequence& candidate, const std::vector<TokenSequence>& references);

// Corpus BLEU without smoothing: any zero aggregate n-gram precision gives 0.
double bleu_corpus(const std::vector<TokenSequence>& candidates,
                   const std::vector<std::vector<TokenSequence>>& references, int max_n = 4);

struct MeteorAlignment {
  // (candidate index, reference index), sorted by candidate index.
  std::vector<std::pair<std::size_t, std::size_t>> matches;
  std::size_t chunks = 0;
};

// Exact stage then Porter-stem stage, each greedy left to right.
MeteorAlignment meteor_align(const TokenSequence& candidate, const TokenSequence& reference);
double meteor(const TokenSequence& candidate, const TokenSequence& reference);
double meteor(const TokenSequence& candidate, const std::vector<TokenSequence>& references);

// Pairwise token similarities (|candidate| x |reference|) for embed_f1.
class TokenEmbedder {
 public:
  virtual ~TokenEmbedder() = default;
  virtual Eigen::MatrixXd similarity(const TokenSequence& candidate,
                                     const TokenSequence& reference) = 0;
  virtual std::string label() const = 0;
};

// One-hot hashed bag of words: tokens are similar (1) iff they share a bucket.
class HashedTokenEmbedder final : public TokenEmbedder {
 public:
  Eigen::MatrixXd similarity(const TokenSequence& candidate,
                             const TokenSequence& reference) override;
  std::string label() const override { return "local-hashed"; }
};

// Greedy-matching F1 over token similarities. Throws EmptyTextAfterTokenization.
double embed_f1(const TokenSequence& candidate, const TokenSequence& reference,
                TokenEmbedder& embedder);
double embed_f1(const TokenSequence& candidate, const std::vector<TokenSequence>& references,
                TokenEmbedder& embedder);

struct MetricScores {
  double bleu = 0.0;
  double rouge_l = 0.0;
  double meteor = 0.0;
  double embed_f1 = 0.0;
};

struct ExplanationRecord {
  std::string sequence_id;
  std::string dataset;
  std::string vae_variant;
  std::string backend;
  std::string text;
};

struct SequenceScores {
  std::string sequence_id;
  double rouge_l = 0.0;
  double meteor = 0.0;
  double embed_f1 = 0.0;
};

struct TableRow {
  std::string dataset;
  std::string vae_variant;
  std::string backend;
  MetricScores scores;
  std::vector<SequenceScores> per_sequence;
};

// Rows grouped by (dataset, vae_variant, backend) in sorted key order.
// Sentence metrics are the max over references, averaged over sequences;
// BLEU is corpus-level per row. Throws NoOverlap when no explanation has
// references.
std::vector<TableRow> evaluate_table(const std::vector<ExplanationRecord>& explanations,
                                     const std::map<std::string, std::vector<std::string>>& annotations,
                                     TokenEmbedder& embedder);

std::string metrics_csv(const std::vector<TableRow>& rows);

}  // namespace latentlens
