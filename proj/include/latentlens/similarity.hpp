#pragma once

#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "latentlens/explainers.hpp"
#include "latentlens/nlgmetrics.hpp"
#include "latentlens/remote.hpp"

namespace latentlens {

constexpr const char* kNoClearExplanation = "No clear explanation";

struct EmbeddingVector {
  std::vector<double> values;
  std::string provider_label;
};

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  // Embeds a set of texts scored together (the local provider derives its
  // IDF weights from this set).
  virtual std::vector<EmbeddingVector> embed_set(const std::vector<std::string>& texts) = 0;
  virtual std::string label() const = 0;
};

// L2-normalized TF-IDF over a 2^15-bucket hashed vocabulary. IDF is
// ln((n+1)/(df+1)) + 1 over the corpus in scope.
class LocalTfidfEmbedder final : public EmbeddingProvider {
 public:
  LocalTfidfEmbedder() = default;
  explicit LocalTfidfEmbedder(const std::vector<std::string>& corpus);

  // Uses the corpus given at construction.
  EmbeddingVector embed(const std::string& text) const;
  std::vector<EmbeddingVector> embed_set(const std::vector<std::string>& texts) override;
  std::string label() const override { return "local-tfidf"; }

 private:
  std::map<std::uint32_t, double> idf_;
  double default_idf_ = 1.0;
};

// POST {endpoint}/embeddings with {model, input: [...]}.
class RemoteEmbeddingProvider final : public EmbeddingProvider {
 public:
  RemoteEmbeddingProvider(std::string endpoint, std::string model, double timeout_s,
                          RetryPolicy policy, Sleeper sleeper = {});
  std::vector<EmbeddingVector> embed_set(const std::vector<std::string>& texts) override;
  std::string label() const override { return "remote:" + model_; }

 private:
  JsonHttpClient client_;
  std::string model_;
  std::uint64_t calls_ = 0;
};

// Token-level similarities through an embedding provider, with a per-token
// cache. Used for embed_f1 against a remote embeddings endpoint.
class ProviderTokenEmbedder final : public TokenEmbedder {
 public:
  explicit ProviderTokenEmbedder(EmbeddingProvider& provider) : provider_(provider) {}
  Eigen::MatrixXd similarity(const TokenSequence& candidate,
                             const TokenSequence& reference) override;
  std::string label() const override { return provider_.label(); }

 private:
  const std::vector<double>& vector_for(const std::string& token);
  EmbeddingProvider& provider_;
  std::map<std::string, std::vector<double>> cache_;
};

EmbeddingVector embed(EmbeddingProvider& provider, const std::string& text);

double cosine(std::span<const double> u, std::span<const double> v);

// ROUGE-L F1 over tokenized texts.
double lexical_sim(const std::string& a, const std::string& b);

enum class SimilarityKind { CosineEmbedding, LexicalRougeL };

const char* to_string(SimilarityKind k);
SimilarityKind parse_similarity_kind(const std::string& name);

struct CertaintyReport {
  std::string sequence_id;
  SimilarityKind similarity_kind = SimilarityKind::CosineEmbedding;
  std::vector<std::vector<double>> pairwise;
  double certainty = 0.0;
  std::vector<double> per_response_mean;
  int selected_index = 0;
  int pair_evaluations = 0;
};

// Evaluates `sim` once per unordered pair i < j and fills the symmetric
// matrix; certainty is the mean over the n(n-1)/2 pairs.
CertaintyReport certainty_from_pairs(std::size_t n,
                                     const std::function<double(std::size_t, std::size_t)>& sim);

// `provider` is required for the cosine kind; nullptr selects a local
// TF-IDF embedder fitted on the response set.
CertaintyReport certainty(const ResponseSet& responses, SimilarityKind kind,
                          EmbeddingProvider* provider = nullptr);

// The selected response when certainty >= epsilon, otherwise the sentinel.
std::string select_explanation(const CertaintyReport& report, const ResponseSet& responses,
                               double epsilon);

nlohmann::json to_json(const CertaintyReport& report);

}  // namespace latentlens
