#include "latentlens/similarity.hpp"

#include <algorithm>
#include <cmath>

#include "latentlens/error.hpp"
#include "latentlens/rng.hpp"

namespace latentlens {

LocalTfidfEmbedder::LocalTfidfEmbedder(const std::vector<std::string>& corpus) {
  std::map<std::uint32_t, int> df;
  for (const auto& text : corpus) {
    std::vector<std::uint32_t> buckets;
    for (const auto& t : tokenize(text)) buckets.push_back(hash_token(t));
    std::sort(buckets.begin(), buckets.end());
    buckets.erase(std::unique(buckets.begin(), buckets.end()), buckets.end());
    for (auto b : buckets) ++df[b];
  }
  const auto n = static_cast<double>(corpus.size());
  for (const auto& [b, d] : df) idf_[b] = std::log((n + 1.0) / (d + 1.0)) + 1.0;
  default_idf_ = std::log(n + 1.0) + 1.0;
}

EmbeddingVector LocalTfidfEmbedder::embed(const std::string& text) const {
  const TokenSequence tokens = tokenize(text);
  if (tokens.empty()) {
    throw Error(ErrorCode::EmptyTextAfterTokenization, "text has no tokens: '" + text + "'");
  }
  EmbeddingVector v;
  v.provider_label = label();
  v.values.assign(kHashedVocabSize, 0.0);
  for (const auto& t : tokens) v.values[hash_token(t)] += 1.0;
  double norm2 = 0.0;
  for (std::size_t b = 0; b < v.values.size(); ++b) {
    if (v.values[b] == 0.0) continue;
    const auto it = idf_.find(static_cast<std::uint32_t>(b));
    v.values[b] *= it == idf_.end() ? default_idf_ : it->second;
    norm2 += v.values[b] * v.values[b];
  }
  const double norm = std::sqrt(norm2);
  for (double& x : v.values) x /= norm;
  return v;
}

std::vector<EmbeddingVector> LocalTfidfEmbedder::embed_set(const std::vector<std::string>& texts) {
  const LocalTfidfEmbedder fitted(texts);
  std::vector<EmbeddingVector> out;
  for (const auto& t : texts) out.push_back(fitted.embed(t));
  return out;
}

RemoteEmbeddingProvider::RemoteEmbeddingProvider(std::string endpoint, std::string model,
                                                 double timeout_s, RetryPolicy policy,
                                                 Sleeper sleeper)
    : client_(endpoint, api_key_from_env(), timeout_s, policy, std::move(sleeper)),
      model_(std::move(model)) {}

std::vector<EmbeddingVector> RemoteEmbeddingProvider::embed_set(
    const std::vector<std::string>& texts) {
  for (const auto& t : texts) {
    if (tokenize(t).empty()) {
      throw Error(ErrorCode::EmptyTextAfterTokenization, "text has no tokens: '" + t + "'");
    }
  }
  const HttpCallResult r =
      client_.post_json("/embeddings", {{"model", model_}, {"input", texts}}, calls_++);
  std::vector<EmbeddingVector> out(texts.size());
  try {
    const auto& data = r.body.at("data");
    if (!data.is_array() || data.size() != texts.size()) {
      throw Error(ErrorCode::MalformedResponse, "embeddings response has wrong item count");
    }
    for (std::size_t i = 0; i < data.size(); ++i) {
      const std::size_t idx = data[i].value("index", i);
      if (idx >= out.size()) throw Error(ErrorCode::MalformedResponse, "embedding index out of range");
      out[idx].values = data[i].at("embedding").get<std::vector<double>>();
      out[idx].provider_label = label();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedResponse, std::string("bad embeddings response: ") + e.what());
  }
  for (const auto& v : out) {
    if (v.values.empty()) throw Error(ErrorCode::MalformedResponse, "missing embedding");
  }
  return out;
}

const std::vector<double>& ProviderTokenEmbedder::vector_for(const std::string& token) {
  auto it = cache_.find(token);
  if (it == cache_.end()) {
    auto v = provider_.embed_set({token});
    it = cache_.emplace(token, std::move(v.front().values)).first;
  }
  return it->second;
}

Eigen::MatrixXd ProviderTokenEmbedder::similarity(const TokenSequence& candidate,
                                                  const TokenSequence& reference) {
  Eigen::MatrixXd s(static_cast<Eigen::Index>(candidate.size()),
                    static_cast<Eigen::Index>(reference.size()));
  for (std::size_t i = 0; i < candidate.size(); ++i) {
    for (std::size_t j = 0; j < reference.size(); ++j) {
      s(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          cosine(vector_for(candidate[i]), vector_for(reference[j]));
    }
  }
  return s;
}

EmbeddingVector embed(EmbeddingProvider& provider, const std::string& text) {
  if (text.empty()) throw Error(ErrorCode::EmptyTextAfterTokenization, "empty text");
  return provider.embed_set({text}).front();
}

double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw Error(ErrorCode::DimensionMismatch, "vector lengths differ");
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0.0 || nv == 0.0) throw Error(ErrorCode::ZeroVector, "cosine of a zero vector");
  return std::clamp(dot / (std::sqrt(nu) * std::sqrt(nv)), -1.0, 1.0);
}

double lexical_sim(const std::string& a, const std::string& b) {
  return rouge_l(tokenize(a), tokenize(b));
}

const char* to_string(SimilarityKind k) {
  switch (k) {
    case SimilarityKind::CosineEmbedding: return "cosine_embedding";
    case SimilarityKind::LexicalRougeL: return "lexical_rougeL";
  }
  return "unknown";
}

SimilarityKind parse_similarity_kind(const std::string& name) {
  if (name == "cosine_embedding") return SimilarityKind::CosineEmbedding;
  if (name == "lexical_rougeL") return SimilarityKind::LexicalRougeL;
  throw Error(ErrorCode::InvalidArgument, "unknown similarity kind '" + name + "'");
}

CertaintyReport certainty_from_pairs(std::size_t n,
                                     const std::function<double(std::size_t, std::size_t)>& sim) {
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "certainty needs at least 2 responses");
  CertaintyReport r;
  r.pairwise.assign(n, std::vector<double>(n, 0.0));
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    r.pairwise[i][i] = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double s = sim(i, j);
      r.pairwise[i][j] = r.pairwise[j][i] = s;
      total += s;
      ++r.pair_evaluations;
    }
  }
  const double pairs = static_cast<double>(n * (n - 1) / 2);
  r.certainty = total / pairs;
  r.per_response_mean.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) acc += r.pairwise[i][j];
    }
    r.per_response_mean[i] = acc / static_cast<double>(n - 1);
  }
  // Strict comparison keeps the lowest index on ties.
  for (std::size_t i = 1; i < n; ++i) {
    if (r.per_response_mean[i] > r.per_response_mean[static_cast<std::size_t>(r.selected_index)]) {
      r.selected_index = static_cast<int>(i);
    }
  }
  return r;
}

CertaintyReport certainty(const ResponseSet& responses, SimilarityKind kind,
                          EmbeddingProvider* provider) {
  const auto& texts = responses.responses;
  CertaintyReport r;
  if (kind == SimilarityKind::LexicalRougeL) {
    std::vector<TokenSequence> toks;
    for (const auto& t : texts) toks.push_back(tokenize(t));
    r = certainty_from_pairs(texts.size(),
                             [&](std::size_t i, std::size_t j) { return rouge_l(toks[i], toks[j]); });
  } else {
    LocalTfidfEmbedder local;
    EmbeddingProvider& p = provider != nullptr ? *provider : local;
    const std::vector<EmbeddingVector> vecs = p.embed_set(texts);
    r = certainty_from_pairs(texts.size(), [&](std::size_t i, std::size_t j) {
      return cosine(vecs[i].values, vecs[j].values);
    });
  }
  r.sequence_id = responses.sequence_id;
  r.similarity_kind = kind;
  return r;
}

std::string select_explanation(const CertaintyReport& report, const ResponseSet& responses,
                               double epsilon) {
  if (report.sequence_id != responses.sequence_id) {
    throw Error(ErrorCode::InvalidArgument, "report and responses describe different sequences");
  }
  if (report.certainty >= epsilon) {
    return responses.responses.at(static_cast<std::size_t>(report.selected_index));
  }
  return kNoClearExplanation;
}

nlohmann::json to_json(const CertaintyReport& report) {
  return {{"sequence_id", report.sequence_id},
          {"similarity_kind", to_string(report.similarity_kind)},
          {"pairwise", report.pairwise},
          {"certainty", report.certainty},
          {"per_response_mean", report.per_response_mean},
          {"selected_index", report.selected_index}};
}

}  // namespace latentlens
