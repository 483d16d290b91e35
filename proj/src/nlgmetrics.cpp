#include "latentlens/nlgmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <tuple>

#include "latentlens/error.hpp"
#include "latentlens/porter.hpp"

namespace latentlens {

namespace {

// Decodes one UTF-8 sequence starting at `i`; malformed bytes decode as
// U+FFFD and consume one byte.
char32_t next_codepoint(std::string_view s, std::size_t& i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  auto cont = [&](std::size_t k) -> int {
    if (i + k >= s.size()) return -1;
    const auto b = static_cast<unsigned char>(s[i + k]);
    return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
  };
  if (b0 < 0x80) {
    ++i;
    return b0;
  }
  int len = 0;
  char32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    ++i;
    return 0xFFFD;
  }
  for (int k = 1; k < len; ++k) {
    const int c = cont(static_cast<std::size_t>(k));
    if (c < 0) {
      ++i;
      return 0xFFFD;
    }
    cp = (cp << 6) | static_cast<char32_t>(c);
  }
  i += static_cast<std::size_t>(len);
  return cp;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

bool is_word_char(char32_t cp) {
  if (cp < 0x80) {
    return (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z') || (cp >= '0' && cp <= '9');
  }
  if (cp <= 0xBF) return cp == 0xAA || cp == 0xB5 || cp == 0xBA;  // Latin-1 punctuation block
  if (cp == 0xD7 || cp == 0xF7) return false;                     // multiplication, division
  if (cp >= 0x2000 && cp <= 0x2BFF) return false;  // punctuation, arrows, math, symbols
  if (cp >= 0x3000 && cp <= 0x303F) return false;  // CJK punctuation
  if (cp >= 0xFE30 && cp <= 0xFE4F) return false;
  if (cp >= 0xFF00 && cp <= 0xFF20) return false;  // fullwidth ASCII punctuation
  if (cp >= 0x1F000) return false;                 // emoji and pictographs
  return cp != 0xFFFD;
}

char32_t to_lower(char32_t cp) {
  if (cp >= 'A' && cp <= 'Z') return cp + 32;
  if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return cp + 32;
  if (cp >= 0x100 && cp <= 0x137 && cp % 2 == 0) return cp + 1;
  if (cp >= 0x139 && cp <= 0x148 && cp % 2 == 1) return cp + 1;
  if (cp >= 0x14A && cp <= 0x177 && cp % 2 == 0) return cp + 1;
  if (cp == 0x178) return 0xFF;
  if (cp >= 0x179 && cp <= 0x17E && cp % 2 == 1) return cp + 1;
  if (cp >= 0x391 && cp <= 0x3A9 && cp != 0x3A2) return cp + 32;
  if (cp >= 0x410 && cp <= 0x42F) return cp + 32;
  if (cp >= 0x400 && cp <= 0x40F) return cp + 80;
  return cp;
}

using NgramCounts = std::map<std::vector<std::string>, int>;

NgramCounts ngrams(const TokenSequence& t, std::size_t n) {
  NgramCounts counts;
  if (t.size() < n) return counts;
  for (std::size_t i = 0; i + n <= t.size(); ++i) {
    ++counts[std::vector<std::string>(t.begin() + static_cast<std::ptrdiff_t>(i),
                                      t.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

}  // namespace

TokenSequence tokenize(std::string_view text) {
  TokenSequence tokens;
  std::string cur;
  std::size_t i = 0;
  while (i < text.size()) {
    const char32_t cp = next_codepoint(text, i);
    if (is_word_char(cp)) {
      append_utf8(cur, to_lower(cp));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

std::uint32_t hash_token(std::string_view token) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : token) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return static_cast<std::uint32_t>(h & (kHashedVocabSize - 1));
}

std::size_t lcs_length(const TokenSequence& a, const TokenSequence& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l(const TokenSequence& candidate, const TokenSequence& reference) {
  if (candidate.empty() || reference.empty()) return 0.0;
  const auto lcs = static_cast<double>(lcs_length(candidate, reference));
  if (lcs == 0.0) return 0.0;
  const double p = lcs / static_cast<double>(candidate.size());
  const double r = lcs / static_cast<double>(reference.size());
  return 2.0 * p * r / (p + r);
}

double rouge_l(const TokenSequence& candidate, const std::vector<TokenSequence>& references) {
  double best = 0.0;
  for (const auto& ref : references) best = std::max(best, rouge_l(candidate, ref));
  return best;
}

double bleu_corpus(const std::vector<TokenSequence>& candidates,
                   const std::vector<std::vector<TokenSequence>>& references, int max_n) {
  if (candidates.size() != references.size()) {
    throw Error(ErrorCode::LengthMismatch, "candidate and reference corpora differ in length");
  }
  if (max_n < 1) throw Error(ErrorCode::InvalidArgument, "max_n must be >= 1");
  std::vector<double> matched(static_cast<std::size_t>(max_n), 0.0);
  std::vector<double> total(static_cast<std::size_t>(max_n), 0.0);
  double cand_len = 0.0;
  double ref_len = 0.0;
  for (std::size_t s = 0; s < candidates.size(); ++s) {
    const auto& cand = candidates[s];
    const auto& refs = references[s];
    if (refs.empty()) throw Error(ErrorCode::InvalidArgument, "candidate without references");
    cand_len += static_cast<double>(cand.size());
    // Closest reference length; ties go to the shorter reference.
    std::size_t best = refs.front().size();
    for (const auto& r : refs) {
      const auto d = [&](std::size_t len) {
        return len > cand.size() ? len - cand.size() : cand.size() - len;
      };
      if (d(r.size()) < d(best) || (d(r.size()) == d(best) && r.size() < best)) best = r.size();
    }
    ref_len += static_cast<double>(best);
    for (int n = 1; n <= max_n; ++n) {
      const NgramCounts cand_counts = ngrams(cand, static_cast<std::size_t>(n));
      NgramCounts max_ref;
      for (const auto& r : refs) {
        for (const auto& [g, c] : ngrams(r, static_cast<std::size_t>(n))) {
          max_ref[g] = std::max(max_ref[g], c);
        }
      }
      for (const auto& [g, c] : cand_counts) {
        total[n - 1] += c;
        const auto it = max_ref.find(g);
        if (it != max_ref.end()) matched[n - 1] += std::min(c, it->second);
      }
    }
  }
  if (cand_len == 0.0) return 0.0;
  double log_sum = 0.0;
  for (int n = 0; n < max_n; ++n) {
    if (matched[n] == 0.0 || total[n] == 0.0) return 0.0;
    log_sum += std::log(matched[n] / total[n]);
  }
  const double bp = cand_len < ref_len ? std::exp(1.0 - ref_len / cand_len) : 1.0;
  return bp * std::exp(log_sum / max_n);
}

MeteorAlignment meteor_align(const TokenSequence& candidate, const TokenSequence& reference) {
  std::vector<int> cand_to_ref(candidate.size(), -1);
  std::vector<bool> ref_used(reference.size(), false);
  auto stage = [&](auto&& key) {
    for (std::size_t i = 0; i < candidate.size(); ++i) {
      if (cand_to_ref[i] >= 0) continue;
      const std::string ki = key(candidate[i]);
      for (std::size_t j = 0; j < reference.size(); ++j) {
        if (!ref_used[j] && key(reference[j]) == ki) {
          cand_to_ref[i] = static_cast<int>(j);
          ref_used[j] = true;
          break;
        }
      }
    }
  };
  stage([](const std::string& t) { return t; });
  stage([](const std::string& t) { return porter_stem(t); });

  MeteorAlignment a;
  for (std::size_t i = 0; i < candidate.size(); ++i) {
    if (cand_to_ref[i] >= 0) a.matches.emplace_back(i, static_cast<std::size_t>(cand_to_ref[i]));
  }
  for (std::size_t k = 0; k < a.matches.size(); ++k) {
    const bool continues = k > 0 && a.matches[k].first == a.matches[k - 1].first + 1 &&
                           a.matches[k].second == a.matches[k - 1].second + 1;
    if (!continues) ++a.chunks;
  }
  return a;
}

double meteor(const TokenSequence& candidate, const TokenSequence& reference) {
  if (candidate.empty() || reference.empty()) return 0.0;
  const MeteorAlignment a = meteor_align(candidate, reference);
  const auto m = static_cast<double>(a.matches.size());
  if (m == 0.0) return 0.0;
  const double p = m / static_cast<double>(candidate.size());
  const double r = m / static_cast<double>(reference.size());
  const double f_mean = 10.0 * p * r / (r + 9.0 * p);
  const double frag = static_cast<double>(a.chunks) / m;
  const double penalty = 0.5 * frag * frag * frag;
  return f_mean * (1.0 - penalty);
}

double meteor(const TokenSequence& candidate, const std::vector<TokenSequence>& references) {
  double best = 0.0;
  for (const auto& ref : references) best = std::max(best, meteor(candidate, ref));
  return best;
}

Eigen::MatrixXd HashedTokenEmbedder::similarity(const TokenSequence& candidate,
                                                const TokenSequence& reference) {
  Eigen::MatrixXd s(static_cast<Eigen::Index>(candidate.size()),
                    static_cast<Eigen::Index>(reference.size()));
  for (std::size_t i = 0; i < candidate.size(); ++i) {
    const std::uint32_t hi = hash_token(candidate[i]);
    for (std::size_t j = 0; j < reference.size(); ++j) {
      s(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          hi == hash_token(reference[j]) ? 1.0 : 0.0;
    }
  }
  return s;
}

double embed_f1(const TokenSequence& candidate, const TokenSequence& reference,
                TokenEmbedder& embedder) {
  if (candidate.empty() || reference.empty()) {
    throw Error(ErrorCode::EmptyTextAfterTokenization, "embed_f1 needs nonempty token sequences");
  }
  const Eigen::MatrixXd s = embedder.similarity(candidate, reference);
  const double precision = s.rowwise().maxCoeff().mean();
  const double recall = s.colwise().maxCoeff().mean();
  if (precision + recall <= 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

double embed_f1(const TokenSequence& candidate, const std::vector<TokenSequence>& references,
                TokenEmbedder& embedder) {
  double best = -1.0;
  for (const auto& ref : references) best = std::max(best, embed_f1(candidate, ref, embedder));
  return best;
}

std::vector<TableRow> evaluate_table(
    const std::vector<ExplanationRecord>& explanations,
    const std::map<std::string, std::vector<std::string>>& annotations, TokenEmbedder& embedder) {
  using Key = std::tuple<std::string, std::string, std::string>;
  struct Group {
    std::vector<TokenSequence> cands;
    std::vector<std::vector<TokenSequence>> refs;
    std::vector<SequenceScores> per_sequence;
  };
  std::map<Key, Group> groups;
  for (const auto& e : explanations) {
    const auto it = annotations.find(e.sequence_id);
    if (it == annotations.end() || it->second.empty()) continue;
    std::vector<TokenSequence> refs;
    for (const auto& r : it->second) refs.push_back(tokenize(r));
    TokenSequence cand = tokenize(e.text);
    Group& g = groups[{e.dataset, e.vae_variant, e.backend}];
    SequenceScores s;
    s.sequence_id = e.sequence_id;
    s.rouge_l = rouge_l(cand, refs);
    s.meteor = meteor(cand, refs);
    std::vector<TokenSequence> nonempty_refs;
    for (const auto& r : refs) {
      if (!r.empty()) nonempty_refs.push_back(r);
    }
    s.embed_f1 = cand.empty() || nonempty_refs.empty() ? 0.0 : embed_f1(cand, nonempty_refs, embedder);
    g.per_sequence.push_back(s);
    g.cands.push_back(std::move(cand));
    g.refs.push_back(std::move(refs));
  }
  if (groups.empty()) {
    throw Error(ErrorCode::NoOverlap, "no explanation shares a sequence_id with the annotations");
  }
  std::vector<TableRow> rows;
  for (auto& [key, g] : groups) {
    TableRow row;
    std::tie(row.dataset, row.vae_variant, row.backend) = key;
    row.scores.bleu = bleu_corpus(g.cands, g.refs);
    const auto n = static_cast<double>(g.per_sequence.size());
    for (const auto& s : g.per_sequence) {
      row.scores.rouge_l += s.rouge_l / n;
      row.scores.meteor += s.meteor / n;
      row.scores.embed_f1 += s.embed_f1 / n;
    }
    row.per_sequence = std::move(g.per_sequence);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string metrics_csv(const std::vector<TableRow>& rows) {
  std::string out = "dataset,vae_variant,backend,bleu,rouge_l,meteor,embed_f1\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, ",%.6f,%.6f,%.6f,%.6f\n", r.scores.bleu, r.scores.rouge_l,
                  r.scores.meteor, r.scores.embed_f1);
    out += r.dataset + "," + r.vae_variant + "," + r.backend + buf;
  }
  return out;
}

}  // namespace latentlens
