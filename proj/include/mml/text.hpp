#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mml/common.hpp"
#include "mml/dataset.hpp"
#include "mml/feature_vector.hpp"

namespace mml::text {

namespace detail {

// minimal UTF-8 codec; invalid bytes pass through as single code points so
// tokenization never throws on odd input
inline std::vector<uint32_t> decode_utf8(const std::string& s) {
  std::vector<uint32_t> cps;
  cps.reserve(s.size());
  size_t i = 0;
  while (i < s.size()) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    uint32_t cp = b0;
    int extra = 0;
    if (b0 >= 0xF0)
      extra = 3, cp = b0 & 0x07u;
    else if (b0 >= 0xE0)
      extra = 2, cp = b0 & 0x0Fu;
    else if (b0 >= 0xC0)
      extra = 1, cp = b0 & 0x1Fu;
    if (extra > 0 && i + static_cast<size_t>(extra) < s.size() + 0u) {
      bool ok = true;
      uint32_t acc = cp;
      for (int k = 1; k <= extra && ok; ++k) {
        const auto bk = static_cast<unsigned char>(s[i + static_cast<size_t>(k)]);
        if ((bk & 0xC0u) != 0x80u)
          ok = false;
        else
          acc = (acc << 6) | (bk & 0x3Fu);
      }
      if (ok) {
        cps.push_back(acc);
        i += static_cast<size_t>(extra) + 1;
        continue;
      }
    }
    cps.push_back(b0);
    ++i;
  }
  return cps;
}

inline void encode_utf8(uint32_t cp, std::string& out) {
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

inline bool is_space_cp(uint32_t cp) {
  switch (cp) {
    case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D: case 0x20:
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
    case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

inline bool is_strippable_punct(uint32_t cp) {
  if (cp < 0x80) {
    const char c = static_cast<char>(cp);
    return std::ispunct(static_cast<unsigned char>(c)) != 0;
  }
  switch (cp) {
    case 0xA1: case 0xBF: case 0xAB: case 0xBB:          // inverted marks, guillemets
    case 0x2013: case 0x2014: case 0x2026:               // dashes, ellipsis
    case 0x2018: case 0x2019: case 0x201C: case 0x201D:  // curly quotes
    case 0x60C: case 0x61B: case 0x61F:                  // Arabic comma/semicolon/question
      return true;
    default:
      return false;
  }
}

// ASCII plus Latin-1 uppercase; scripts without case (Persian) untouched
inline uint32_t fold_case_cp(uint32_t cp) {
  if (cp >= 'A' && cp <= 'Z') return cp + 0x20;
  if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return cp + 0x20;
  return cp;
}

inline std::string clean_token(const std::vector<uint32_t>& cps, size_t begin, size_t end) {
  while (begin < end && (cps[begin] == '#' || is_strippable_punct(cps[begin]))) ++begin;
  while (end > begin && is_strippable_punct(cps[end - 1])) --end;
  std::string out;
  for (size_t i = begin; i < end; ++i) encode_utf8(fold_case_cp(cps[i]), out);
  return out;
}

}  // namespace detail

// Case-folded, punctuation-stripped word list. Hashtag bodies join the
// token stream; non-Latin scripts pass through byte-exactly.
inline std::vector<std::string> tokenize(const std::string& caption,
                                         const std::vector<std::string>& hashtags = {}) {
  std::vector<std::string> tokens;
  const auto cps = detail::decode_utf8(caption);
  size_t i = 0;
  while (i < cps.size()) {
    while (i < cps.size() && detail::is_space_cp(cps[i])) ++i;
    size_t j = i;
    while (j < cps.size() && !detail::is_space_cp(cps[j])) ++j;
    if (j > i) {
      std::string tok = detail::clean_token(cps, i, j);
      if (!tok.empty()) tokens.push_back(std::move(tok));
    }
    i = j;
  }
  for (const auto& h : hashtags) {
    const auto hcps = detail::decode_utf8(h);
    std::string tok = detail::clean_token(hcps, 0, hcps.size());
    if (!tok.empty()) tokens.push_back(std::move(tok));
  }
  return tokens;
}

struct SkipgramConfig {
  int dim = 128;
  int window = 5;
  int negatives = 5;
  int epochs = 15;
  int min_count = 2;
  double learning_rate = 0.025;
  uint64_t seed = 0;

  bool operator==(const SkipgramConfig&) const = default;
};

struct EmbeddingTable {
  std::vector<std::string> vocab;      // ordered by (count desc, token asc)
  std::map<std::string, int> index;
  std::vector<int64_t> counts;
  Eigen::MatrixXd vectors;             // |V| x dim
  SkipgramConfig config;
  std::vector<double> eval_loss;       // frozen-pair loss at each epoch boundary

  int dim() const { return static_cast<int>(vectors.cols()); }
  int size() const { return static_cast<int>(vocab.size()); }

  bool contains(const std::string& token) const { return index.count(token) > 0; }

  Eigen::RowVectorXd vector_of(const std::string& token) const {
    auto it = index.find(token);
    if (it == index.end()) throw ValidationError("token not in vocabulary: \"" + token + "\"");
    return vectors.row(it->second);
  }

  bool operator==(const EmbeddingTable& o) const {
    return vocab == o.vocab && counts == o.counts && config == o.config &&
           vectors.rows() == o.vectors.rows() && vectors.cols() == o.vectors.cols() &&
           vectors == o.vectors;
  }
};

namespace detail {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double log_sigmoid(double x) {
  return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

}  // namespace detail

// Negative-sampling loss for one (center, context) pair against fixed
// negative output vectors. Shared by the trainer, the epoch-boundary
// evaluation, and the finite-difference tests.
inline double sgns_pair_loss(const Eigen::RowVectorXd& center, const Eigen::RowVectorXd& context,
                             const std::vector<Eigen::RowVectorXd>& negatives) {
  double loss = -detail::log_sigmoid(center.dot(context));
  for (const auto& neg : negatives) loss -= detail::log_sigmoid(-center.dot(neg));
  return loss;
}

// Analytic gradients of sgns_pair_loss with respect to the center vector,
// the context output vector and each negative output vector.
inline void sgns_pair_gradients(const Eigen::RowVectorXd& center,
                                const Eigen::RowVectorXd& context,
                                const std::vector<Eigen::RowVectorXd>& negatives,
                                Eigen::RowVectorXd& grad_center, Eigen::RowVectorXd& grad_context,
                                std::vector<Eigen::RowVectorXd>& grad_negatives) {
  const double gp = detail::sigmoid(center.dot(context)) - 1.0;
  grad_center = gp * context;
  grad_context = gp * center;
  grad_negatives.clear();
  for (const auto& neg : negatives) {
    const double gn = detail::sigmoid(center.dot(neg));
    grad_center += gn * neg;
    grad_negatives.push_back(gn * center);
  }
}

// Skip-gram with negative sampling, single-threaded SGD with a linearly
// decaying rate. Deterministic for a fixed seed.
inline EmbeddingTable train_skipgram(const std::vector<std::vector<std::string>>& corpus,
                                     const SkipgramConfig& config) {
  if (config.dim < 1 || config.window < 1 || config.negatives < 0 || config.epochs < 1)
    throw ValidationError("train_skipgram: invalid configuration");

  // vocabulary: counts, min_count filter, (count desc, token asc) order
  std::map<std::string, int64_t> raw_counts;
  for (const auto& sentence : corpus)
    for (const auto& tok : sentence) raw_counts[tok]++;
  std::vector<std::pair<std::string, int64_t>> kept;
  for (const auto& [tok, cnt] : raw_counts)
    if (cnt >= config.min_count) kept.emplace_back(tok, cnt);
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (kept.empty())
    throw ValidationError("train_skipgram: vocabulary empty after min_count filtering");

  EmbeddingTable table;
  table.config = config;
  for (const auto& [tok, cnt] : kept) {
    table.index[tok] = static_cast<int>(table.vocab.size());
    table.vocab.push_back(tok);
    table.counts.push_back(cnt);
  }
  const int v = table.size();

  // unigram^(3/4) negative-sampling distribution as a cumulative table
  std::vector<double> cumulative(static_cast<size_t>(v));
  double total_mass = 0.0;
  for (int i = 0; i < v; ++i) {
    total_mass += std::pow(static_cast<double>(table.counts[static_cast<size_t>(i)]), 0.75);
    cumulative[static_cast<size_t>(i)] = total_mass;
  }
  Rng rng(config.seed);
  auto sample_negative = [&]() {
    const double r = rng.uniform() * total_mass;
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), r);
    return static_cast<int>(std::min<std::ptrdiff_t>(it - cumulative.begin(), v - 1));
  };

  // encode sentences, dropping out-of-vocabulary tokens
  std::vector<std::vector<int>> sentences;
  int64_t total_words = 0;
  for (const auto& sentence : corpus) {
    std::vector<int> enc;
    for (const auto& tok : sentence) {
      auto it = table.index.find(tok);
      if (it != table.index.end()) enc.push_back(it->second);
    }
    total_words += static_cast<int64_t>(enc.size());
    if (enc.size() >= 2) sentences.push_back(std::move(enc));
  }

  Eigen::MatrixXd& syn0 = table.vectors;
  syn0.resize(v, config.dim);
  for (int i = 0; i < v; ++i)
    for (int j = 0; j < config.dim; ++j)
      syn0(i, j) = (rng.uniform() - 0.5) / config.dim;
  Eigen::MatrixXd syn1 = Eigen::MatrixXd::Zero(v, config.dim);

  // frozen evaluation set: every full-window pair, negatives drawn once
  struct EvalPair {
    int center, context;
    std::vector<int> negatives;
  };
  std::vector<EvalPair> eval_pairs;
  {
    Rng eval_rng(mix_seed(config.seed, 0x45564Au));
    auto eval_negative = [&]() {
      const double r = eval_rng.uniform() * total_mass;
      const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), r);
      return static_cast<int>(std::min<std::ptrdiff_t>(it - cumulative.begin(), v - 1));
    };
    for (const auto& sent : sentences)
      for (size_t t = 0; t < sent.size(); ++t)
        for (int o = -config.window; o <= config.window; ++o) {
          if (o == 0) continue;
          const auto u = static_cast<std::ptrdiff_t>(t) + o;
          if (u < 0 || u >= static_cast<std::ptrdiff_t>(sent.size())) continue;
          EvalPair p;
          p.center = sent[t];
          p.context = sent[static_cast<size_t>(u)];
          for (int s = 0; s < config.negatives; ++s) p.negatives.push_back(eval_negative());
          eval_pairs.push_back(std::move(p));
        }
  }
  auto eval_loss = [&]() {
    if (eval_pairs.empty()) return 0.0;
    double acc = 0.0;
    for (const auto& p : eval_pairs) {
      std::vector<Eigen::RowVectorXd> negs;
      negs.reserve(p.negatives.size());
      for (int nidx : p.negatives) negs.emplace_back(syn1.row(nidx));
      acc += sgns_pair_loss(syn0.row(p.center), syn1.row(p.context), negs);
    }
    return acc / static_cast<double>(eval_pairs.size());
  };

  table.eval_loss.push_back(eval_loss());

  const int64_t schedule = std::max<int64_t>(1, total_words * config.epochs);
  int64_t processed = 0;
  Eigen::RowVectorXd err(config.dim);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (const auto& sent : sentences) {
      for (size_t t = 0; t < sent.size(); ++t) {
        const double progress = static_cast<double>(processed) / static_cast<double>(schedule);
        const double lr = config.learning_rate * std::max(1e-4, 1.0 - progress);
        ++processed;
        const int center = sent[t];
        const auto reach = static_cast<int>(1 + rng.uniform_index(
                               static_cast<uint64_t>(config.window)));  // dynamic window
        for (int o = -reach; o <= reach; ++o) {
          if (o == 0) continue;
          const auto u = static_cast<std::ptrdiff_t>(t) + o;
          if (u < 0 || u >= static_cast<std::ptrdiff_t>(sent.size())) continue;
          const int context = sent[static_cast<size_t>(u)];

          err.setZero();
          const double gp = detail::sigmoid(syn0.row(center).dot(syn1.row(context))) - 1.0;
          err += gp * syn1.row(context);
          syn1.row(context) -= lr * gp * syn0.row(center);
          for (int s = 0; s < config.negatives; ++s) {
            const int neg = sample_negative();
            if (neg == context) continue;
            const double gn = detail::sigmoid(syn0.row(center).dot(syn1.row(neg)));
            err += gn * syn1.row(neg);
            syn1.row(neg) -= lr * gn * syn0.row(center);
          }
          syn0.row(center) -= lr * err;
        }
      }
    }
    table.eval_loss.push_back(eval_loss());
  }
  return table;
}

inline std::vector<std::string> profile_tokens(const ProfileRecord& rec) {
  std::vector<std::string> tokens;
  for (const auto& cap : rec.captions) {
    auto t = tokenize(cap.text, cap.hashtags);
    tokens.insert(tokens.end(), t.begin(), t.end());
  }
  return tokens;
}

// One embedding table per region, trained on disjoint corpora. Profile
// indices may restrict training to a subset (for held-out evaluation).
inline std::map<std::string, EmbeddingTable> train_per_region(
    const Dataset& ds, const SkipgramConfig& config,
    const std::vector<int>* profile_subset = nullptr) {
  std::map<std::string, std::vector<std::vector<std::string>>> corpora;
  std::vector<int> indices;
  if (profile_subset) {
    indices = *profile_subset;
  } else {
    indices.resize(ds.profiles.size());
    for (size_t i = 0; i < ds.profiles.size(); ++i) indices[i] = static_cast<int>(i);
  }
  for (int i : indices) {
    const auto& rec = ds.profiles[static_cast<size_t>(i)];
    auto& corpus = corpora[rec.region];
    for (const auto& cap : rec.captions) {
      auto tokens = tokenize(cap.text, cap.hashtags);
      if (!tokens.empty()) corpus.push_back(std::move(tokens));
    }
  }
  std::map<std::string, EmbeddingTable> tables;
  for (auto& [region, corpus] : corpora) {
    if (corpus.empty())
      throw ValidationError("region \"" + region + "\" has no caption text to train on");
    SkipgramConfig cfg = config;
    cfg.seed = mix_seed(config.seed, fnv1a(region));
    tables[region] = train_skipgram(corpus, cfg);
  }
  return tables;
}

// Mean of the embeddings of in-vocabulary token occurrences.
inline FeatureVector user_vector(const std::vector<std::string>& tokens,
                                 const EmbeddingTable& table, int* oov_count = nullptr) {
  FeatureVector fv;
  fv.space = FeatureSpace::Text;
  Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(table.dim());
  int used = 0, oov = 0;
  for (const auto& tok : tokens) {
    auto it = table.index.find(tok);
    if (it == table.index.end()) {
      ++oov;
      continue;
    }
    acc += table.vectors.row(it->second);
    ++used;
  }
  if (oov_count) *oov_count = oov;
  if (used == 0) {
    fv.values = Eigen::VectorXd::Zero(table.dim());
    fv.degenerate = true;
  } else {
    fv.values = (acc / static_cast<double>(used)).transpose();
  }
  return fv;
}

}  // namespace mml::text
