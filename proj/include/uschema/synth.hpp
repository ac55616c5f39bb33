#pragma once

// Synthetic bilingual corpora with known latent truth. Entity pairs carry a
// rank-r factor; each pair's relation is the argmax of its factor against
// unit relation factors. Language-A text covers KB-annotated and
// unannotated pairs; language-B text covers a mix of unannotated A pairs
// (the overlap) and B-only pairs, and is never KB-annotated.

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "uschema/corpus.hpp"
#include "uschema/evaluation.hpp"

namespace uschema {

struct SynthConfig {
  std::uint64_t seed = 1;
  std::size_t relations = 10;
  std::size_t rank = 5;
  std::size_t keywords_per_relation = 3;
  std::size_t function_words = 10;
  std::size_t kb_pairs = 300;    // language A, KB-annotated
  std::size_t text_pairs = 200;  // language A, unannotated
  std::size_t b_pairs = 200;     // language B
  double overlap = 0.5;          // fraction of B pairs drawn from the unannotated A pairs
  std::size_t sentences_per_pair = 3;
  std::size_t dev_pairs = 50;
  std::size_t test_pairs = 100;
  std::size_t min_length = 2, max_length = 6;
  std::size_t test_min_length = 2, test_max_length = 6;
  double keyword_rate = 0.5;
  double tie_fraction = 0.2;
  double noise = 0.1;
  std::string language_a = "en";
  std::string language_b = "es";
};

struct SynthPair {
  std::string subject;
  std::string object;
  std::size_t relation = 0;
  std::vector<double> factor;
};

struct SynthCorpus {
  SynthConfig config;
  std::vector<std::string> relation_names;
  std::vector<std::vector<double>> relation_factors;
  std::vector<SynthPair> pairs;  // training pairs, all groups
  std::vector<Sentence> train_a, train_b;
  std::vector<Triple> kb;
  std::vector<std::pair<std::string, std::string>> dictionary;
  std::vector<Sentence> dev_a, test_a, test_b;
  GoldSet dev_gold_a, test_gold_a, test_gold_b;
  std::vector<SynthPair> dev, test;
  std::size_t shared_b_pairs = 0;
  std::vector<std::string> warnings;

  /// Relation index maximizing factor . relation_factor (lowest index on ties).
  std::size_t latent_relation(const std::vector<double>& factor) const {
    std::size_t best = 0;
    double best_v = -INFINITY;
    for (std::size_t r = 0; r < relation_factors.size(); ++r) {
      double v = 0;
      for (std::size_t k = 0; k < factor.size(); ++k) v += factor[k] * relation_factors[r][k];
      if (v > best_v) best_v = v, best = r;
    }
    return best;
  }
};

/// Index spelled in letters (0 -> "a", 26 -> "ba") so that token names
/// survive digit normalization.
inline std::string letter_code(std::size_t i) {
  std::string out;
  do {
    out.insert(out.begin(), static_cast<char>('a' + i % 26));
    i /= 26;
  } while (i > 0);
  return out;
}

inline std::string synth_keyword(const std::string& lang, std::size_t relation, std::size_t k) {
  return lang + "_k" + letter_code(relation) + "_" + letter_code(k);
}

inline std::string synth_function_word(const std::string& lang, std::size_t j) {
  return lang + "_f" + letter_code(j);
}

namespace detail {

class SynthSampler {
 public:
  SynthSampler(const SynthConfig& cfg, SynthCorpus& corpus) : cfg_(cfg), corpus_(corpus), rng_(cfg.seed) {}

  void run() {
    make_relations();
    const std::size_t n_shared = std::min(cfg_.text_pairs, std::size_t(std::llround(cfg_.overlap * double(cfg_.b_pairs))));
    corpus_.shared_b_pairs = n_shared;

    std::vector<std::size_t> kb_ids, text_ids, b_ids;
    for (std::size_t i = 0; i < cfg_.kb_pairs; ++i) kb_ids.push_back(new_pair(corpus_.pairs));
    for (std::size_t i = 0; i < cfg_.text_pairs; ++i) text_ids.push_back(new_pair(corpus_.pairs));
    std::vector<std::size_t> shuffled = text_ids;
    std::shuffle(shuffled.begin(), shuffled.end(), rng_);
    b_ids.assign(shuffled.begin(), shuffled.begin() + std::ptrdiff_t(n_shared));
    while (b_ids.size() < cfg_.b_pairs) b_ids.push_back(new_pair(corpus_.pairs));

    for (auto i : kb_ids) {
      const auto& p = corpus_.pairs[i];
      corpus_.kb.push_back(kb_fact(p));
    }
    std::size_t doc = 0;
    for (auto i : kb_ids) emit(corpus_.pairs[i], cfg_.language_a, "a", corpus_.train_a, doc, cfg_.min_length, cfg_.max_length);
    for (auto i : text_ids) emit(corpus_.pairs[i], cfg_.language_a, "a", corpus_.train_a, doc, cfg_.min_length, cfg_.max_length);
    for (auto i : b_ids) emit(corpus_.pairs[i], cfg_.language_b, "b", corpus_.train_b, doc, cfg_.min_length, cfg_.max_length);

    for (std::size_t i = 0; i < cfg_.dev_pairs; ++i) {
      new_pair(corpus_.dev);
      held_out(corpus_.dev.back(), cfg_.language_a, "deva", corpus_.dev_a, corpus_.dev_gold_a, cfg_.min_length, cfg_.max_length);
    }
    for (std::size_t i = 0; i < cfg_.test_pairs; ++i) {
      new_pair(corpus_.test);
      const auto& p = corpus_.test.back();
      held_out(p, cfg_.language_a, "testa", corpus_.test_a, corpus_.test_gold_a, cfg_.test_min_length, cfg_.test_max_length);
      held_out(p, cfg_.language_b, "testb", corpus_.test_b, corpus_.test_gold_b, cfg_.test_min_length, cfg_.test_max_length);
    }

    make_dictionary();
    if (n_shared == 0 && cfg_.tie_fraction == 0)
      corpus_.warnings.push_back("no shared entity pairs and no dictionary ties: language B is disconnected from the KB");
  }

 private:
  void make_relations() {
    std::normal_distribution<double> gauss;
    for (std::size_t r = 0; r < cfg_.relations; ++r) {
      corpus_.relation_names.push_back("rel" + std::to_string(r));
      std::vector<double> v(cfg_.rank);
      double norm = 0;
      do {
        norm = 0;
        for (auto& x : v) {
          x = gauss(rng_);
          norm += x * x;
        }
      } while (norm == 0);
      for (auto& x : v) x /= std::sqrt(norm);
      corpus_.relation_factors.push_back(std::move(v));
    }
  }

  // A new entity is attached to a random existing one, so all pairs form a
  // single tree. Relations cycle so every relation gets the same share.
  std::size_t new_pair(std::vector<SynthPair>& into) {
    std::string subject;
    if (entities_ == 0) {
      subject = entity(entities_++);
    } else {
      subject = entity(std::uniform_int_distribution<std::size_t>(0, entities_ - 1)(rng_));
    }
    std::string object = entity(entities_++);
    if (std::bernoulli_distribution(0.5)(rng_)) std::swap(subject, object);

    const std::size_t target = pair_counter_++ % cfg_.relations;
    std::normal_distribution<double> gauss(0.0, cfg_.noise);
    SynthPair p{subject, object, 0, corpus_.relation_factors[target]};
    for (auto& x : p.factor) x += gauss(rng_);
    p.relation = corpus_.latent_relation(p.factor);
    into.push_back(std::move(p));
    return into.size() - 1;
  }

  static std::string entity(std::size_t i) { return "e" + std::to_string(i); }

  Triple kb_fact(const SynthPair& p) const {
    Triple t;
    t.subject = p.subject;
    t.relation = corpus_.relation_names[p.relation];
    t.object = p.object;
    t.kind = TripleKind::kb;
    return t;
  }

  std::vector<std::string> pattern(std::size_t relation, const std::string& lang, std::size_t lo, std::size_t hi) {
    const std::size_t len = std::uniform_int_distribution<std::size_t>(lo, hi)(rng_);
    std::uniform_int_distribution<std::size_t> kw(0, cfg_.keywords_per_relation - 1);
    std::uniform_int_distribution<std::size_t> fw(0, cfg_.function_words - 1);
    std::uniform_int_distribution<std::size_t> pos(0, len - 1);
    std::bernoulli_distribution keyword(cfg_.keyword_rate);
    std::vector<std::string> out(len);
    for (auto& tok : out)
      tok = keyword(rng_) ? synth_keyword(lang, relation, kw(rng_)) : synth_function_word(lang, fw(rng_));
    out[pos(rng_)] = synth_keyword(lang, relation, kw(rng_));
    return out;
  }

  Sentence sentence(const SynthPair& p, const std::string& lang, const std::string& doc, std::size_t lo, std::size_t hi) {
    Sentence s;
    s.doc_id = doc;
    s.index = 0;
    s.tokens.push_back("E" + p.subject.substr(1));
    for (auto& tok : pattern(p.relation, lang, lo, hi)) s.tokens.push_back(std::move(tok));
    s.tokens.push_back("E" + p.object.substr(1));
    s.mentions.push_back({p.subject, 0, 1, s.tokens.front()});
    s.mentions.push_back({p.object, s.tokens.size() - 1, s.tokens.size(), s.tokens.back()});
    return s;
  }

  void emit(const SynthPair& p, const std::string& lang, const std::string& prefix, std::vector<Sentence>& out,
            std::size_t& doc, std::size_t lo, std::size_t hi) {
    for (std::size_t k = 0; k < cfg_.sentences_per_pair; ++k)
      out.push_back(sentence(p, lang, prefix + "doc" + std::to_string(doc++), lo, hi));
  }

  void held_out(const SynthPair& p, const std::string& lang, const std::string& prefix, std::vector<Sentence>& out,
                GoldSet& gold, std::size_t lo, std::size_t hi) {
    const std::string doc = prefix + std::to_string(out.size());
    out.push_back(sentence(p, lang, doc, lo, hi));
    gold.keys.push_back({p.subject, corpus_.relation_names[p.relation], {p.object}, {doc}});
  }

  void make_dictionary() {
    std::vector<std::pair<std::string, std::string>> all;
    for (std::size_t r = 0; r < cfg_.relations; ++r)
      for (std::size_t k = 0; k < cfg_.keywords_per_relation; ++k)
        all.emplace_back(synth_keyword(cfg_.language_a, r, k), synth_keyword(cfg_.language_b, r, k));
    for (std::size_t j = 0; j < cfg_.function_words; ++j)
      all.emplace_back(synth_function_word(cfg_.language_a, j), synth_function_word(cfg_.language_b, j));
    std::shuffle(all.begin(), all.end(), rng_);
    all.resize(std::size_t(std::llround(cfg_.tie_fraction * double(all.size()))));
    std::sort(all.begin(), all.end());
    corpus_.dictionary = std::move(all);
  }

  const SynthConfig& cfg_;
  SynthCorpus& corpus_;
  std::mt19937_64 rng_;
  std::size_t entities_ = 0;
  std::size_t pair_counter_ = 0;
};

}  // namespace detail

inline SynthCorpus generate_synthetic(const SynthConfig& cfg) {
  if (cfg.relations == 0 || cfg.rank == 0 || cfg.keywords_per_relation == 0 || cfg.function_words == 0)
    throw std::invalid_argument("synthetic config needs relations, rank, keywords and function words");
  if (cfg.min_length == 0 || cfg.min_length > cfg.max_length || cfg.test_min_length == 0 ||
      cfg.test_min_length > cfg.test_max_length)
    throw std::invalid_argument("bad pattern length range");
  if (cfg.overlap < 0 || cfg.overlap > 1 || cfg.tie_fraction < 0 || cfg.tie_fraction > 1)
    throw std::invalid_argument("overlap and tie fraction must lie in [0, 1]");
  SynthCorpus corpus;
  corpus.config = cfg;
  detail::SynthSampler(cfg, corpus).run();
  return corpus;
}

/// Writes train.<a>, train.<b>, kb.tsv, dict.tsv, dev.<a>, test.<a>,
/// test.<b> and the matching gold files into `dir`.
inline void write_synthetic(const SynthCorpus& c, const std::string& dir) {
  const auto& a = c.config.language_a;
  const auto& b = c.config.language_b;
  write_sentences(c.train_a, dir + "/train." + a);
  write_sentences(c.train_b, dir + "/train." + b);
  write_kb(c.kb, dir + "/kb.tsv");
  {
    auto out = open_output(dir + "/dict.tsv");
    for (const auto& [wa, wb] : c.dictionary) out << wa << '\t' << wb << '\n';
  }
  write_sentences(c.dev_a, dir + "/dev." + a);
  write_sentences(c.test_a, dir + "/test." + a);
  write_sentences(c.test_b, dir + "/test." + b);
  auto gold = [&](const GoldSet& g, const std::string& name) {
    auto out = open_output(dir + "/" + name);
    write_gold(g, out);
  };
  gold(c.dev_gold_a, "dev_gold." + a);
  gold(c.test_gold_a, "test_gold." + a);
  gold(c.test_gold_b, "test_gold." + b);
}

// ---------------------------------------------------------------------------
// Low-rank cell matrix for factorization recovery

struct LowRankConfig {
  std::uint64_t seed = 1;
  std::size_t pairs = 200;
  std::size_t relations = 30;
  std::size_t rank = 5;
  double observed_fraction = 0.2;  // per relation column
  double held_out_fraction = 0.1;  // of the observed cells
  bool planted = true;  // latent types (index mod rank) plus `spread` noise; else isotropic Gaussian
  double spread = 0.2;
};

struct LowRankCells {
  std::vector<std::pair<std::size_t, std::size_t>> train;     // (pair, relation)
  std::vector<std::pair<std::size_t, std::size_t>> held_out;  // observed, withheld from training
  std::vector<std::pair<std::size_t, std::size_t>> unobserved;
};

/// Each relation column marks its top observed_fraction pairs under a
/// rank-r score matrix U V^T as observed. Planted factors are the unit
/// vector of the row's latent type (index mod r) plus Gaussian noise of
/// standard deviation `spread`; otherwise all factors are standard Gaussian.
inline LowRankCells generate_low_rank(const LowRankConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> gauss;
  auto factors = [&](std::size_t rows) {
    std::vector<double> f(rows * cfg.rank);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t k = 0; k < cfg.rank; ++k)
        f[i * cfg.rank + k] = cfg.planted ? double(k == i % cfg.rank) + cfg.spread * gauss(rng) : gauss(rng);
    return f;
  };
  const auto u = factors(cfg.pairs);
  const auto v = factors(cfg.relations);
  const std::size_t per_column = std::size_t(std::llround(cfg.observed_fraction * double(cfg.pairs)));

  std::vector<std::pair<std::size_t, std::size_t>> observed;
  LowRankCells cells;
  for (std::size_t r = 0; r < cfg.relations; ++r) {
    std::vector<std::pair<double, std::size_t>> col;
    for (std::size_t p = 0; p < cfg.pairs; ++p) {
      double s = 0;
      for (std::size_t k = 0; k < cfg.rank; ++k) s += u[p * cfg.rank + k] * v[r * cfg.rank + k];
      col.emplace_back(s, p);
    }
    std::sort(col.begin(), col.end(), [](const auto& x, const auto& y) { return x.first != y.first ? x.first > y.first : x.second < y.second; });
    for (std::size_t i = 0; i < col.size(); ++i)
      (i < per_column ? observed : cells.unobserved).emplace_back(col[i].second, r);
  }
  std::shuffle(observed.begin(), observed.end(), rng);
  const std::size_t n_held = std::size_t(std::llround(cfg.held_out_fraction * double(observed.size())));
  cells.held_out.assign(observed.begin(), observed.begin() + std::ptrdiff_t(n_held));
  cells.train.assign(observed.begin() + std::ptrdiff_t(n_held), observed.end());
  return cells;
}

/// Exact ROC AUC: probability that a positive outranks a negative, ties
/// counted as one half.
inline double exact_auc(std::vector<double> positives, std::vector<double> negatives) {
  if (positives.empty() || negatives.empty()) throw std::invalid_argument("AUC needs positives and negatives");
  std::sort(negatives.begin(), negatives.end());
  double wins = 0;
  for (const double p : positives) {
    const auto lo = std::lower_bound(negatives.begin(), negatives.end(), p);
    const auto hi = std::upper_bound(lo, negatives.end(), p);
    wins += double(lo - negatives.begin()) + 0.5 * double(hi - lo);
  }
  return wins / (double(positives.size()) * double(negatives.size()));
}

}  // namespace uschema
