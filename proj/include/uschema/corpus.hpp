#pragma once

// Corpus ingestion: sentences with pre-linked mentions, KB facts, surface
// pattern extraction, vocabulary building, entity-pair filtering and
// cross-lingual vocabulary tying.

#include <algorithm>
#include <bit>
#include <cstddef>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "uschema/text.hpp"

namespace uschema {

inline constexpr std::string_view kUnkToken = "<unk>";
inline constexpr std::string_view kEmptyPatternToken = "<empty>";
inline constexpr std::string_view kPadToken = "<pad>";
// Direction markers: the forward marker means the subject mention precedes
// the object mention in the sentence.
inline constexpr std::string_view kForwardMarker = "<fwd>";
inline constexpr std::string_view kInverseMarker = "<inv>";

inline std::string normalize_digits(std::string_view token) {
  std::string out(token);
  for (auto& c : out)
    if (c >= '0' && c <= '9') c = '#';
  return out;
}

struct Mention {
  std::string entity;
  std::size_t start = 0;  // inclusive token index
  std::size_t end = 0;    // exclusive
  std::string surface;
};

struct Sentence {
  std::string doc_id;
  long long index = 0;
  std::vector<std::string> tokens;
  std::vector<Mention> mentions;
};

/// Empty string when valid, otherwise the violated constraint.
inline std::string validate(const Sentence& s) {
  std::vector<const Mention*> sorted;
  for (const auto& m : s.mentions) {
    if (m.start >= m.end) return "mention " + m.entity + " has start >= end";
    if (m.end > s.tokens.size()) return "mention " + m.entity + " exceeds sentence length";
    sorted.push_back(&m);
  }
  std::sort(sorted.begin(), sorted.end(),
            [](const Mention* a, const Mention* b) { return a->start < b->start; });
  for (std::size_t i = 1; i < sorted.size(); ++i)
    if (sorted[i]->start < sorted[i - 1]->end) return "overlapping mentions";
  return {};
}

struct Provenance {
  std::string doc_id;
  long long sentence_index = 0;
  auto operator<=>(const Provenance&) const = default;
};

enum class TripleKind { kb, text };

struct Triple {
  std::string subject;
  std::string relation;  // KB relation name, or the direction-marked pattern key
  std::string object;
  std::string language;  // empty for KB facts
  std::optional<Provenance> provenance;
  TripleKind kind = TripleKind::kb;
  std::vector<std::string> pattern;  // literal intervening tokens (text only)
  bool inverse = false;              // object mention precedes subject mention

  bool operator==(const Triple&) const = default;
};

inline std::string_view direction_marker(bool inverse) {
  return inverse ? kInverseMarker : kForwardMarker;
}

/// Direction marker followed by the pattern tokens (or the empty-pattern
/// sentinel).
inline std::vector<std::string> marked_pattern(const std::vector<std::string>& pattern, bool inverse) {
  std::vector<std::string> out;
  out.reserve(pattern.size() + 1);
  out.emplace_back(direction_marker(inverse));
  if (pattern.empty()) out.emplace_back(kEmptyPatternToken);
  for (const auto& t : pattern) out.push_back(t);
  return out;
}

inline std::string text_relation_key(const std::vector<std::string>& pattern, bool inverse) {
  return join(marked_pattern(pattern, inverse), " ");
}

inline std::string pair_key(std::string_view subject, std::string_view object) {
  std::string k(subject);
  k.push_back('\t');
  k.append(object);
  return k;
}

inline Triple make_text_triple(std::string subject, std::vector<std::string> pattern, std::string object,
                               bool inverse, std::string language, Provenance prov) {
  Triple t;
  t.subject = std::move(subject);
  t.object = std::move(object);
  t.kind = TripleKind::text;
  t.inverse = inverse;
  t.language = std::move(language);
  t.relation = text_relation_key(pattern, inverse);
  t.pattern = std::move(pattern);
  t.provenance = std::move(prov);
  return t;
}

/// One triple per ordered pair of mentions of distinct entities whose gap is
/// at most `max_len` tokens. Both argument orders are emitted; the later
/// mention as subject gets the inverse marker.
inline std::vector<Triple> extract_text_triples(const Sentence& sentence, std::size_t max_len,
                                                const std::string& language = "") {
  std::vector<const Mention*> ms;
  for (const auto& m : sentence.mentions) ms.push_back(&m);
  std::stable_sort(ms.begin(), ms.end(), [](const Mention* a, const Mention* b) { return a->start < b->start; });

  std::vector<Triple> out;
  const Provenance prov{sentence.doc_id, sentence.index};
  for (std::size_t i = 0; i < ms.size(); ++i) {
    for (std::size_t j = i + 1; j < ms.size(); ++j) {
      const Mention& a = *ms[i];
      const Mention& b = *ms[j];
      if (a.entity == b.entity || b.start < a.end) continue;
      if (b.start - a.end > max_len) continue;
      std::vector<std::string> between(sentence.tokens.begin() + std::ptrdiff_t(a.end),
                                       sentence.tokens.begin() + std::ptrdiff_t(b.start));
      out.push_back(make_text_triple(a.entity, between, b.entity, false, language, prov));
      out.push_back(make_text_triple(b.entity, std::move(between), a.entity, true, language, prov));
    }
  }
  return out;
}

/// Patterns longer than five tokens keep their first and last two tokens;
/// the k middle tokens collapse to "[ceil(log2 k)]".
inline std::vector<std::string> shorten_pattern(std::span<const std::string> tokens) {
  if (tokens.size() <= 5) return {tokens.begin(), tokens.end()};
  const std::size_t k = tokens.size() - 4;
  const auto ceil_log2 = std::bit_width(k - 1);
  return {tokens[0], tokens[1], "[" + std::to_string(ceil_log2) + "]", tokens[tokens.size() - 2],
          tokens[tokens.size() - 1]};
}

// ---------------------------------------------------------------------------

/// Token table keyed on (language, token). Each language built with
/// build_vocab owns its own UNK entry; reserved structural tokens live under
/// the empty language and are shared. `canonical` maps every id to the id
/// whose embedding row it uses.
class Vocabulary {
 public:
  struct Entry {
    std::string language;
    std::string token;
    long long count = 0;
  };

  std::size_t add(std::string language, std::string token, long long count) {
    auto key = make_key(language, token);
    if (auto it = ids_.find(key); it != ids_.end()) {
      entries_[it->second].count += count;
      return it->second;
    }
    const std::size_t id = entries_.size();
    entries_.push_back({std::move(language), std::move(token), count});
    canonical_.push_back(id);
    ids_.emplace(std::move(key), id);
    return id;
  }

  /// Adds a language-neutral token (direction markers, padding) if absent.
  std::size_t add_reserved(std::string_view token) { return add("", std::string(token), 0); }

  std::optional<std::size_t> find(std::string_view token, std::string_view language = "") const {
    if (auto it = ids_.find(make_key(language, token)); it != ids_.end()) return it->second;
    return std::nullopt;
  }

  bool contains(std::string_view token, std::string_view language = "") const {
    return find(token, language).has_value();
  }

  /// Resolves a token: exact entry, else a reserved entry, else the
  /// language's UNK, else the shared UNK.
  std::size_t id(std::string_view token, std::string_view language = "") const {
    if (auto i = find(token, language)) return *i;
    if (auto i = find(token, "")) return *i;
    return unk_id(language);
  }

  std::size_t unk_id(std::string_view language = "") const {
    if (auto i = find(kUnkToken, language)) return *i;
    if (auto i = find(kUnkToken, "")) return *i;
    throw std::out_of_range("vocabulary has no UNK entry for language '" + std::string(language) + "'");
  }

  std::size_t canonical(std::size_t id) const { return canonical_.at(id); }

  /// Makes `b` share `a`'s canonical row. Returns false if already shared.
  bool tie(std::size_t a, std::size_t b) {
    const std::size_t ca = canonical_.at(a);
    const std::size_t cb = canonical_.at(b);
    if (ca == cb) return false;
    for (auto& c : canonical_)
      if (c == cb) c = ca;
    return true;
  }

  std::size_t size() const noexcept { return entries_.size(); }

  std::size_t class_count() const {
    return std::set<std::size_t>(canonical_.begin(), canonical_.end()).size();
  }

  const Entry& entry(std::size_t id) const { return entries_.at(id); }
  const std::vector<Entry>& entries() const noexcept { return entries_; }
  long long count(std::size_t id) const { return entries_.at(id).count; }

  std::vector<std::string> languages() const {
    std::set<std::string> langs;
    for (const auto& e : entries_) langs.insert(e.language);
    return {langs.begin(), langs.end()};
  }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    if (a.canonical_ != b.canonical_ || a.entries_.size() != b.entries_.size()) return false;
    for (std::size_t i = 0; i < a.entries_.size(); ++i) {
      const auto &x = a.entries_[i], &y = b.entries_[i];
      if (x.language != y.language || x.token != y.token || x.count != y.count) return false;
    }
    return true;
  }

  // Used when restoring a checkpoint.
  void set_canonical(std::size_t id, std::size_t canonical) { canonical_.at(id) = canonical; }

 private:
  static std::string make_key(std::string_view language, std::string_view token) {
    std::string k(language);
    k.push_back('\x1f');
    k.append(token);
    return k;
  }

  std::vector<Entry> entries_;
  std::vector<std::size_t> canonical_;
  std::unordered_map<std::string, std::size_t> ids_;
};

/// UNK is entry 0 and absorbs the counts of every token seen fewer than
/// `min_count` times. Kept tokens are ordered by descending count, then
/// lexicographically.
template <class Range>
Vocabulary build_vocab(const Range& tokens, long long min_count, const std::string& language = "") {
  if (min_count < 1) throw std::invalid_argument("min_count must be >= 1");
  std::map<std::string, long long> counts;
  for (const auto& t : tokens) ++counts[std::string(t)];
  std::vector<std::pair<std::string, long long>> kept;
  long long unk_count = 0;
  for (auto& [tok, c] : counts) {
    if (c >= min_count && tok != kUnkToken)
      kept.emplace_back(tok, c);
    else
      unk_count += c;
  }
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocabulary v;
  v.add(language, std::string(kUnkToken), unk_count);
  for (auto& [tok, c] : kept) v.add(language, tok, c);
  return v;
}

struct TieResult {
  Vocabulary vocabulary;
  std::size_t applied = 0;
  std::vector<std::string> report;  // skipped or conflicting pairs
};

/// Merges two single-language vocabularies (A's ids are preserved, B's are
/// offset by |A|) and ties each dictionary pair to one canonical row, the A
/// word's id. A word already used by an earlier pair is not tied again.
inline TieResult tie_vocabularies(const Vocabulary& a, const Vocabulary& b,
                                  const std::vector<std::pair<std::string, std::string>>& pairs) {
  TieResult result;
  auto& merged = result.vocabulary;
  for (const auto& e : a.entries()) merged.add(e.language, e.token, e.count);
  for (const auto& e : b.entries()) {
    if (merged.contains(e.token, e.language))
      throw std::invalid_argument("vocabularies share language tag '" + e.language + "'");
    merged.add(e.language, e.token, e.count);
  }
  for (std::size_t i = 0; i < a.size(); ++i) merged.set_canonical(i, a.canonical(i));
  for (std::size_t i = 0; i < b.size(); ++i) merged.set_canonical(a.size() + i, a.size() + b.canonical(i));

  const std::string lang_a = a.size() ? a.entry(0).language : "";
  const std::string lang_b = b.size() ? b.entry(0).language : "";
  std::set<std::pair<std::string, std::string>> seen;
  std::set<std::size_t> used;
  for (const auto& [wa, wb] : pairs) {
    if (!seen.insert({wa, wb}).second) continue;
    const auto ia = a.find(wa, lang_a);
    const auto ib = b.find(wb, lang_b);
    if (!ia || !ib || *ia == a.unk_id(lang_a) || *ib == b.unk_id(lang_b)) {
      result.report.push_back("skipped (" + wa + ", " + wb + "): out of vocabulary");
      continue;
    }
    const std::size_t ma = *ia, mb = a.size() + *ib;
    if (used.count(ma) || used.count(mb)) {
      result.report.push_back("conflict (" + wa + ", " + wb + "): word already tied");
      continue;
    }
    used.insert(ma);
    used.insert(mb);
    if (merged.tie(ma, mb)) ++result.applied;
  }
  return result;
}

// ---------------------------------------------------------------------------

/// Triples with dense ids for entity pairs and relations, assigned in order
/// of first appearance.
struct TripleStore {
  std::vector<Triple> triples;
  std::vector<std::size_t> triple_pair;
  std::vector<std::size_t> triple_relation;
  std::vector<std::string> pairs;
  std::vector<std::string> relations;
  std::vector<std::size_t> pair_counts;
  std::unordered_map<std::string, std::size_t> pair_ids;
  std::unordered_map<std::string, std::size_t> relation_ids;

  static TripleStore build(std::vector<Triple> triples) {
    TripleStore s;
    s.triples = std::move(triples);
    for (const auto& t : s.triples) {
      auto pk = pair_key(t.subject, t.object);
      auto [pit, pnew] = s.pair_ids.try_emplace(pk, s.pairs.size());
      if (pnew) {
        s.pairs.push_back(std::move(pk));
        s.pair_counts.push_back(0);
      }
      ++s.pair_counts[pit->second];
      s.triple_pair.push_back(pit->second);
      auto [rit, rnew] = s.relation_ids.try_emplace(t.relation, s.relations.size());
      if (rnew) s.relations.push_back(t.relation);
      s.triple_relation.push_back(rit->second);
    }
    return s;
  }

  std::size_t size() const noexcept { return triples.size(); }
  bool empty() const noexcept { return triples.empty(); }
};

struct FilterResult {
  TripleStore store;
  std::size_t pairs_below_count = 0;
  std::size_t pairs_outside_component = 0;
  std::size_t component_entities = 0;
  bool too_sparse = false;  // nothing survived
};

/// Disjoint-set forest over dense indices.
class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n), size_(n, 1) { std::iota(parent_.begin(), parent_.end(), 0); }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (size_[a] < size_[b]) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
  }

  std::size_t component_size(std::size_t x) { return size_[find(x)]; }

 private:
  std::vector<std::size_t> parent_;
  std::vector<std::size_t> size_;
};

/// Drops pairs seen fewer than `min_pair_count` times, then keeps only the
/// triples inside the largest connected component of the entity graph built
/// from the surviving pairs. Equal-size components are ranked by their
/// smallest entity id.
inline FilterResult filter_component(const TripleStore& store, std::size_t min_pair_count) {
  FilterResult result;
  std::vector<bool> keep_pair(store.pairs.size());
  std::set<std::string> entities;
  for (std::size_t i = 0; i < store.triples.size(); ++i) {
    const std::size_t p = store.triple_pair[i];
    keep_pair[p] = store.pair_counts[p] >= min_pair_count;
    if (keep_pair[p]) {
      entities.insert(store.triples[i].subject);
      entities.insert(store.triples[i].object);
    }
  }
  for (std::size_t p = 0; p < store.pairs.size(); ++p)
    if (!keep_pair[p]) ++result.pairs_below_count;

  // std::set iteration is sorted, so index order is entity-id order.
  std::unordered_map<std::string, std::size_t> index;
  for (const auto& e : entities) index.emplace(e, index.size());
  UnionFind uf(index.size());
  for (std::size_t i = 0; i < store.triples.size(); ++i)
    if (keep_pair[store.triple_pair[i]])
      uf.unite(index.at(store.triples[i].subject), index.at(store.triples[i].object));

  std::size_t best_root = 0, best_size = 0;
  for (std::size_t e = 0; e < index.size(); ++e) {
    const std::size_t sz = uf.component_size(e);
    if (sz > best_size) {  // strict: the first index reached wins ties
      best_size = sz;
      best_root = uf.find(e);
    }
  }
  result.component_entities = best_size;

  std::vector<Triple> kept;
  std::vector<bool> counted(store.pairs.size());
  for (std::size_t i = 0; i < store.triples.size(); ++i) {
    const std::size_t p = store.triple_pair[i];
    if (!keep_pair[p]) continue;
    if (uf.find(index.at(store.triples[i].subject)) == best_root) {
      kept.push_back(store.triples[i]);
    } else if (!counted[p]) {
      counted[p] = true;
      ++result.pairs_outside_component;
    }
  }
  result.store = TripleStore::build(std::move(kept));
  result.too_sparse = result.store.empty();
  return result;
}

// ---------------------------------------------------------------------------

struct PreprocessConfig {
  std::size_t max_pattern_length = 20;
  long long min_token_count = 5;
  std::size_t min_pair_count = 10;
};

struct LanguageCorpus {
  std::string language;
  std::vector<Sentence> sentences;
};

struct PreprocessResult {
  FilterResult filtered;
  std::map<std::string, Vocabulary> vocabularies;
};

/// Extracts text triples per language, maps rare pattern tokens to UNK,
/// adds the KB facts and applies pair-count and component filtering.
inline PreprocessResult preprocess(const std::vector<LanguageCorpus>& corpora, const std::vector<Triple>& kb,
                                   const PreprocessConfig& cfg) {
  PreprocessResult result;
  std::vector<Triple> all;
  for (const auto& corpus : corpora) {
    std::vector<Triple> triples;
    for (const auto& s : corpus.sentences)
      for (auto& t : extract_text_triples(s, cfg.max_pattern_length, corpus.language)) triples.push_back(std::move(t));
    std::vector<std::string> tokens;
    for (const auto& t : triples)
      if (!t.inverse) tokens.insert(tokens.end(), t.pattern.begin(), t.pattern.end());
    auto vocab = build_vocab(tokens, cfg.min_token_count, corpus.language);
    for (auto& t : triples) {
      bool changed = false;
      for (auto& tok : t.pattern)
        if (!vocab.contains(tok, corpus.language)) tok = std::string(kUnkToken), changed = true;
      if (changed) t.relation = text_relation_key(t.pattern, t.inverse);
      all.push_back(std::move(t));
    }
    if (!result.vocabularies.emplace(corpus.language, std::move(vocab)).second)
      throw std::invalid_argument("language '" + corpus.language + "' given twice");
  }
  for (const auto& f : kb) all.push_back(f);
  result.filtered = filter_component(TripleStore::build(std::move(all)), cfg.min_pair_count);
  return result;
}

// ---------------------------------------------------------------------------
// File formats

/// doc_id TAB sentence_index TAB tokens TAB entity:start:end:surface;...
/// Tokens are digit-normalized on read.
inline std::vector<Sentence> read_sentences(const std::string& path) {
  std::vector<Sentence> out;
  for_each_line(path, [&](std::string_view line, std::size_t n) {
    auto cols = split(line, '\t');
    if (cols.size() < 3 || cols.size() > 4) throw ParseError(path, n, "expected 3 or 4 tab-separated columns");
    Sentence s;
    s.doc_id = cols[0];
    if (!parse_long(cols[1], s.index)) throw ParseError(path, n, "bad sentence index '" + cols[1] + "'");
    for (auto& t : split_ws(cols[2])) s.tokens.push_back(normalize_digits(t));
    if (cols.size() == 4 && !cols[3].empty()) {
      for (const auto& field : split(cols[3], ';')) {
        if (field.empty()) continue;
        const auto c1 = field.find(':');
        const auto c2 = c1 == std::string::npos ? c1 : field.find(':', c1 + 1);
        const auto c3 = c2 == std::string::npos ? c2 : field.find(':', c2 + 1);
        if (c3 == std::string::npos) throw ParseError(path, n, "bad mention '" + field + "'");
        Mention m;
        m.entity = field.substr(0, c1);
        long long start = 0, end = 0;
        if (m.entity.empty() || !parse_long(std::string_view(field).substr(c1 + 1, c2 - c1 - 1), start) ||
            !parse_long(std::string_view(field).substr(c2 + 1, c3 - c2 - 1), end) || start < 0 || end < 0)
          throw ParseError(path, n, "bad mention '" + field + "'");
        m.start = std::size_t(start);
        m.end = std::size_t(end);
        m.surface = field.substr(c3 + 1);
        s.mentions.push_back(std::move(m));
      }
    }
    if (auto err = validate(s); !err.empty()) throw ParseError(path, n, err);
    out.push_back(std::move(s));
  });
  return out;
}

inline void write_sentences(const std::vector<Sentence>& sentences, const std::string& path) {
  auto out = open_output(path);
  for (const auto& s : sentences) {
    out << s.doc_id << '\t' << s.index << '\t' << join(s.tokens, " ") << '\t';
    bool first = true;
    for (const auto& m : s.mentions) {
      if (!first) out << ';';
      out << m.entity << ':' << m.start << ':' << m.end << ':' << m.surface;
      first = false;
    }
    out << '\n';
  }
}

/// subject TAB relation TAB object
inline std::vector<Triple> read_kb(const std::string& path) {
  std::vector<Triple> out;
  for_each_line(path, [&](std::string_view line, std::size_t n) {
    auto cols = split(line, '\t');
    if (cols.size() != 3 || cols[0].empty() || cols[1].empty() || cols[2].empty())
      throw ParseError(path, n, "expected subject TAB relation TAB object");
    Triple t;
    t.subject = cols[0];
    t.relation = cols[1];
    t.object = cols[2];
    t.kind = TripleKind::kb;
    out.push_back(std::move(t));
  });
  return out;
}

inline void write_kb(const std::vector<Triple>& facts, const std::string& path) {
  auto out = open_output(path);
  for (const auto& t : facts) out << t.subject << '\t' << t.relation << '\t' << t.object << '\n';
}

/// word_a TAB word_b, digit-normalized.
inline std::vector<std::pair<std::string, std::string>> read_dictionary(const std::string& path) {
  std::vector<std::pair<std::string, std::string>> out;
  for_each_line(path, [&](std::string_view line, std::size_t n) {
    auto cols = split(line, '\t');
    if (cols.size() != 2 || cols[0].empty() || cols[1].empty())
      throw ParseError(path, n, "expected word_a TAB word_b");
    out.emplace_back(normalize_digits(cols[0]), normalize_digits(cols[1]));
  });
  return out;
}

inline constexpr std::string_view kTripleStoreMagic = "uschema-triples";
inline constexpr int kTripleStoreVersion = 1;

/// Header line "uschema-triples TAB 1", then one triple per line:
/// kind, subject, relation-or-marker, object, language, doc_id,
/// sentence_index, space-joined pattern.
inline void write_triple_store(const TripleStore& store, const std::string& path) {
  auto out = open_output(path);
  out << kTripleStoreMagic << '\t' << kTripleStoreVersion << '\n';
  for (const auto& t : store.triples) {
    if (t.kind == TripleKind::kb) {
      out << "kb\t" << t.subject << '\t' << t.relation << '\t' << t.object << '\t' << t.language << "\t\t\t\n";
    } else {
      out << "text\t" << t.subject << '\t' << direction_marker(t.inverse) << '\t' << t.object << '\t' << t.language
          << '\t' << t.provenance->doc_id << '\t' << t.provenance->sentence_index << '\t' << join(t.pattern, " ")
          << '\n';
    }
  }
}

inline TripleStore read_triple_store(const std::string& path) {
  std::vector<Triple> triples;
  bool header = false;
  for_each_line(path, [&](std::string_view line, std::size_t n) {
    auto cols = split(line, '\t');
    if (!header) {
      long long version = 0;
      if (cols.size() != 2 || cols[0] != kTripleStoreMagic || !parse_long(cols[1], version))
        throw ParseError(path, n, "missing triple-store header");
      if (version != kTripleStoreVersion)
        throw ParseError(path, n, "unsupported triple-store version " + cols[1]);
      header = true;
      return;
    }
    if (cols.size() != 8) throw ParseError(path, n, "expected 8 tab-separated columns");
    if (cols[0] == "kb") {
      Triple t;
      t.kind = TripleKind::kb;
      t.subject = cols[1];
      t.relation = cols[2];
      t.object = cols[3];
      t.language = cols[4];
      triples.push_back(std::move(t));
    } else if (cols[0] == "text") {
      const bool inverse = cols[2] == kInverseMarker;
      if (!inverse && cols[2] != kForwardMarker) throw ParseError(path, n, "bad direction marker '" + cols[2] + "'");
      long long idx = 0;
      if (!parse_long(cols[6], idx)) throw ParseError(path, n, "bad sentence index");
      triples.push_back(make_text_triple(cols[1], split_ws(cols[7]), cols[3], inverse, cols[4], {cols[5], idx}));
    } else {
      throw ParseError(path, n, "unknown triple kind '" + cols[0] + "'");
    }
  });
  if (!header) throw ParseError(path, 1, "missing triple-store header");
  return TripleStore::build(std::move(triples));
}

/// language TAB token TAB count TAB canonical_id
inline void write_vocabulary(const Vocabulary& v, const std::string& path) {
  auto out = open_output(path);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto& e = v.entry(i);
    out << e.language << '\t' << e.token << '\t' << e.count << '\t' << v.canonical(i) << '\n';
  }
}

}  // namespace uschema
