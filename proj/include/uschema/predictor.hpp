#pragma once

// Slot-filling prediction by pattern scoring: a test pattern is compared to
// every target relation by cosine and emitted when it clears that
// relation's threshold. Also threshold tuning, union ensembling and the
// alias-table alternate-names heuristic.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "uschema/corpus.hpp"
#include "uschema/model.hpp"
#include "uschema/numerics.hpp"
#include "uschema/text.hpp"

namespace uschema {

struct Prediction {
  std::string query;
  std::string relation;
  std::string filler;
  double score = 0;
  Provenance provenance;
  std::string source;
  int pattern_length = -1;  // token length of the provenance pattern; -1 unknown

  auto key() const { return std::tie(query, relation, filler); }
};

/// Sorted by query, relation, descending score, then filler and provenance.
inline void canonicalize(std::vector<Prediction>& preds) {
  std::sort(preds.begin(), preds.end(), [](const Prediction& a, const Prediction& b) {
    if (a.query != b.query) return a.query < b.query;
    if (a.relation != b.relation) return a.relation < b.relation;
    if (a.score != b.score) return a.score > b.score;
    if (a.filler != b.filler) return a.filler < b.filler;
    return a.provenance < b.provenance;
  });
}

using ThresholdTable = std::map<std::string, double>;

/// Threshold of a relation for which nothing should be emitted; cosine
/// scores never exceed 1.
inline constexpr double kEmitNothing = 1.000001;

/// Relation signatures as entity types; "*" matches any type. Relations
/// without a signature accept every pair.
struct TypeConstraints {
  std::map<std::string, std::pair<std::string, std::string>> signatures;
  std::map<std::string, std::string> entity_types;

  bool compatible(const std::string& relation, const std::string& subject, const std::string& object) const {
    const auto sig = signatures.find(relation);
    if (sig == signatures.end()) return true;
    auto matches = [&](const std::string& entity, const std::string& type) {
      if (type == "*") return true;
      const auto it = entity_types.find(entity);
      return it != entity_types.end() && it->second == type;
    };
    return matches(subject, sig->second.first) && matches(object, sig->second.second);
  }
};

/// Cosine between a pattern representation and a target relation's
/// embedding; empty for unseen patterns or unknown relations.
template <class T>
std::optional<double> score_pattern(const RelationRepr<T>& repr, const std::string& target, const Model<T>& model) {
  if (!repr.scored()) return std::nullopt;
  const auto it = model.relation_ids.find(target);
  if (it == model.relation_ids.end()) return std::nullopt;
  const auto c = cosine<T>(repr.view(), model.relation_embeddings().row(it->second));
  if (!c) return std::nullopt;
  return double(*c);
}

/// Scores every type-compatible (test triple, target relation) combination
/// and keeps the best-scoring provenance per (query, relation, filler).
/// Output is canonicalized.
template <class T>
std::vector<Prediction> score_candidates(const std::vector<Triple>& test, const Model<T>& model,
                                         const TypeConstraints& types, const std::string& source) {
  const auto targets = model.schema_relations();
  std::map<std::tuple<std::string, std::string, std::string>, Prediction> best;
  for (const auto& t : test) {
    if (t.kind != TripleKind::text || !t.provenance) continue;
    const auto repr = model.represent_pattern(t.pattern, t.inverse, t.language);
    if (!repr.scored()) continue;
    for (const auto& rel : targets) {
      if (!types.compatible(rel, t.subject, t.object)) continue;
      const auto s = score_pattern(repr, rel, model);
      if (!s) continue;
      Prediction p{t.subject, rel, t.object, *s, *t.provenance, source, int(t.pattern.size())};
      auto [it, inserted] = best.try_emplace({t.subject, rel, t.object}, p);
      if (!inserted && (p.score > it->second.score ||
                        (p.score == it->second.score && p.provenance < it->second.provenance)))
        it->second = std::move(p);
    }
  }
  std::vector<Prediction> out;
  for (auto& [_, p] : best) out.push_back(std::move(p));
  canonicalize(out);
  return out;
}

/// Keeps predictions whose score reaches their relation's threshold.
/// Relations missing from the table emit nothing.
inline std::vector<Prediction> apply_thresholds(const std::vector<Prediction>& candidates,
                                                const ThresholdTable& thresholds) {
  std::vector<Prediction> out;
  for (const auto& p : candidates) {
    const auto it = thresholds.find(p.relation);
    if (it != thresholds.end() && p.score >= it->second) out.push_back(p);
  }
  return out;
}

template <class T>
std::vector<Prediction> predict(const std::vector<Triple>& test, const Model<T>& model,
                                const ThresholdTable& thresholds, const TypeConstraints& types = {},
                                const std::string& source = "") {
  return apply_thresholds(score_candidates(test, model, types, source.empty() ? to_string(model.config.kind) : source),
                          thresholds);
}

// ---------------------------------------------------------------------------
// Threshold tuning

struct Candidate {
  std::string relation;
  double score = 0;
  bool correct = false;
};

/// Per relation, the threshold among the observed candidate scores (plus
/// kEmitNothing) maximizing F1 = 2TP / (2TP + FP + FN), where
/// FN = gold_count - TP. Ties go to the higher threshold. Relations listed
/// in `relations` without candidates get kEmitNothing.
inline ThresholdTable tune_thresholds(const std::vector<Candidate>& candidates,
                                      const std::map<std::string, std::size_t>& gold_counts,
                                      const std::vector<std::string>& relations = {}) {
  std::map<std::string, std::vector<const Candidate*>> by_rel;
  for (const auto& c : candidates) by_rel[c.relation].push_back(&c);
  ThresholdTable table;
  for (const auto& r : relations) table[r] = kEmitNothing;

  for (auto& [rel, cs] : by_rel) {
    std::sort(cs.begin(), cs.end(), [](const Candidate* a, const Candidate* b) { return a->score > b->score; });
    const auto g = gold_counts.find(rel);
    long long correct_total = 0;
    for (const auto* c : cs) correct_total += c->correct;
    const long long gold = g != gold_counts.end() ? std::max(static_cast<long long>(g->second), correct_total) : correct_total;

    // Best so far as the fraction num/den; starts at "emit nothing" (F1 0).
    long long best_num = 0, best_den = 1;
    double best_threshold = kEmitNothing;
    long long tp = 0, fp = 0;
    for (std::size_t i = 0; i < cs.size();) {
      const double s = cs[i]->score;
      for (; i < cs.size() && cs[i]->score == s; ++i) (cs[i]->correct ? tp : fp) += 1;
      const long long num = 2 * tp;
      const long long den = 2 * tp + fp + (gold - tp);
      // Strictly better only; equal F1 keeps the higher threshold seen first.
      if (den > 0 && num * best_den > best_num * den) {
        best_num = num;
        best_den = den;
        best_threshold = s;
      }
    }
    table[rel] = best_threshold;
  }
  return table;
}

// ---------------------------------------------------------------------------

/// Union keyed on (query, relation, filler). The highest score and its
/// provenance win (earlier lists win exact ties); source tags are merged.
inline std::vector<Prediction> ensemble_union(const std::vector<std::vector<Prediction>>& lists) {
  std::map<std::tuple<std::string, std::string, std::string>, std::pair<Prediction, std::set<std::string>>> merged;
  for (const auto& list : lists) {
    for (const auto& p : list) {
      auto [it, inserted] = merged.try_emplace({p.query, p.relation, p.filler}, p, std::set<std::string>{});
      auto& [best, tags] = it->second;
      if (!inserted && p.score > best.score) best = p;
      for (const auto& tag : split(p.source, '+'))
        if (!tag.empty()) tags.insert(tag);
    }
  }
  std::vector<Prediction> out;
  for (auto& [_, v] : merged) {
    v.first.source = join(v.second, "+");
    out.push_back(std::move(v.first));
  }
  canonicalize(out);
  return out;
}

// ---------------------------------------------------------------------------
// Alternate names

struct AliasEntry {
  std::string alias;
  double probability = 0;
};

using AliasTable = std::map<std::string, std::vector<AliasEntry>>;

/// Documents as digit-normalized token sentences plus each entity's
/// canonical name (first mention surface seen).
struct DocumentIndex {
  std::map<std::string, std::vector<std::pair<long long, std::vector<std::string>>>> documents;
  std::map<std::string, std::string> canonical_names;

  static DocumentIndex build(const std::vector<Sentence>& sentences) {
    DocumentIndex idx;
    for (const auto& s : sentences) {
      idx.documents[s.doc_id].emplace_back(s.index, s.tokens);
      for (const auto& m : s.mentions) idx.canonical_names.try_emplace(m.entity, m.surface);
    }
    for (auto& [_, sents] : idx.documents)
      std::stable_sort(sents.begin(), sents.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    return idx;
  }
};

namespace detail {

inline bool contains_sequence(const std::vector<std::string>& tokens, const std::vector<std::string>& needle) {
  if (needle.empty() || needle.size() > tokens.size()) return false;
  return std::search(tokens.begin(), tokens.end(), needle.begin(), needle.end()) != tokens.end();
}

inline std::vector<std::string> name_tokens(const std::string& name) {
  std::vector<std::string> out;
  for (auto& t : split_ws(name)) out.push_back(normalize_digits(t));
  return out;
}

}  // namespace detail

/// For each alias of `query` with probability >= floor, emits one
/// prediction if some document contains both the query's canonical name and
/// the alias; provenance is the first such document (by id) and the first
/// sentence in it containing the alias.
inline std::vector<Prediction> alternate_names(const std::string& query, const AliasTable& aliases,
                                               const DocumentIndex& index, double floor = 0.5,
                                               const std::string& relation = "per:alternate_names") {
  std::vector<Prediction> out;
  const auto entry = aliases.find(query);
  const auto name = index.canonical_names.find(query);
  if (entry == aliases.end() || name == index.canonical_names.end()) return out;
  const auto canonical = detail::name_tokens(name->second);
  for (const auto& a : entry->second) {
    if (a.probability < floor) continue;
    const auto alias = detail::name_tokens(a.alias);
    if (alias.empty() || alias == canonical) continue;
    for (const auto& [doc, sents] : index.documents) {
      bool has_name = false;
      std::optional<long long> alias_sentence;
      for (const auto& [si, toks] : sents) {
        has_name = has_name || detail::contains_sequence(toks, canonical);
        if (!alias_sentence && detail::contains_sequence(toks, alias)) alias_sentence = si;
      }
      if (has_name && alias_sentence) {
        out.push_back({query, relation, a.alias, a.probability, {doc, *alias_sentence}, "alias", -1});
        break;
      }
    }
  }
  canonicalize(out);
  return out;
}

// ---------------------------------------------------------------------------
// File formats

/// query TAB relation TAB filler TAB score(6dp) TAB doc_id TAB sentence_index TAB source
inline void write_predictions(const std::vector<Prediction>& preds, std::ostream& out) {
  for (const auto& p : preds)
    out << p.query << '\t' << p.relation << '\t' << p.filler << '\t' << format_fixed(p.score, 6) << '\t'
        << p.provenance.doc_id << '\t' << p.provenance.sentence_index << '\t' << p.source << '\n';
}

inline void write_predictions(const std::vector<Prediction>& preds, const std::string& path) {
  auto out = open_output(path);
  write_predictions(preds, out);
}

inline std::vector<Prediction> read_predictions(const std::string& path) {
  std::vector<Prediction> out;
  for_each_line(path, [&](std::string_view line, std::size_t n) {
    auto cols = split(line, '\t');
    if (cols.size() != 7) throw ParseError(path, n, "expected 7 tab-separated columns");
    Prediction p;
    p.query = cols[0];
    p.relation = cols[1];
    p.filler = cols[2];
    if (!parse_double(cols[3], p.score) || !std::isfinite(p.score)) throw ParseError(path, n, "bad score '" + cols[3] + "'");
    p.provenance.doc_id = cols[4];
    if (!parse_long(cols[5], p.provenance.sentence_index)) throw ParseError(path, n, "bad sentence index");
    p.source = cols[6];
    out.push_back(std::move(p));
  });
  return out;
}

/// relation TAB threshold (exact decimal round-trip)
inline void write_thresholds(const ThresholdTable& table, const std::string& path) {
  auto out = open_output(path);
  for (const auto& [rel, t] : table) out << rel << '\t' << format_exact(t) << '\n';
}

inline ThresholdTable read_thresholds(const std::string& path) {
  ThresholdTable table;
  for_each_line(path, [&](std::string_view line, std::size_t n) {
    auto cols = split(line, '\t');
    double t = 0;
    if (cols.size() != 2 || !parse_double(cols[1], t)) throw ParseError(path, n, "expected relation TAB threshold");
    table[cols[0]] = t;
  });
  return table;
}

/// entity TAB alias TAB probability
inline AliasTable read_alias_table(const std::string& path) {
  AliasTable table;
  for_each_line(path, [&](std::string_view line, std::size_t n) {
    auto cols = split(line, '\t');
    double p = 0;
    if (cols.size() != 3 || !parse_double(cols[2], p) || p < 0 || p > 1)
      throw ParseError(path, n, "expected entity TAB alias TAB probability in [0,1]");
    table[cols[0]].push_back({cols[1], p});
  });
  return table;
}

/// relation TAB subject_type TAB object_type
inline void read_signatures(const std::string& path, TypeConstraints& types) {
  for_each_line(path, [&](std::string_view line, std::size_t n) {
    auto cols = split(line, '\t');
    if (cols.size() != 3) throw ParseError(path, n, "expected relation TAB subject_type TAB object_type");
    types.signatures[cols[0]] = {cols[1], cols[2]};
  });
}

/// entity TAB type
inline void read_entity_types(const std::string& path, TypeConstraints& types) {
  for_each_line(path, [&](std::string_view line, std::size_t n) {
    auto cols = split(line, '\t');
    if (cols.size() != 2) throw ParseError(path, n, "expected entity TAB type");
    types.entity_types[cols[0]] = cols[1];
  });
}

}  // namespace uschema
