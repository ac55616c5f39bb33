#pragma once

// Scoring predictions against gold slot fillers, PR curves, per-length
// breakdowns and nearest-neighbor inspection of embeddings.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "uschema/encoders.hpp"
#include "uschema/model.hpp"
#include "uschema/predictor.hpp"
#include "uschema/text.hpp"

namespace uschema {

struct GoldKey {
  std::string query;
  std::string relation;
  std::vector<std::string> fillers;  // equivalence class
  std::set<std::string> documents;   // empty: any document is accepted

  bool accepts(const std::string& filler) const {
    return std::find(fillers.begin(), fillers.end(), filler) != fillers.end();
  }
};

struct GoldSet {
  std::vector<GoldKey> keys;

  std::size_t size() const { return keys.size(); }
  std::size_t count(const std::string& relation) const {
    return std::size_t(std::count_if(keys.begin(), keys.end(), [&](const GoldKey& k) { return k.relation == relation; }));
  }
};

/// query TAB relation TAB filler|filler... [TAB doc,doc...]
/// Equivalence classes of one (query, relation) must be disjoint.
inline GoldSet read_gold(const std::string& path) {
  GoldSet gold;
  std::set<std::tuple<std::string, std::string, std::string>> seen;  // every class member
  for_each_line(path, [&](std::string_view line, std::size_t n) {
    auto cols = split(line, '\t');
    if (cols.size() < 3 || cols.size() > 4) throw ParseError(path, n, "expected 3 or 4 tab-separated columns");
    GoldKey k{cols[0], cols[1], {}, {}};
    for (auto& f : split(cols[2], '|'))
      if (!f.empty()) k.fillers.push_back(f);
    if (k.fillers.empty()) throw ParseError(path, n, "empty filler equivalence class");
    if (cols.size() == 4)
      for (auto& d : split(cols[3], ','))
        if (!d.empty()) k.documents.insert(d);
    for (const auto& f : k.fillers)
      if (!seen.insert({k.query, k.relation, f}).second)
        throw ParseError(path, n, "filler '" + f + "' already belongs to another key of this query and relation");
    gold.keys.push_back(std::move(k));
  });
  return gold;
}

inline void write_gold(const GoldSet& gold, std::ostream& out) {
  for (const auto& k : gold.keys) {
    out << k.query << '\t' << k.relation << '\t' << join(k.fillers, "|");
    if (!k.documents.empty()) out << '\t' << join(k.documents, ",");
    out << '\n';
  }
}

enum class MatchMode { anydoc, strict };

inline MatchMode parse_match_mode(std::string_view s) {
  if (s == "anydoc") return MatchMode::anydoc;
  if (s == "strict") return MatchMode::strict;
  throw std::invalid_argument("unknown match mode '" + std::string(s) + "'");
}

struct Counts {
  std::size_t tp = 0, fp = 0, fn = 0;
};

/// Precision, recall and F1 as exact fractions of the counts, in percent.
inline double precision_pct(const Counts& c) { return c.tp + c.fp == 0 ? 0.0 : 100.0 * double(c.tp) / double(c.tp + c.fp); }
inline double recall_pct(const Counts& c) { return c.tp + c.fn == 0 ? 0.0 : 100.0 * double(c.tp) / double(c.tp + c.fn); }
inline double f1_pct(const Counts& c) {
  const auto den = 2 * c.tp + c.fp + c.fn;
  return den == 0 ? 0.0 : 100.0 * double(2 * c.tp) / double(den);
}

/// Harmonic mean of precision and recall; 0 when both are 0.
inline double f1_from_pr(double precision, double recall) {
  return precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
}

inline double round1(double pct) { return std::round(pct * 10.0) / 10.0; }

struct MetricRow {
  std::string relation;
  Counts counts;
  double precision = 0, recall = 0, f1 = 0;
};

struct MetricReport {
  Counts counts;
  double precision = 0, recall = 0, f1 = 0;
  bool empty_predictions = false;
  std::vector<MetricRow> per_relation;
};

namespace detail {

inline bool match_less(const Prediction& a, const Prediction& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.query != b.query) return a.query < b.query;
  if (a.relation != b.relation) return a.relation < b.relation;
  if (a.filler != b.filler) return a.filler < b.filler;
  return a.provenance < b.provenance;
}

/// Greedy one-to-one matching: feed predictions in match order; each call
/// returns the gold index credited or npos.
class Matcher {
 public:
  static constexpr std::size_t npos = std::size_t(-1);

  Matcher(const GoldSet& gold, MatchMode mode) : gold_(gold), mode_(mode), used_(gold.size(), false) {
    for (std::size_t i = 0; i < gold.keys.size(); ++i)
      index_[{gold.keys[i].query, gold.keys[i].relation}].push_back(i);
  }

  std::size_t match(const Prediction& p) {
    const auto it = index_.find({p.query, p.relation});
    if (it == index_.end()) return npos;
    for (const auto g : it->second) {
      const auto& key = gold_.keys[g];
      if (used_[g] || !key.accepts(p.filler)) continue;
      if (mode_ == MatchMode::strict && !key.documents.empty() && !key.documents.contains(p.provenance.doc_id)) continue;
      used_[g] = true;
      return g;
    }
    return npos;
  }

 private:
  const GoldSet& gold_;
  MatchMode mode_;
  std::vector<bool> used_;
  std::map<std::pair<std::string, std::string>, std::vector<std::size_t>> index_;
};

inline std::vector<const Prediction*> match_order(const std::vector<Prediction>& preds) {
  std::vector<const Prediction*> order;
  for (const auto& p : preds) order.push_back(&p);
  std::sort(order.begin(), order.end(), [](const Prediction* a, const Prediction* b) { return match_less(*a, *b); });
  return order;
}

inline void fill_rates(const Counts& c, double& p, double& r, double& f) {
  p = precision_pct(c);
  r = recall_pct(c);
  f = f1_pct(c);
}

}  // namespace detail

/// Each gold key is credited to at most one prediction; the rest are false
/// positives. `recall_denominator` replaces |gold| as TP + FN when set.
inline MetricReport score_predictions(const std::vector<Prediction>& preds, const GoldSet& gold, MatchMode mode,
                                      std::optional<std::size_t> recall_denominator = std::nullopt) {
  detail::Matcher matcher(gold, mode);
  MetricReport report;
  std::map<std::string, Counts> rows;
  std::vector<bool> hit(gold.size(), false);
  for (const auto* p : detail::match_order(preds)) {
    const auto g = matcher.match(*p);
    if (g == detail::Matcher::npos) {
      ++report.counts.fp;
      ++rows[p->relation].fp;
    } else {
      hit[g] = true;
      ++report.counts.tp;
      ++rows[p->relation].tp;
    }
  }
  for (std::size_t g = 0; g < gold.size(); ++g)
    if (!hit[g]) ++rows[gold.keys[g].relation].fn;
  const std::size_t denominator = recall_denominator.value_or(gold.size());
  if (denominator < report.counts.tp) throw std::invalid_argument("recall denominator smaller than true positives");
  report.counts.fn = denominator - report.counts.tp;
  report.empty_predictions = preds.empty();
  detail::fill_rates(report.counts, report.precision, report.recall, report.f1);
  for (auto& [rel, c] : rows) {
    MetricRow row{rel, c};
    detail::fill_rates(c, row.precision, row.recall, row.f1);
    report.per_relation.push_back(row);
  }
  return report;
}

inline void write_report(const MetricReport& r, std::ostream& out) {
  auto line = [&](const std::string& label, const Counts& c, double p, double rec, double f) {
    out << label << '\t' << format_fixed(p, 1) << '\t' << format_fixed(rec, 1) << '\t' << format_fixed(f, 1) << '\t'
        << c.tp << '\t' << c.fp << '\t' << c.fn << '\n';
  };
  out << "relation\tP\tR\tF1\tTP\tFP\tFN\n";
  for (const auto& row : r.per_relation) line(row.relation, row.counts, row.precision, row.recall, row.f1);
  line("ALL", r.counts, r.precision, r.recall, r.f1);
  if (r.empty_predictions) out << "# no predictions; precision defined as 0\n";
}

struct CurvePoint {
  double threshold = 0;
  double precision = 0;
  double recall = 0;
};

/// One point per distinct score, descending; each point equals
/// score_predictions on the predictions scoring at least that threshold.
inline std::vector<CurvePoint> pr_curve(const std::vector<Prediction>& preds, const GoldSet& gold, MatchMode mode,
                                        std::optional<std::size_t> recall_denominator = std::nullopt) {
  detail::Matcher matcher(gold, mode);
  const auto order = detail::match_order(preds);
  const std::size_t denominator = recall_denominator.value_or(gold.size());
  std::vector<CurvePoint> curve;
  Counts c;
  for (std::size_t i = 0; i < order.size();) {
    const double s = order[i]->score;
    for (; i < order.size() && order[i]->score == s; ++i) (matcher.match(*order[i]) == detail::Matcher::npos ? c.fp : c.tp) += 1;
    if (denominator < c.tp) throw std::invalid_argument("recall denominator smaller than true positives");
    c.fn = denominator - c.tp;
    curve.push_back({s, precision_pct(c), recall_pct(c)});
  }
  return curve;
}

inline void write_curve(const std::vector<CurvePoint>& curve, std::ostream& out) {
  out << "threshold\tprecision\trecall\n";
  for (const auto& p : curve)
    out << format_fixed(p.threshold, 6) << '\t' << format_fixed(p.precision, 1) << '\t' << format_fixed(p.recall, 1) << '\n';
}

// ---------------------------------------------------------------------------
// Pattern-length breakdown

struct LengthBin {
  int lo = 1, hi = 5;  // inclusive
  bool contains(int n) const { return n >= lo && n <= hi; }
  std::string label() const { return std::to_string(lo) + "-" + std::to_string(hi); }
};

inline std::vector<LengthBin> default_length_bins() { return {{1, 5}, {6, 10}, {11, 20}}; }

struct NamedPredictions {
  std::string name;
  std::vector<Prediction> predictions;
};

struct LengthRow {
  LengthBin bin;
  std::vector<MetricReport> reports;  // one per model, input order
};

/// Predictions go to the bin of their pattern length (those outside every
/// bin are dropped). A gold key belongs to the bin of the best-scoring
/// prediction, over all models, that matches it; gold keys no model
/// predicts count as false negatives in every bin.
inline std::vector<LengthRow> f1_by_pattern_length(const std::vector<NamedPredictions>& models, const GoldSet& gold,
                                                   MatchMode mode,
                                                   const std::vector<LengthBin>& bins = default_length_bins()) {
  std::vector<std::optional<std::pair<double, int>>> best(gold.size());
  for (const auto& m : models) {
    detail::Matcher matcher(gold, mode);
    for (const auto* p : detail::match_order(m.predictions)) {
      const auto g = matcher.match(*p);
      if (g == detail::Matcher::npos) continue;
      if (!best[g] || p->score > best[g]->first) best[g] = std::pair{p->score, p->pattern_length};
    }
  }
  std::vector<LengthRow> rows;
  for (const auto& bin : bins) {
    GoldSet sub;
    for (std::size_t g = 0; g < gold.size(); ++g)
      if (!best[g] || bin.contains(best[g]->second)) sub.keys.push_back(gold.keys[g]);
    LengthRow row{bin, {}};
    for (const auto& m : models) {
      std::vector<Prediction> in_bin;
      for (const auto& p : m.predictions)
        if (bin.contains(p.pattern_length)) in_bin.push_back(p);
      row.reports.push_back(score_predictions(in_bin, sub, mode));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline void write_length_table(const std::vector<LengthRow>& rows, const std::vector<NamedPredictions>& models,
                               std::ostream& out) {
  out << "bin";
  for (const auto& m : models) out << '\t' << m.name << "_F1\t" << m.name << "_count";
  out << '\n';
  for (const auto& row : rows) {
    out << row.bin.label();
    for (const auto& r : row.reports) out << '\t' << format_fixed(r.f1, 1) << '\t' << r.counts.tp + r.counts.fp;
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Nearest neighbors

struct Neighbor {
  std::string item;
  double cosine = 0;
};

/// Top-k candidates by cosine to `query`, ties broken by name. Candidates
/// with zero vectors are skipped.
template <class T>
std::vector<Neighbor> nearest_neighbors(std::span<const T> query,
                                        const std::vector<std::pair<std::string, std::vector<T>>>& candidates,
                                        std::size_t k) {
  std::vector<Neighbor> out;
  for (const auto& [name, vec] : candidates)
    if (auto c = cosine<T>(query, vec)) out.push_back({name, double(*c)});
  std::sort(out.begin(), out.end(), [](const Neighbor& a, const Neighbor& b) {
    return a.cosine != b.cosine ? a.cosine > b.cosine : a.item < b.item;
  });
  if (out.size() > k) out.resize(k);
  return out;
}

/// Words nearest to (language, word) in the word embedding table, labelled
/// "language:token". `language_filter` restricts candidates; reserved
/// tokens are never candidates. Requires an encoder model.
template <class T>
std::vector<Neighbor> nearest_words(const Model<T>& model, const std::string& word, const std::string& language,
                                    std::size_t k, const std::string& language_filter = "") {
  if (!model.compositional()) throw std::invalid_argument("word neighbors need an encoder model");
  const auto id = model.vocab.find(word, language);
  if (!id || model.vocab.entry(*id).token == kUnkToken)
    throw std::invalid_argument("out-of-vocabulary word '" + word + "' (" + language + ")");
  const auto& emb = model.params.blocks()[model.layout.word_emb].value;
  std::vector<std::pair<std::string, std::vector<T>>> candidates;
  for (std::size_t i = 0; i < model.vocab.size(); ++i) {
    const auto& e = model.vocab.entry(i);
    if (i == *id || e.language.empty() || e.token == kUnkToken) continue;
    if (!language_filter.empty() && e.language != language_filter) continue;
    const auto row = emb.row(model.vocab.canonical(i));
    candidates.emplace_back(e.language + ":" + e.token, std::vector<T>(row.begin(), row.end()));
  }
  return nearest_neighbors<T>(emb.row(model.vocab.canonical(*id)), candidates, k);
}

/// Patterns nearest to a query pattern among `candidates` (typically the
/// test or training patterns of one language), labelled by their relation
/// key. Candidates identical to the query are excluded; unseen candidates
/// are skipped. Throws when the query itself cannot be represented.
template <class T>
std::vector<Neighbor> nearest_patterns(const Model<T>& model, const Triple& query, const std::vector<Triple>& candidates,
                                       std::size_t k) {
  const auto q = model.represent(query);
  if (!q.scored()) throw std::invalid_argument("query pattern '" + text_relation_key(query.pattern, query.inverse) + "' is not representable");
  const auto qkey = query.language + ":" + text_relation_key(query.pattern, query.inverse);
  std::set<std::string> seen{qkey};
  std::vector<std::pair<std::string, std::vector<T>>> items;
  for (const auto& c : candidates) {
    if (c.kind != TripleKind::text) continue;
    auto key = c.language + ":" + text_relation_key(c.pattern, c.inverse);
    if (!seen.insert(key).second) continue;
    auto r = model.represent(c);
    if (r.scored()) items.emplace_back(std::move(key), std::move(r.vector));
  }
  return nearest_neighbors<T>(q.view(), items, k);
}

/// Schema relations ranked by cosine to a pattern.
template <class T>
std::vector<Neighbor> rank_relations(const Model<T>& model, const RelationRepr<T>& repr) {
  std::vector<std::pair<std::string, std::vector<T>>> items;
  for (const auto& rel : model.schema_relations()) {
    const auto row = model.relation_embeddings().row(model.relation_ids.at(rel));
    items.emplace_back(rel, std::vector<T>(row.begin(), row.end()));
  }
  if (!repr.scored()) return {};
  return nearest_neighbors<T>(repr.view(), items, items.size());
}

// ---------------------------------------------------------------------------
// Threshold tuning against gold

/// Marks each scored prediction correct when greedy matching credits it
/// with a gold key.
inline std::vector<Candidate> label_candidates(const std::vector<Prediction>& scored, const GoldSet& gold,
                                               MatchMode mode = MatchMode::anydoc) {
  detail::Matcher matcher(gold, mode);
  std::vector<Candidate> out;
  for (const auto* p : detail::match_order(scored))
    out.push_back({p->relation, p->score, matcher.match(*p) != detail::Matcher::npos});
  return out;
}

/// Scores the dev triples, labels them against gold and tunes one threshold
/// per schema relation of the model.
template <class T>
ThresholdTable tune_on_dev(const Model<T>& model, const std::vector<Triple>& dev, const GoldSet& gold,
                           const TypeConstraints& types = {}, MatchMode mode = MatchMode::anydoc) {
  const auto scored = score_candidates(dev, model, types, to_string(model.config.kind));
  std::map<std::string, std::size_t> gold_counts;
  for (const auto& k : gold.keys) ++gold_counts[k.relation];
  return tune_thresholds(label_candidates(scored, gold, mode), gold_counts, model.schema_relations());
}

// ---------------------------------------------------------------------------
// Relation ranking

/// 1 / rank of `gold` among the model's schema relations ordered by cosine
/// to `repr` (ties broken by name); 0 when the pattern cannot be scored.
template <class T>
double reciprocal_rank(const Model<T>& model, const RelationRepr<T>& repr, const std::string& gold) {
  const auto ranked = rank_relations(model, repr);
  for (std::size_t i = 0; i < ranked.size(); ++i)
    if (ranked[i].item == gold) return 1.0 / double(i + 1);
  return 0.0;
}

/// Expected reciprocal rank of a uniformly random ordering of n relations.
inline double random_mrr(std::size_t n) {
  double h = 0;
  for (std::size_t k = 1; k <= n; ++k) h += 1.0 / double(k);
  return n ? h / double(n) : 0.0;
}

}  // namespace uschema
