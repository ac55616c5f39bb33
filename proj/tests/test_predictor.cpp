#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "uschema/predictor.hpp"

using namespace uschema;

namespace {

Prediction pred(std::string q, std::string r, std::string f, double s, std::string doc = "d", long long sent = 0) {
  return {std::move(q), std::move(r), std::move(f), s, {std::move(doc), sent}, "m", -1};
}

// A 2-d lookup model: one KB relation along x, one text pattern stored at
// the given vector.
Model<double> toy_model(std::vector<double> pattern_vec) {
  Model<double> m;
  m.config.dim = 2;
  m.allocate({pair_key("q", "f")}, {"per:spouse", Model<double>::shortened_key({"wed"}, false)}, {true, false});
  auto& rel = m.relation_embeddings();
  rel(0, 0) = 1.0;
  rel(0, 1) = 0.0;
  rel(1, 0) = pattern_vec[0];
  rel(1, 1) = pattern_vec[1];
  return m;
}

Triple test_triple(std::string s, std::vector<std::string> pattern, std::string o, std::string doc = "t1") {
  return make_text_triple(std::move(s), std::move(pattern), std::move(o), false, "en", {std::move(doc), 0});
}

// Exhaustive oracle: every observed score and the sentinel, F1 compared as
// exact fractions, ties to the higher threshold.
ThresholdTable sweep_oracle(const std::vector<Candidate>& cs, const std::map<std::string, std::size_t>& gold) {
  std::map<std::string, std::vector<Candidate>> by;
  for (const auto& c : cs) by[c.relation].push_back(c);
  ThresholdTable out;
  for (const auto& [rel, list] : by) {
    std::set<double> thresholds{kEmitNothing};
    long long correct = 0;
    for (const auto& c : list) thresholds.insert(c.score), correct += c.correct;
    const long long g = std::max<long long>(gold.count(rel) ? gold.at(rel) : 0, correct);
    double best_t = kEmitNothing;
    long long bn = 0, bd = 1;
    for (auto it = thresholds.rbegin(); it != thresholds.rend(); ++it) {
      long long tp = 0, fp = 0;
      for (const auto& c : list)
        if (c.score >= *it) (c.correct ? tp : fp)++;
      const long long num = 2 * tp, den = 2 * tp + fp + (g - tp);
      if (den > 0 && num * bd > bn * den) bn = num, bd = den, best_t = *it;
    }
    out[rel] = best_t;
  }
  return out;
}

}  // namespace

TEST(ScorePattern, CosineAgainstRelation) {
  const auto m = toy_model({1.0, 1.0});
  const auto repr = m.lookup_relation(Model<double>::shortened_key({"wed"}, false));
  EXPECT_NEAR(*score_pattern(repr, "per:spouse", m), 1 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(*score_pattern(m.lookup_relation("per:spouse"), "per:spouse", m), 1.0, 1e-15);
  EXPECT_FALSE(score_pattern(m.lookup_relation("<fwd> never seen"), "per:spouse", m).has_value());
  EXPECT_FALSE(score_pattern(repr, "per:unknown", m).has_value());
}

TEST(Predict, ThresholdBoundary) {
  // cos = 0.8 for the pattern vector (0.8, 0.6).
  const auto m = toy_model({0.8, 0.6});
  const std::vector<Triple> test{test_triple("q", {"wed"}, "f")};
  const auto hit = predict(test, m, {{"per:spouse", 0.7}});
  ASSERT_EQ(hit.size(), 1u);
  EXPECT_NEAR(hit[0].score, 0.8, 1e-12);
  EXPECT_EQ(hit[0].source, "uschema");
  EXPECT_EQ(hit[0].provenance.doc_id, "t1");
  EXPECT_TRUE(predict(test, m, {{"per:spouse", 0.9}}).empty());
  EXPECT_TRUE(predict(test, m, {}).empty());
  EXPECT_TRUE(predict(test, m, {{"per:spouse", kEmitNothing}}).empty());
}

TEST(Predict, UnseenPatternsAndTypeConstraints) {
  const auto m = toy_model({0.8, 0.6});
  EXPECT_TRUE(predict({test_triple("q", {"married"}, "f")}, m, {{"per:spouse", 0.0}}).empty());
  TypeConstraints types;
  types.signatures["per:spouse"] = {"PER", "PER"};
  types.entity_types["q"] = "PER";
  types.entity_types["f"] = "ORG";
  EXPECT_TRUE(predict({test_triple("q", {"wed"}, "f")}, m, {{"per:spouse", 0.0}}, types).empty());
  types.signatures["per:spouse"] = {"PER", "*"};
  EXPECT_EQ(predict({test_triple("q", {"wed"}, "f")}, m, {{"per:spouse", 0.0}}, types).size(), 1u);
}

TEST(Predict, BestProvenancePerKey) {
  const auto m = toy_model({0.8, 0.6});
  const std::vector<Triple> test{test_triple("q", {"wed"}, "f", "t9"), test_triple("q", {"wed"}, "f", "t2")};
  const auto out = predict(test, m, {{"per:spouse", 0.0}});
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].provenance.doc_id, "t2");
}

TEST(TuneThresholds, Examples) {
  auto t = tune_thresholds({{"r", 0.9, true}, {"r", 0.5, false}}, {{"r", 1}});
  EXPECT_EQ(t.at("r"), 0.9);
  t = tune_thresholds({{"r", 0.9, true}, {"r", 0.4, true}, {"r", 0.6, true}}, {{"r", 3}});
  EXPECT_EQ(t.at("r"), 0.4);
  t = tune_thresholds({}, {{"r", 2}}, {"r"});
  EXPECT_EQ(t.at("r"), kEmitNothing);
  t = tune_thresholds({{"r", 0.3, false}}, {{"r", 1}});
  EXPECT_EQ(t.at("r"), kEmitNothing);
}

TEST(TuneThresholds, TiesGoToHigherThreshold) {
  // Threshold 0.8: 1 TP, 0 FP, 1 FN -> 2/3. Threshold 0.6: 2 TP, 2 FP -> 4/6.
  const auto t = tune_thresholds({{"r", 0.8, true}, {"r", 0.6, true}, {"r", 0.6, false}, {"r", 0.6, false}},
                                 {{"r", 2}});
  EXPECT_EQ(t.at("r"), 0.8);
}

TEST(TuneThresholds, MatchesExhaustiveSweep) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<Candidate> cs;
    const std::size_t n = rng() % 51;
    std::map<std::string, std::size_t> gold;
    for (std::size_t i = 0; i < n; ++i)
      cs.push_back({"r" + std::to_string(rng() % 3), double(rng() % 12) / 10.0, rng() % 2 == 0});
    for (int r = 0; r < 3; ++r) gold["r" + std::to_string(r)] = rng() % 8;
    EXPECT_EQ(tune_thresholds(cs, gold), sweep_oracle(cs, gold)) << "trial " << trial;
  }
}

TEST(Ensemble, UnionSemantics) {
  const std::vector<Prediction> a{pred("q1", "r", "x", 0.5), pred("q1", "r", "y", 0.4), pred("q2", "r", "x", 0.9)};
  const std::vector<Prediction> b{pred("q3", "r", "x", 0.2), pred("q3", "s", "x", 0.1)};
  EXPECT_EQ(ensemble_union({a, b}).size(), 5u);
  EXPECT_EQ(ensemble_union({a, a}).size(), 3u);

  auto c = a;
  c[0].score = 0.7;
  c[0].source = "lstm";
  const auto u = ensemble_union({a, c});
  ASSERT_EQ(u.size(), 3u);
  const auto it = std::find_if(u.begin(), u.end(), [](const Prediction& p) { return p.filler == "x" && p.query == "q1"; });
  EXPECT_EQ(it->score, 0.7);
  EXPECT_EQ(it->source, "lstm+m");
}

TEST(AlternateNames, DocumentCooccurrence) {
  std::vector<Sentence> sents;
  auto add = [&](std::string doc, long long idx, std::string text, std::vector<Mention> ms = {}) {
    Sentence s;
    s.doc_id = std::move(doc);
    s.index = idx;
    s.tokens = split_ws(text);
    s.mentions = std::move(ms);
    sents.push_back(std::move(s));
  };
  add("d1", 0, "Barack Obama spoke", {{"obama", 0, 2, "Barack Obama"}});
  add("d1", 1, "Obama left");
  add("d2", 0, "The President said");
  add("d3", 3, "Barack Obama , the President");
  add("d4", 0, "Barry was here");
  const auto index = DocumentIndex::build(sents);
  AliasTable aliases;
  aliases["obama"] = {{"Obama", 0.9}, {"the President", 0.8}, {"Barry", 0.7}, {"Mr. O", 0.1}};

  const auto out = alternate_names("obama", aliases, index);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].filler, "Obama");
  EXPECT_EQ(out[0].provenance, (Provenance{"d1", 0}));
  EXPECT_EQ(out[1].filler, "the President");
  EXPECT_EQ(out[1].provenance, (Provenance{"d3", 3}));
  EXPECT_EQ(out[0].relation, "per:alternate_names");
  EXPECT_EQ(out[0].source, "alias");
  EXPECT_TRUE(alternate_names("nobody", aliases, index).empty());
  EXPECT_EQ(alternate_names("obama", aliases, index, 0.05).size(), 2u);
}

TEST(Files, PredictionsAndThresholdsRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path();
  const auto pp = (dir / "uschema_preds.tsv").string();
  std::vector<Prediction> ps{pred("q", "r", "f", 0.1234567, "d", 3)};
  write_predictions(ps, pp);
  const auto back = read_predictions(pp);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].score, 0.123457);
  EXPECT_EQ(back[0].provenance, (Provenance{"d", 3}));

  const auto tp = (dir / "uschema_thr.tsv").string();
  const ThresholdTable t{{"a", 0.1 + 0.2}, {"b", kEmitNothing}};
  write_thresholds(t, tp);
  EXPECT_EQ(read_thresholds(tp), t);

  std::ofstream(pp) << "q\tr\tf\tnot-a-number\td\t0\tm\n";
  EXPECT_THROW(read_predictions(pp), ParseError);
}
