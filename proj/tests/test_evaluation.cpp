#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "uschema/evaluation.hpp"

using namespace uschema;

namespace {

Prediction pred(std::string q, std::string r, std::string f, double s, std::string doc = "d", int len = -1) {
  return {std::move(q), std::move(r), std::move(f), s, {std::move(doc), 0}, "m", len};
}

GoldKey key(std::string q, std::string r, std::vector<std::string> fillers, std::set<std::string> docs = {}) {
  return {std::move(q), std::move(r), std::move(fillers), std::move(docs)};
}

// Disjoint classes mean a prediction can satisfy at most one key, so TP is
// the number of keys satisfied by some prediction.
Counts hand_count(const std::vector<Prediction>& preds, const GoldSet& gold, MatchMode mode) {
  Counts c;
  for (const auto& k : gold.keys) {
    const bool hit = std::any_of(preds.begin(), preds.end(), [&](const Prediction& p) {
      return p.query == k.query && p.relation == k.relation && k.accepts(p.filler) &&
             (mode == MatchMode::anydoc || k.documents.empty() || k.documents.count(p.provenance.doc_id));
    });
    c.tp += hit;
  }
  c.fp = preds.size() - c.tp;
  c.fn = gold.size() - c.tp;
  return c;
}

struct Fixture {
  std::vector<Prediction> preds;
  GoldSet gold;
};

Fixture random_fixture(std::mt19937_64& rng) {
  Fixture f;
  const std::vector<std::string> qs{"q1", "q2", "q3"}, rs{"r1", "r2"}, docs{"d1", "d2", "d3"};
  std::size_t next_filler = 0;
  for (const auto& q : qs)
    for (const auto& r : rs) {
      const std::size_t nkeys = rng() % 3;
      for (std::size_t k = 0; k < nkeys; ++k) {
        GoldKey g{q, r, {}, {}};
        const std::size_t cls = 1 + rng() % 2;
        for (std::size_t i = 0; i < cls; ++i) g.fillers.push_back("f" + std::to_string(next_filler++));
        if (rng() % 2) g.documents.insert(docs[rng() % 3]);
        f.gold.keys.push_back(g);
      }
    }
  const std::size_t npreds = rng() % 15;
  for (std::size_t i = 0; i < npreds; ++i)
    f.preds.push_back(pred(qs[rng() % 3], rs[rng() % 2], "f" + std::to_string(rng() % (next_filler + 2)),
                           double(rng() % 5) / 4.0, docs[rng() % 3]));
  return f;
}

}  // namespace

TEST(Metrics, HandCountedExample) {
  const Counts c{1, 1, 3};
  EXPECT_DOUBLE_EQ(precision_pct(c), 50.0);
  EXPECT_DOUBLE_EQ(recall_pct(c), 25.0);
  EXPECT_DOUBLE_EQ(round1(f1_pct(c)), 33.3);
}

TEST(Metrics, PrecisionRecallPairGivesF1) {
  EXPECT_NEAR(f1_from_pr(39.6, 32.2), 35.5, 0.1);
  EXPECT_DOUBLE_EQ(round1(f1_from_pr(39.6, 32.2)), 35.5);
  EXPECT_EQ(f1_from_pr(0, 0), 0.0);
}

TEST(ScorePredictions, PerfectPredictions) {
  GoldSet gold{{key("q", "r", {"a"}), key("q", "r", {"b", "B"}), key("p", "s", {"c"})}};
  const auto r = score_predictions({pred("q", "r", "a", 0.5), pred("q", "r", "B", 0.4), pred("p", "s", "c", 0.3)},
                                   gold, MatchMode::anydoc);
  EXPECT_EQ(r.precision, 100.0);
  EXPECT_EQ(r.recall, 100.0);
  EXPECT_EQ(r.f1, 100.0);
}

TEST(ScorePredictions, OneToOneMatching) {
  GoldSet gold{{key("q", "r", {"a", "A"}), key("q", "r", {"b"}), key("q", "r", {"c"}), key("q", "r", {"d"})}};
  const auto r = score_predictions({pred("q", "r", "a", 0.9), pred("q", "r", "A", 0.8)}, gold, MatchMode::anydoc);
  EXPECT_EQ(r.counts.tp, 1u);
  EXPECT_EQ(r.counts.fp, 1u);
  EXPECT_EQ(r.counts.fn, 3u);
  EXPECT_EQ(r.precision, 50.0);
  EXPECT_EQ(r.recall, 25.0);
  EXPECT_EQ(round1(r.f1), 33.3);
}

TEST(ScorePredictions, StrictModeChecksDocuments) {
  GoldSet gold{{key("q", "r", {"a"}, {"d1"})}};
  const std::vector<Prediction> p{pred("q", "r", "a", 0.9, "d2")};
  EXPECT_EQ(score_predictions(p, gold, MatchMode::anydoc).counts.tp, 1u);
  EXPECT_EQ(score_predictions(p, gold, MatchMode::strict).counts.tp, 0u);
}

TEST(ScorePredictions, EmptyPredictionsAndRecallDenominator) {
  GoldSet gold{{key("q", "r", {"a"})}};
  const auto r = score_predictions({}, gold, MatchMode::anydoc);
  EXPECT_TRUE(r.empty_predictions);
  EXPECT_EQ(r.precision, 0.0);
  const auto d = score_predictions({pred("q", "r", "a", 1)}, gold, MatchMode::anydoc, 4);
  EXPECT_EQ(d.recall, 25.0);
  EXPECT_THROW(score_predictions({pred("q", "r", "a", 1)}, gold, MatchMode::anydoc, 0), std::invalid_argument);
}

TEST(ScorePredictions, MatchesHandCountOnRandomFixtures) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 500; ++trial) {
    const auto f = random_fixture(rng);
    for (auto mode : {MatchMode::anydoc, MatchMode::strict}) {
      const auto r = score_predictions(f.preds, f.gold, mode);
      const auto c = hand_count(f.preds, f.gold, mode);
      EXPECT_EQ(r.counts.tp, c.tp);
      EXPECT_EQ(r.counts.fp, c.fp);
      EXPECT_EQ(r.counts.fn, c.fn);
      std::size_t tp = 0, fp = 0, fn = 0;
      for (const auto& row : r.per_relation) tp += row.counts.tp, fp += row.counts.fp, fn += row.counts.fn;
      EXPECT_EQ(tp, c.tp);
      EXPECT_EQ(fp, c.fp);
      EXPECT_EQ(fn, c.fn);
    }
  }
}

TEST(ScorePredictions, StrictNeverExceedsAnydoc) {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 300; ++trial) {
    const auto f = random_fixture(rng);
    EXPECT_LE(score_predictions(f.preds, f.gold, MatchMode::strict).counts.tp,
              score_predictions(f.preds, f.gold, MatchMode::anydoc).counts.tp);
  }
}

TEST(WriteReport, Layout) {
  GoldSet gold{{key("q", "r", {"a"}), key("q", "s", {"b"})}};
  std::ostringstream out;
  write_report(score_predictions({pred("q", "r", "a", 1)}, gold, MatchMode::anydoc), out);
  EXPECT_EQ(out.str(),
            "relation\tP\tR\tF1\tTP\tFP\tFN\n"
            "r\t100.0\t100.0\t100.0\t1\t0\t0\n"
            "s\t0.0\t0.0\t0.0\t0\t0\t1\n"
            "ALL\t100.0\t50.0\t66.7\t1\t0\t1\n");
}

TEST(PrCurve, SingleCorrectPrediction) {
  GoldSet gold{{key("q", "r", {"a"}), key("q", "r", {"b"}), key("q", "r", {"c"}), key("q", "r", {"d"})}};
  const auto c = pr_curve({pred("q", "r", "a", 0.42)}, gold, MatchMode::anydoc);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].threshold, 0.42);
  EXPECT_EQ(c[0].precision, 100.0);
  EXPECT_EQ(c[0].recall, 25.0);
}

TEST(PrCurve, HandEnumeratedPoints) {
  GoldSet gold{{key("q1", "r", {"a"}), key("q1", "r", {"b"}), key("q2", "r", {"c"})}};
  const std::vector<Prediction> preds{pred("q1", "r", "a", 0.6), pred("q1", "r", "a", 0.9), pred("q1", "r", "x", 0.8),
                                      pred("q2", "r", "c", 0.7)};
  const auto c = pr_curve(preds, gold, MatchMode::anydoc);
  ASSERT_EQ(c.size(), 4u);
  const double third = 100.0 / 3, two_thirds = 200.0 / 3;
  const std::vector<std::array<double, 3>> expected{
      {0.9, 100.0, third}, {0.8, 50.0, third}, {0.7, two_thirds, two_thirds}, {0.6, 50.0, two_thirds}};
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(c[i].threshold, expected[i][0]);
    EXPECT_NEAR(c[i].precision, expected[i][1], 1e-12);
    EXPECT_NEAR(c[i].recall, expected[i][2], 1e-12);
  }
}

TEST(PrCurve, EachPointEqualsScoringThePrefix) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    const auto f = random_fixture(rng);
    for (const auto& pt : pr_curve(f.preds, f.gold, MatchMode::strict)) {
      std::vector<Prediction> prefix;
      for (const auto& p : f.preds)
        if (p.score >= pt.threshold) prefix.push_back(p);
      const auto r = score_predictions(prefix, f.gold, MatchMode::strict);
      EXPECT_EQ(pt.precision, r.precision);
      EXPECT_EQ(pt.recall, r.recall);
    }
  }
}

TEST(ByLength, SinglePopulatedBin) {
  GoldSet gold{{key("q", "r", {"a"}), key("q", "r", {"b"})}};
  const std::vector<NamedPredictions> models{{"m", {pred("q", "r", "a", 0.9, "d", 3), pred("q", "r", "z", 0.8, "d", 3)}}};
  const auto rows = f1_by_pattern_length(models, gold, MatchMode::anydoc);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].reports[0].counts.tp + rows[0].reports[0].counts.fp, 2u);
  EXPECT_TRUE(rows[1].reports[0].empty_predictions);
  EXPECT_TRUE(rows[2].reports[0].empty_predictions);
  // The unpredicted key is a false negative in every bin.
  EXPECT_EQ(rows[1].reports[0].counts.fn, 1u);
}

TEST(ByLength, EncoderBeatsLookupOnLongPatterns) {
  GoldSet gold{{key("q", "r", {"a"}), key("q", "r", {"b"})}};
  const std::vector<NamedPredictions> models{
      {"uschema", {pred("q", "r", "a", 0.9, "d", 2)}},
      {"lstm", {pred("q", "r", "a", 0.8, "d", 2), pred("q", "r", "b", 0.7, "d", 15)}}};
  const auto rows = f1_by_pattern_length(models, gold, MatchMode::anydoc);
  EXPECT_GT(rows[2].reports[1].f1, rows[2].reports[0].f1);
  EXPECT_EQ(rows[2].reports[0].counts.tp + rows[2].reports[0].counts.fp, 0u);
  std::ostringstream out;
  write_length_table(rows, models, out);
  EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "bin\tuschema_F1\tuschema_count\tlstm_F1\tlstm_count");
}

TEST(NearestNeighbors, ExactRankingAgainstBruteForce) {
  const std::vector<std::pair<std::string, std::vector<double>>> words{
      {"married", {1, 0.1}}, {"wed", {0.9, 0.2}}, {"born", {-1, 0}}, {"spouse", {0.5, 0.5}}, {"son", {0, 1}}};
  const std::vector<double> q{1, 0};
  const auto top3 = nearest_neighbors<double>(q, words, 3);
  std::vector<std::pair<double, std::string>> brute;
  for (const auto& [w, v] : words) brute.emplace_back(-(v[0] / std::hypot(v[0], v[1])), w);
  std::sort(brute.begin(), brute.end());
  ASSERT_EQ(top3.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(top3[i].item, brute[i].second);
  EXPECT_EQ(nearest_neighbors<double>(q, words, 50).size(), 5u);
}

TEST(Mrr, RandomBaseline) {
  EXPECT_EQ(random_mrr(1), 1.0);
  EXPECT_EQ(random_mrr(2), 0.75);
  // Average 1/rank of one item over all orderings of 5.
  std::vector<int> perm{0, 1, 2, 3, 4};
  double sum = 0;
  int count = 0;
  do {
    sum += 1.0 / double(std::find(perm.begin(), perm.end(), 0) - perm.begin() + 1);
    ++count;
  } while (std::next_permutation(perm.begin(), perm.end()));
  EXPECT_NEAR(random_mrr(5), sum / count, 1e-15);
}

TEST(Mrr, ReciprocalRankOnToyModel) {
  Model<double> m;
  m.config.dim = 2;
  m.allocate({pair_key("a", "b")}, {"r1", "r2", "r3", "<fwd> x"}, {true, true, true, false});
  auto& e = m.relation_embeddings();
  e(0, 0) = 1, e(1, 0) = 1, e(1, 1) = 1, e(2, 1) = 1, e(3, 0) = 1, e(3, 1) = 0.1;
  const auto repr = m.lookup_relation("<fwd> x");
  EXPECT_EQ(reciprocal_rank(m, repr, "r1"), 1.0);
  EXPECT_EQ(reciprocal_rank(m, repr, "r2"), 0.5);
  EXPECT_NEAR(reciprocal_rank(m, repr, "r3"), 1.0 / 3, 1e-15);
  EXPECT_EQ(reciprocal_rank(m, m.lookup_relation("<fwd> y"), "r1"), 0.0);
}

TEST(GoldFile, ReadWriteAndDisjointness) {
  const auto path = (std::filesystem::temp_directory_path() / "uschema_gold.tsv").string();
  std::ofstream(path) << "q\tper:alternate_names\tBarack Obama|Obama\td1,d2\nq\tper:spouse\tMichelle\n";
  const auto gold = read_gold(path);
  ASSERT_EQ(gold.size(), 2u);
  EXPECT_EQ(gold.keys[0].fillers.size(), 2u);
  EXPECT_EQ(gold.keys[0].documents, (std::set<std::string>{"d1", "d2"}));
  std::ostringstream out;
  write_gold(gold, out);
  EXPECT_EQ(out.str(), "q\tper:alternate_names\tBarack Obama|Obama\td1,d2\nq\tper:spouse\tMichelle\n");

  std::ofstream(path) << "q\tr\ta|b\nq\tr\tb\n";
  try {
    read_gold(path);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(parse_match_mode("loose"), std::invalid_argument);
}
