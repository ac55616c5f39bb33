#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "uschema/synth.hpp"

using namespace uschema;

namespace {

std::set<std::string> sentence_pairs(const std::vector<Sentence>& sents) {
  std::set<std::string> out;
  for (const auto& s : sents) out.insert(pair_key(s.mentions.front().entity, s.mentions.back().entity));
  return out;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Synthetic, OverlapControlsSharedPairs) {
  SynthConfig cfg;
  cfg.overlap = 0.5;
  cfg.b_pairs = 200;
  const auto c = generate_synthetic(cfg);
  const auto a = sentence_pairs(c.train_a), b = sentence_pairs(c.train_b);
  std::set<std::string> kb;
  for (const auto& t : c.kb) kb.insert(pair_key(t.subject, t.object));
  ASSERT_EQ(b.size(), 200u);
  std::size_t shared = 0, in_kb = 0;
  for (const auto& p : b) shared += a.count(p), in_kb += kb.count(p);
  EXPECT_EQ(shared, 100u);
  EXPECT_EQ(in_kb, 0u);
  EXPECT_EQ(c.shared_b_pairs, 100u);
}

TEST(Synthetic, ZeroOverlapDisconnectsLanguageB) {
  SynthConfig cfg;
  cfg.overlap = 0;
  cfg.tie_fraction = 0;
  const auto c = generate_synthetic(cfg);
  const auto a = sentence_pairs(c.train_a);
  for (const auto& p : sentence_pairs(c.train_b)) EXPECT_EQ(a.count(p), 0u);
  EXPECT_TRUE(c.dictionary.empty());
  EXPECT_EQ(c.warnings.size(), 1u);
}

TEST(Synthetic, SameSeedSameFiles) {
  const auto root = std::filesystem::temp_directory_path() / "uschema_synth";
  std::filesystem::create_directories(root / "x");
  std::filesystem::create_directories(root / "y");
  SynthConfig cfg;
  cfg.seed = 5;
  write_synthetic(generate_synthetic(cfg), (root / "x").string());
  write_synthetic(generate_synthetic(cfg), (root / "y").string());
  std::size_t files = 0;
  for (const auto& e : std::filesystem::directory_iterator(root / "x")) {
    EXPECT_EQ(slurp(e.path()), slurp(root / "y" / e.path().filename())) << e.path().filename();
    ++files;
  }
  EXPECT_EQ(files, 10u);
  cfg.seed = 6;
  write_synthetic(generate_synthetic(cfg), (root / "y").string());
  EXPECT_NE(slurp(root / "x" / "train.en"), slurp(root / "y" / "train.en"));
  std::filesystem::remove_all(root);
}

TEST(Synthetic, TokensSurviveDigitNormalization) {
  EXPECT_EQ(letter_code(0), "a");
  EXPECT_EQ(letter_code(25), "z");
  EXPECT_EQ(letter_code(26), "ba");
  SynthConfig cfg;
  cfg.relations = 30;
  const auto c = generate_synthetic(cfg);
  std::set<std::string> words;
  for (const auto& s : c.train_a)
    for (std::size_t t = 1; t + 1 < s.tokens.size(); ++t) {
      EXPECT_EQ(normalize_digits(s.tokens[t]), s.tokens[t]);
      words.insert(s.tokens[t]);
    }
  EXPECT_GT(words.size(), 30u * 2);
}

TEST(Synthetic, GoldMatchesHeldOutSentences) {
  const auto c = generate_synthetic(SynthConfig{});
  ASSERT_EQ(c.test_gold_b.size(), c.test_b.size());
  for (std::size_t i = 0; i < c.test_b.size(); ++i) {
    const auto& k = c.test_gold_b.keys[i];
    EXPECT_EQ(k.query, c.test_b[i].mentions.front().entity);
    EXPECT_EQ(k.fillers.front(), c.test_b[i].mentions.back().entity);
    EXPECT_EQ(k.documents.count(c.test_b[i].doc_id), 1u);
  }
}

TEST(LowRank, CellCounts) {
  LowRankConfig cfg;
  const auto cells = generate_low_rank(cfg);
  const std::size_t observed = 30 * 40;
  EXPECT_EQ(cells.train.size() + cells.held_out.size(), observed);
  EXPECT_EQ(cells.held_out.size(), 120u);
  EXPECT_EQ(cells.unobserved.size(), 200u * 30 - observed);
  std::set<std::pair<std::size_t, std::size_t>> all(cells.train.begin(), cells.train.end());
  all.insert(cells.held_out.begin(), cells.held_out.end());
  all.insert(cells.unobserved.begin(), cells.unobserved.end());
  EXPECT_EQ(all.size(), 200u * 30);
}

TEST(ExactAuc, CountsTiesAsHalf) {
  EXPECT_EQ(exact_auc({1, 2}, {0, 0.5}), 1.0);
  EXPECT_EQ(exact_auc({0}, {1}), 0.0);
  EXPECT_EQ(exact_auc({1}, {1}), 0.5);
  EXPECT_EQ(exact_auc({1, 3}, {1, 2}), (0.5 + 0 + 1 + 1) / 4);
  EXPECT_THROW(exact_auc({}, {1}), std::invalid_argument);
}
