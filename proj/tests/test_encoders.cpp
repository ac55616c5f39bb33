#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "uschema/model.hpp"

using namespace uschema;

namespace {

struct Fixture {
  ParameterSet<double> params;
  EncoderLayout layout;
  std::size_t dim;
};

Fixture make_encoder(ModelKind kind, std::size_t vocab, std::size_t dim, std::uint64_t seed) {
  Fixture f{{}, {}, dim};
  f.params.add("word_emb", vocab, dim);
  if (kind == ModelKind::cnn)
    add_cnn_params(f.params, dim);
  else
    add_lstm_params(f.params, dim);
  f.layout = resolve_layout(f.params);
  std::mt19937_64 rng(seed);
  for (auto& b : f.params.blocks()) fill_uniform(b.value.values(), 0.5, rng);
  return f;
}

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Straightforward reference implementations.
std::vector<double> cnn_reference(const Fixture& f, const std::vector<std::size_t>& rows, std::size_t pad) {
  const auto& emb = f.params.at("word_emb").value;
  const auto& w = f.params.at("cnn.filters").value;
  const auto& b = f.params.at("cnn.bias").value;
  const std::size_t d = f.dim, n = rows.size();
  std::vector<std::size_t> padded{pad};
  padded.insert(padded.end(), rows.begin(), rows.end());
  padded.push_back(pad);
  std::vector<double> out(d, -1e300);
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t j = 0; j < d; ++j) {
      double z = b(0, j);
      for (std::size_t k = 0; k < 3; ++k)
        for (std::size_t i = 0; i < d; ++i) z += w(j, k * d + i) * emb(padded[t + k], i);
      out[j] = std::max(out[j], std::tanh(z));
    }
  return out;
}

std::vector<std::vector<double>> lstm_pass(const Fixture& f, const std::vector<std::size_t>& rows, int dir) {
  const auto& emb = f.params.at("word_emb").value;
  const auto& wi = f.params.at(lstm_block_name(dir, 0)).value;
  const auto& wr = f.params.at(lstm_block_name(dir, 1)).value;
  const auto& b = f.params.at(lstm_block_name(dir, 2)).value;
  const std::size_t d = f.dim, n = rows.size();
  std::vector<double> h(d, 0), c(d, 0);
  std::vector<std::vector<double>> hs(n);
  for (std::size_t s = 0; s < n; ++s) {
    const std::size_t t = dir == 0 ? s : n - 1 - s;
    std::vector<double> a(4 * d);
    for (std::size_t r = 0; r < 4 * d; ++r) {
      a[r] = b(0, r);
      for (std::size_t i = 0; i < d; ++i) a[r] += wi(r, i) * emb(rows[t], i) + wr(r, i) * h[i];
    }
    std::vector<double> nh(d);
    for (std::size_t j = 0; j < d; ++j) {
      c[j] = sig(a[d + j]) * c[j] + sig(a[j]) * std::tanh(a[3 * d + j]);
      nh[j] = sig(a[2 * d + j]) * std::tanh(c[j]);
    }
    h = nh;
    hs[t] = h;
  }
  return hs;
}

std::vector<double> lstm_reference(const Fixture& f, const std::vector<std::size_t>& rows) {
  const auto fwd = lstm_pass(f, rows, 0), bwd = lstm_pass(f, rows, 1);
  std::vector<double> out(f.dim, -1e300);
  for (std::size_t t = 0; t < rows.size(); ++t)
    for (std::size_t j = 0; j < f.dim; ++j) out[j] = std::max(out[j], (fwd[t][j] + bwd[t][j]) / 2);
  return out;
}

// Finite-difference check of L = w . encode(rows) over every block.
GradCheckReport check_encoder(ModelKind kind, const std::vector<std::size_t>& rows, double dropout) {
  auto f = make_encoder(kind, 6, 4, 21);
  const std::vector<double> w{0.7, -1.1, 0.4, 0.9};
  auto forward = [&](auto* cache) {
    std::mt19937_64 rng(99);
    const DropoutSpec spec{dropout, &rng};
    if constexpr (std::is_same_v<std::remove_pointer_t<decltype(cache)>, CnnCache<double>>)
      return encode_cnn<double>(rows, 5, f.params, f.layout, cache, spec);
    else
      return encode_lstm<double>(rows, f.params, f.layout, cache, spec);
  };
  auto grads = make_grad_buffer(f.params);
  if (kind == ModelKind::cnn) {
    CnnCache<double> cache;
    forward(&cache);
    backward_cnn<double>(cache, w, f.params, f.layout, grads);
  } else {
    LstmCache<double> cache;
    forward(&cache);
    backward_lstm<double>(cache, w, f.params, f.layout, grads);
  }
  auto loss = [&] {
    const auto r = kind == ModelKind::cnn ? forward(static_cast<CnnCache<double>*>(nullptr))
                                          : forward(static_cast<LstmCache<double>*>(nullptr));
    return dot<double>(w, r.vector);
  };
  std::vector<GradCheckBlock> blocks;
  for (std::size_t k = 0; k < f.params.blocks().size(); ++k)
    blocks.push_back({f.params.blocks()[k].name, f.params.blocks()[k].value.values(), grads[k].values()});
  return finite_difference_check(loss, blocks, 1e-6, 1e-4);
}

}  // namespace

TEST(Cnn, MatchesReference) {
  const auto f = make_encoder(ModelKind::cnn, 8, 5, 3);
  for (const std::vector<std::size_t>& rows : {std::vector<std::size_t>{2}, {1, 2, 3, 4}, {0, 0, 6, 1, 7, 3}}) {
    const auto r = encode_cnn<double>(rows, 7, f.params, f.layout);
    ASSERT_EQ(r.vector.size(), 5u);
    const auto ref = cnn_reference(f, rows, 7);
    for (std::size_t j = 0; j < 5; ++j) EXPECT_NEAR(r.vector[j], ref[j], 1e-12);
    EXPECT_EQ(r.source, ReprSource::cnn);
  }
}

TEST(Lstm, MatchesReference) {
  const auto f = make_encoder(ModelKind::lstm, 8, 5, 4);
  for (const std::vector<std::size_t>& rows : {std::vector<std::size_t>{2}, {1, 2, 3, 4}, {0, 0, 6, 1, 7, 3}}) {
    const auto r = encode_lstm<double>(rows, f.params, f.layout);
    ASSERT_EQ(r.vector.size(), 5u);
    const auto ref = lstm_reference(f, rows);
    for (std::size_t j = 0; j < 5; ++j) EXPECT_NEAR(r.vector[j], ref[j], 1e-12);
  }
}

TEST(Lstm, SingleTokenIsAverageOfDirections) {
  const auto f = make_encoder(ModelKind::lstm, 3, 4, 8);
  const std::vector<std::size_t> rows{1};
  const auto fwd = lstm_pass(f, rows, 0), bwd = lstm_pass(f, rows, 1);
  const auto r = encode_lstm<double>(rows, f.params, f.layout);
  for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(r.vector[j], (fwd[0][j] + bwd[0][j]) / 2, 1e-15);
}

TEST(Encoders, OutputDimensionForAnyLength) {
  const auto c = make_encoder(ModelKind::cnn, 4, 3, 1);
  const auto l = make_encoder(ModelKind::lstm, 4, 3, 1);
  for (std::size_t n = 1; n <= 25; ++n) {
    std::vector<std::size_t> rows(n);
    for (std::size_t t = 0; t < n; ++t) rows[t] = t % 4;
    EXPECT_EQ(encode_cnn<double>(rows, 0, c.params, c.layout).vector.size(), 3u);
    EXPECT_EQ(encode_lstm<double>(rows, l.params, l.layout).vector.size(), 3u);
  }
  EXPECT_THROW(encode_cnn<double>({}, 0, c.params, c.layout), std::invalid_argument);
  EXPECT_THROW(encode_lstm<double>({}, l.params, l.layout), std::invalid_argument);
}

TEST(Encoders, GradientsMatchFiniteDifferences) {
  const std::vector<std::size_t> rows{1, 3, 2, 4};
  for (auto kind : {ModelKind::cnn, ModelKind::lstm})
    for (double dropout : {0.0, 0.3}) {
      const auto r = check_encoder(kind, rows, dropout);
      EXPECT_TRUE(r.passed) << to_string(kind) << " dropout " << dropout << ": " << r.max_relative_error << " in "
                            << r.worst_block;
    }
}

TEST(Encoders, RepeatedTokenGradientsAccumulate) {
  for (auto kind : {ModelKind::cnn, ModelKind::lstm}) {
    const auto r = check_encoder(kind, {2, 2, 1, 2}, 0.0);
    EXPECT_TRUE(r.passed) << to_string(kind) << ": " << r.max_relative_error;
  }
}

TEST(ScoreTriple, Examples) {
  RelationRepr<double> v{{2.0, 0.0}, ReprSource::lookup, Coverage::scored};
  const std::vector<double> u{1.0, 0.0}, zero{0.0, 0.0};
  EXPECT_NEAR(*score_triple<double>(u, v), 0.8808, 5e-5);
  EXPECT_NEAR(*score_triple<double>(u, v), sig(2.0), 1e-15);
  EXPECT_EQ(*score_triple<double>(zero, v), 0.5);
  RelationRepr<double> unseen;
  EXPECT_FALSE(score_triple<double>(u, unseen).has_value());
}

TEST(ScoreTriple, MonotoneAlongPositiveDirection) {
  const std::vector<double> u{0.3, 0.4};
  double prev = 0;
  for (double s = 0.5; s < 200; s *= 1.7) {
    RelationRepr<double> v{{0.3 * s, 0.4 * s}, ReprSource::lookup, Coverage::scored};
    const double p = *score_triple<double>(u, v);
    EXPECT_GE(p, prev);
    prev = p;
  }
  EXPECT_NEAR(prev, 1.0, 1e-12);
}

TEST(Lookup, StoredVectorOrUnseen) {
  Model<double> m;
  m.config.dim = 2;
  m.allocate({pair_key("a", "b")}, {"per:parent", Model<double>::shortened_key({"'s", "son", ","}, false)},
             {true, false});
  m.relation_embeddings()(1, 0) = 0.25;
  m.relation_embeddings()(1, 1) = -1.0;

  const auto seen = m.represent(make_text_triple("a", {"'s", "son", ","}, "b", false, "en", {"d", 0}));
  EXPECT_EQ(seen.coverage, Coverage::scored);
  EXPECT_EQ(seen.vector, (std::vector<double>{0.25, -1.0}));

  const auto unseen = m.represent(make_text_triple("a", {"'s", "daughter", ","}, "b", false, "en", {"d", 0}));
  EXPECT_EQ(unseen.coverage, Coverage::unseen);

  Triple kb;
  kb.subject = "a";
  kb.relation = "per:parent";
  kb.object = "b";
  m.relation_embeddings()(0, 0) = 3.0;
  EXPECT_EQ(m.represent(kb).vector, (std::vector<double>{3.0, 0.0}));
}
