#pragma once

// Finite-difference check of the full training objective on a five-triple
// toy model in double precision.

#include <string>
#include <vector>

#include "uschema/training.hpp"

namespace uschema {

/// Two KB facts and three text patterns over three entity pairs; patterns
/// cover forward, inverse and single-token cases.
inline TripleStore toy_gradcheck_store() {
  std::vector<Triple> triples;
  auto kb = [&](std::string s, std::string r, std::string o) {
    Triple t;
    t.subject = std::move(s);
    t.relation = std::move(r);
    t.object = std::move(o);
    triples.push_back(std::move(t));
  };
  kb("a", "per:spouse", "b");
  triples.push_back(make_text_triple("a", {"is", "married", "to"}, "b", false, "en", {"d1", 0}));
  triples.push_back(make_text_triple("d", {"works", "for", "the", "firm", "of"}, "c", true, "en", {"d2", 3}));
  kb("c", "org:employees", "d");
  triples.push_back(make_text_triple("e", {"of"}, "f", false, "en", {"d3", 1}));
  return TripleStore::build(std::move(triples));
}

struct GradCheckOptions {
  ModelKind kind = ModelKind::lstm;
  std::size_t dim = 4;
  std::uint64_t seed = 7;
  double epsilon = 1e-6;
  double tolerance = 1e-4;
  double init_scale = 0.5;
  double l2 = 1e-2;
  double dropout = 0.1;
};

inline GradCheckReport run_gradcheck(const GradCheckOptions& o) {
  TrainConfig cfg = TrainConfig::defaults_for(o.kind);
  cfg.dim = o.dim;
  cfg.seed = o.seed;
  cfg.init_scale = o.init_scale;
  cfg.l2_pair = cfg.l2_relation = cfg.l2_encoder = o.l2;
  cfg.dropout = o.dropout;
  const auto store = toy_gradcheck_store();
  auto model = build_model<double>(store, cfg);

  // Each triple is corrupted by the next pair in cyclic order.
  std::vector<std::vector<std::size_t>> negatives;
  const auto examples = detail::make_examples(model, store);
  for (const auto& ex : examples.examples) negatives.push_back({(ex.pair + 1) % model.pairs.size()});

  batch_objective(model, store, negatives, o.seed);
  std::vector<std::vector<double>> analytic;
  for (const auto& b : model.params.blocks()) analytic.emplace_back(b.grad.values().begin(), b.grad.values().end());
  std::vector<GradCheckBlock> blocks;
  for (std::size_t k = 0; k < model.params.blocks().size(); ++k) {
    auto& b = model.params.blocks()[k];
    blocks.push_back({b.name, b.value.values(), analytic[k]});
  }
  return finite_difference_check([&] { return batch_objective(model, store, negatives, o.seed); }, blocks, o.epsilon,
                                 o.tolerance);
}

}  // namespace uschema
