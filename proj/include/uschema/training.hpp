#pragma once

// BPR training for lookup and compositional universal-schema models.
//
// Each positive triple is paired with sampled unobserved entity pairs for
// the same relation; the loss -log sigma(score_pos - score_neg) is averaged
// over the positives of a mini-batch. Batches are split into chunks whose
// gradients are reduced in chunk order, so a run is reproducible for a given
// seed and chunk count.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <thread>
#include <unordered_set>
#include <vector>

#include "uschema/checkpoint.hpp"
#include "uschema/corpus.hpp"
#include "uschema/encoders.hpp"
#include "uschema/model.hpp"
#include "uschema/numerics.hpp"

namespace uschema {

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BprTerm {
  double loss;
  double d_pos;  // dloss/dpos_raw
  double d_neg;  // dloss/dneg_raw
};

/// -log sigma(pos_raw - neg_raw) and its partial derivatives.
inline BprTerm bpr_loss(double pos_raw, double neg_raw) {
  const double x = pos_raw - neg_raw;
  const double g = sigmoid(x) - 1.0;
  return {softplus(-x), g, -g};
}

/// Draws entity pairs that have not been observed with a given relation.
class NegativeSampler {
 public:
  NegativeSampler(std::size_t num_pairs, const std::vector<std::pair<std::size_t, std::size_t>>& observed,
                  std::size_t attempts)
      : num_pairs_(num_pairs), attempts_(attempts) {
    for (const auto& [p, r] : observed) observed_.insert(key(p, r));
  }

  static NegativeSampler from_store(const TripleStore& store, std::size_t attempts = 100) {
    std::vector<std::pair<std::size_t, std::size_t>> obs;
    for (std::size_t i = 0; i < store.size(); ++i) obs.emplace_back(store.triple_pair[i], store.triple_relation[i]);
    return NegativeSampler(store.pairs.size(), obs, attempts);
  }

  bool observed(std::size_t pair, std::size_t relation) const { return observed_.count(key(pair, relation)) > 0; }

  /// Uniform over pairs unobserved with `relation`, retried up to the
  /// attempt bound; afterwards any pair other than the positive.
  std::size_t sample(std::size_t positive_pair, std::size_t relation, std::mt19937_64& rng) const {
    if (num_pairs_ < 2) throw std::invalid_argument("negative sampling needs at least two entity pairs");
    std::uniform_int_distribution<std::size_t> any(0, num_pairs_ - 1);
    for (std::size_t a = 0; a < attempts_; ++a) {
      const std::size_t p = any(rng);
      if (p != positive_pair && !observed(p, relation)) return p;
    }
    std::uniform_int_distribution<std::size_t> other(0, num_pairs_ - 2);
    std::size_t p = other(rng);
    return p >= positive_pair ? p + 1 : p;
  }

  /// The negative counterpart of store triple `index`: same relation, a
  /// different entity pair.
  Triple sample_negative(const TripleStore& store, std::size_t index, std::mt19937_64& rng) const {
    const std::size_t p = sample(store.triple_pair[index], store.triple_relation[index], rng);
    Triple t = store.triples[index];
    const auto& pk = store.pairs[p];
    const auto tab = pk.find('\t');
    t.subject = pk.substr(0, tab);
    t.object = pk.substr(tab + 1);
    t.provenance.reset();
    return t;
  }

 private:
  static std::uint64_t key(std::size_t p, std::size_t r) { return (std::uint64_t(p) << 32) ^ std::uint64_t(r); }

  std::size_t num_pairs_;
  std::size_t attempts_;
  std::unordered_set<std::uint64_t> observed_;
};

// ---------------------------------------------------------------------------

inline bool language_included(const TrainConfig& cfg, const Triple& t) {
  if (t.kind == TripleKind::kb || cfg.languages.empty()) return true;
  return std::find(cfg.languages.begin(), cfg.languages.end(), t.language) != cfg.languages.end();
}

/// Builds the (untrained, initialized) model for a store: pair table,
/// lookup relation table and, for encoders, the word vocabulary with
/// optional dictionary ties between exactly two languages.
template <class T>
Model<T> build_model(const TripleStore& store, const TrainConfig& cfg,
                     const std::vector<std::pair<std::string, std::string>>& dictionary = {},
                     std::vector<std::string>* report = nullptr) {
  Model<T> model;
  model.config = cfg;

  std::vector<std::string> relations;
  std::vector<bool> is_kb;
  std::unordered_map<std::string, std::size_t> seen;
  for (const auto& t : store.triples) {
    if (!language_included(cfg, t)) continue;
    auto key = model.lookup_key(t);
    if (!key) continue;
    if (seen.try_emplace(*key, relations.size()).second) {
      relations.push_back(*key);
      is_kb.push_back(t.kind == TripleKind::kb);
    }
  }

  if (model.compositional()) {
    std::vector<std::string> langs = cfg.languages;
    if (langs.empty()) {
      std::set<std::string> found;
      for (const auto& t : store.triples)
        if (t.kind == TripleKind::text) found.insert(t.language);
      langs.assign(found.begin(), found.end());
    }
    if (cfg.tie_dictionary && langs.size() != 2)
      throw std::invalid_argument("dictionary tying needs exactly two languages");
    std::vector<Vocabulary> per_lang;
    for (const auto& lang : langs) {
      std::vector<std::string> tokens;
      for (const auto& t : store.triples)
        if (t.kind == TripleKind::text && t.language == lang) tokens.insert(tokens.end(), t.pattern.begin(), t.pattern.end());
      per_lang.push_back(build_vocab(tokens, 1, lang));
    }
    Vocabulary merged;
    if (!per_lang.empty()) {
      merged = per_lang[0];
      for (std::size_t i = 1; i < per_lang.size(); ++i) {
        const bool tie = cfg.tie_dictionary && i == 1;
        auto res = tie_vocabularies(merged, per_lang[i], tie ? dictionary : std::vector<std::pair<std::string, std::string>>{});
        if (report) report->insert(report->end(), res.report.begin(), res.report.end());
        if (report && tie) report->push_back("tied " + std::to_string(res.applied) + " dictionary pairs");
        merged = std::move(res.vocabulary);
      }
    }
    for (auto tok : {kUnkToken, kForwardMarker, kInverseMarker, kEmptyPatternToken, kPadToken}) merged.add_reserved(tok);
    model.vocab = std::move(merged);
  }

  model.allocate(store.pairs, std::move(relations), std::move(is_kb));
  std::mt19937_64 rng(cfg.seed);
  model.initialize(rng);
  return model;
}

/// Copies entity-pair vectors from a lookup model into an encoder model.
/// Lower-dimensional source vectors are zero-padded. The pair sets must be
/// identical; otherwise the error lists the differences.
template <class T>
void init_from_uschema(Model<T>& model, const Model<T>& source) {
  std::vector<std::string> missing, extra;
  for (const auto& p : model.pairs)
    if (!source.pair_ids.count(p)) missing.push_back(p);
  for (const auto& p : source.pairs)
    if (!model.pair_ids.count(p)) extra.push_back(p);
  if (!missing.empty() || !extra.empty()) {
    std::string msg = "entity-pair vocabulary mismatch:";
    auto list = [&](const char* what, const std::vector<std::string>& v) {
      if (v.empty()) return;
      msg += std::string(" ") + what + " " + std::to_string(v.size()) + " [";
      for (std::size_t i = 0; i < v.size() && i < 10; ++i) {
        auto s = v[i];
        std::replace(s.begin(), s.end(), '\t', ',');
        msg += (i ? "; " : "") + s;
      }
      msg += v.size() > 10 ? "; ...]" : "]";
    };
    list("missing from source", missing);
    list("absent from model", extra);
    throw std::invalid_argument(msg);
  }
  if (source.dim() > model.dim())
    throw std::invalid_argument("source dimension " + std::to_string(source.dim()) + " exceeds model dimension " +
                                std::to_string(model.dim()));
  auto& dst = model.pair_embeddings();
  const auto& src = source.pair_embeddings();
  for (std::size_t i = 0; i < model.pairs.size(); ++i) {
    auto out = dst.row(i);
    std::fill(out.begin(), out.end(), T(0));
    const auto in = src.row(source.pair_ids.at(model.pairs[i]));
    std::copy(in.begin(), in.end(), out.begin());
  }
}

// ---------------------------------------------------------------------------

struct EpochStats {
  std::size_t epoch = 0;
  double mean_loss = 0;
  double seconds = 0;
  std::optional<double> dev_score;
  std::string checkpoint;
};

template <class T>
struct TrainOptions {
  std::string out_dir;  // checkpoints and train_log.tsv; empty writes nothing
  const Model<T>* init_from = nullptr;
  std::vector<std::pair<std::string, std::string>> dictionary;
  // Dev score per epoch (higher is better); the best epoch is kept.
  std::function<std::optional<double>(const Model<T>&, std::size_t)> evaluate_epoch;
  std::function<void(Model<T>&)> after_init;
  std::function<void(std::size_t, double)> on_step;  // step, batch mean loss
  std::size_t max_steps = 0;                          // 0: no limit
  std::ostream* log = nullptr;
};

template <class T>
struct TrainResult {
  Model<T> model;  // best epoch when a dev scorer is given, else the last
  std::vector<EpochStats> epochs;
  std::size_t best_epoch = 0;
  std::size_t steps = 0;
  std::vector<std::string> report;
};

inline std::string checkpoint_name(ModelKind kind, std::size_t epoch) {
  return "model." + to_string(kind) + ".epoch" + std::to_string(epoch) + ".ckpt";
}

namespace detail {

struct Example {
  std::size_t pair = 0;
  std::size_t slot = 0;                    // relation identity for negative sampling
  std::optional<std::size_t> lookup_row;  // set for table relations
  std::vector<std::size_t> rows;          // encoder input otherwise
};

struct Plan {
  std::size_t example = 0;
  std::vector<std::size_t> negatives;
  std::uint64_t dropout_seed = 0;
};

template <class T>
struct ChunkState {
  GradBuffer<T> grads;
  double loss = 0;
  std::vector<std::size_t> pairs, relations, words;
};

inline constexpr std::size_t kDeterministicChunks = 4;

template <class T>
void process_example(const Model<T>& model, const Example& ex, const Plan& plan, T scale, ChunkState<T>& st) {
  const std::size_t d = model.dim();
  const auto& pairs = model.pair_embeddings();
  const auto& cfg = model.config;
  std::mt19937_64 drop_rng(plan.dropout_seed);
  const DropoutSpec dropout{cfg.dropout, &drop_rng};

  CnnCache<T> cnn_cache;
  LstmCache<T> lstm_cache;
  std::vector<T> v;
  if (ex.lookup_row) {
    const auto row = model.relation_embeddings().row(*ex.lookup_row);
    v.assign(row.begin(), row.end());
    st.relations.push_back(*ex.lookup_row);
  } else if (cfg.kind == ModelKind::cnn) {
    v = encode_cnn<T>(ex.rows, model.pad_row(), model.params, model.layout, &cnn_cache, dropout).vector;
    st.words.insert(st.words.end(), cnn_cache.rows.begin(), cnn_cache.rows.end());
  } else {
    v = encode_lstm<T>(ex.rows, model.params, model.layout, &lstm_cache, dropout).vector;
    st.words.insert(st.words.end(), ex.rows.begin(), ex.rows.end());
  }

  std::vector<T> dv(d, T(0));
  const auto up = pairs.row(ex.pair);
  const T pos = dot<T>(up, v);
  auto& dpairs = st.grads[0];
  st.pairs.push_back(ex.pair);
  for (std::size_t neg : plan.negatives) {
    const auto un = pairs.row(neg);
    const auto term = bpr_loss(double(pos), double(dot<T>(un, v)));
    st.loss += term.loss;
    const T g = T(term.d_pos) * scale;
    axpy<T>(g, v, dpairs.row(ex.pair));
    axpy<T>(-g, v, dpairs.row(neg));
    for (std::size_t j = 0; j < d; ++j) dv[j] += g * (up[j] - un[j]);
    st.pairs.push_back(neg);
  }
  if (ex.lookup_row)
    axpy<T>(T(1), dv, st.grads[1].row(*ex.lookup_row));
  else if (cfg.kind == ModelKind::cnn)
    backward_cnn<T>(cnn_cache, dv, model.params, model.layout, st.grads);
  else
    backward_lstm<T>(lstm_cache, dv, model.params, model.layout, st.grads);
}

// Adds coeff * w to the gradient of each distinct row and returns the
// matching penalty coeff/2 * |w|^2.
template <class T>
double add_row_decay(Matrix<T>& grad, const Matrix<T>& value, std::vector<std::size_t>& rows, T coeff) {
  if (coeff == T(0)) return 0;
  std::sort(rows.begin(), rows.end());
  rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
  double penalty = 0;
  for (std::size_t r : rows) {
    axpy<T>(coeff, value.row(r), grad.row(r));
    const double n = double(l2_norm<T>(value.row(r)));
    penalty += 0.5 * double(coeff) * n * n;
  }
  return penalty;
}

struct ExampleSet {
  std::vector<Example> examples;
  std::vector<std::pair<std::size_t, std::size_t>> observed;  // (pair, slot)
  std::vector<std::size_t> triple_index;
};

template <class T>
ExampleSet make_examples(const Model<T>& model, const TripleStore& store) {
  ExampleSet set;
  std::unordered_map<std::string, std::size_t> encoded_slots;
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto& t = store.triples[i];
    if (!language_included(model.config, t)) continue;
    Example ex;
    ex.pair = model.pair_ids.at(store.pairs[store.triple_pair[i]]);
    if (auto key = model.lookup_key(t)) {
      ex.lookup_row = model.relation_ids.at(*key);
      ex.slot = *ex.lookup_row;
    } else {
      const auto [it, _] = encoded_slots.try_emplace(t.relation, model.relations.size() + encoded_slots.size());
      ex.slot = it->second;
      ex.rows = model.token_rows(t.pattern, t.inverse, t.language);
    }
    set.observed.emplace_back(ex.pair, ex.slot);
    set.examples.push_back(std::move(ex));
    set.triple_index.push_back(i);
  }
  return set;
}

/// Computes the batch objective into the model's gradient slots: chunks are
/// filled (in parallel when workers > 1) and reduced in chunk order, then
/// l2 decay is added. Returns the summed BPR loss and the l2 penalty.
template <class T>
std::pair<double, double> accumulate_batch(Model<T>& model, const std::vector<Example>& examples,
                                           const std::vector<Plan>& plans, std::vector<ChunkState<T>>& states,
                                           std::size_t workers) {
  const std::size_t chunks = states.size();
  const T scale = T(1.0 / double(plans.size()));
  auto run_chunk = [&](std::size_t c) {
    auto& st = states[c];
    for (auto& g : st.grads) g.fill(T(0));
    st.loss = 0;
    st.pairs.clear();
    st.relations.clear();
    st.words.clear();
    const std::size_t lo = plans.size() * c / chunks, hi = plans.size() * (c + 1) / chunks;
    for (std::size_t k = lo; k < hi; ++k) process_example(model, examples[plans[k].example], plans[k], scale, st);
  };
  if (workers <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) run_chunk(c);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t c = w; c < chunks; c += workers) run_chunk(c);
      });
    for (auto& th : pool) th.join();
  }

  model.params.zero_grads();
  double loss = 0;
  std::vector<std::size_t> touched_pairs, touched_rels, touched_words;
  for (auto& st : states) {
    loss += st.loss;
    for (std::size_t k = 0; k < st.grads.size(); ++k)
      axpy<T>(T(1), st.grads[k].values(), model.params.blocks()[k].grad.values());
    touched_pairs.insert(touched_pairs.end(), st.pairs.begin(), st.pairs.end());
    touched_rels.insert(touched_rels.end(), st.relations.begin(), st.relations.end());
    touched_words.insert(touched_words.end(), st.words.begin(), st.words.end());
  }

  const auto& cfg = model.config;
  auto& blocks = model.params.blocks();
  double penalty = add_row_decay(blocks[0].grad, blocks[0].value, touched_pairs, T(cfg.l2_pair));
  penalty += add_row_decay(blocks[1].grad, blocks[1].value, touched_rels, T(cfg.l2_relation));
  if (model.compositional()) {
    const std::size_t w = model.layout.word_emb;
    penalty += add_row_decay(blocks[w].grad, blocks[w].value, touched_words, T(cfg.l2_encoder));
    for (std::size_t k = 0; k < blocks.size(); ++k) {
      if (k < 2 || k == w || cfg.l2_encoder == 0) continue;
      axpy<T>(T(cfg.l2_encoder), blocks[k].value.values(), blocks[k].grad.values());
      const double n = double(l2_norm<T>(blocks[k].value.values()));
      penalty += 0.5 * cfg.l2_encoder * n * n;
    }
  }
  return {loss, penalty};
}

}  // namespace detail

/// Full training objective for one batch: mean BPR loss over the given
/// triples (negatives[i] lists the corrupting pair ids of triple i) plus the
/// l2 penalty. Gradients are left in the model's gradient slots. Dropout
/// masks come from `dropout_seed` + i, so repeated calls see the same masks.
template <class T>
double batch_objective(Model<T>& model, const TripleStore& store, const std::vector<std::vector<std::size_t>>& negatives,
                       std::uint64_t dropout_seed = 0, std::size_t chunks = 1) {
  const auto set = detail::make_examples(model, store);
  if (negatives.size() != set.examples.size()) throw std::invalid_argument("one negative list per triple required");
  std::vector<detail::Plan> plans;
  for (std::size_t i = 0; i < set.examples.size(); ++i) plans.push_back({i, negatives[i], dropout_seed + i});
  std::vector<detail::ChunkState<T>> states(std::max<std::size_t>(1, chunks));
  for (auto& s : states) s.grads = make_grad_buffer(model.params);
  const auto [loss, penalty] = detail::accumulate_batch(model, set.examples, plans, states, 1);
  return loss / double(plans.size()) + penalty;
}

inline void validate(const TrainConfig& c) {
  if (c.dim == 0 || c.batch_size == 0 || c.max_epochs == 0 || c.negatives == 0 || c.threads == 0)
    throw std::invalid_argument("train config: sizes must be positive");
  if (!(c.learning_rate > 0) || !(c.clip_norm > 0) || !(c.epsilon > 0) || !(c.init_scale > 0))
    throw std::invalid_argument("train config: learning_rate, clip_norm, epsilon, init_scale must be positive");
  if (c.dropout < 0 || c.dropout >= 1) throw std::invalid_argument("train config: dropout must be in [0, 1)");
  if (c.l2_pair < 0 || c.l2_relation < 0 || c.l2_encoder < 0)
    throw std::invalid_argument("train config: l2 coefficients must be non-negative");
}

template <class T>
TrainResult<T> train(const TripleStore& store, const TrainConfig& cfg, const TrainOptions<T>& opts = {}) {
  validate(cfg);
  if (store.empty()) throw std::invalid_argument("cannot train on an empty triple store");

  TrainResult<T> result;
  Model<T> model = build_model<T>(store, cfg, opts.dictionary, &result.report);
  if (opts.init_from) init_from_uschema(model, *opts.init_from);
  if (opts.after_init) opts.after_init(model);

  auto set = detail::make_examples(model, store);
  auto& examples = set.examples;
  if (examples.empty()) throw std::invalid_argument("no training triples for the configured languages");
  const NegativeSampler sampler(model.pairs.size(), set.observed, cfg.negative_attempts);

  AdamState<T> adam(model.params);
  const AdamConfig adam_cfg = cfg.adam();
  std::mt19937_64 shuffle_rng(cfg.seed);
  std::mt19937_64 sample_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);

  const std::size_t chunks = cfg.deterministic ? detail::kDeterministicChunks : cfg.threads;
  const std::size_t workers = std::min(cfg.threads, chunks);
  std::vector<detail::ChunkState<T>> states(chunks);
  for (auto& s : states) s.grads = make_grad_buffer(model.params);

  std::ofstream log_file;
  if (!opts.out_dir.empty()) {
    std::filesystem::create_directories(opts.out_dir);
    log_file = open_output((std::filesystem::path(opts.out_dir) / "train_log.tsv").string());
    log_file << "epoch\tmean_loss\twall_seconds\n";
  }

  std::optional<Model<T>> best;
  std::optional<double> best_score;
  std::string last_good_checkpoint;
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0;
    bool stop = false;

    for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch_size) {
      const std::size_t b1 = std::min(order.size(), b0 + cfg.batch_size);
      std::vector<detail::Plan> plans(b1 - b0);
      for (std::size_t k = 0; k < plans.size(); ++k) {
        auto& p = plans[k];
        p.example = order[b0 + k];
        const auto& ex = examples[p.example];
        for (std::size_t n = 0; n < cfg.negatives; ++n) p.negatives.push_back(sampler.sample(ex.pair, ex.slot, sample_rng));
        p.dropout_seed = sample_rng();
      }
      const auto [batch_loss, penalty] = detail::accumulate_batch(model, examples, plans, states, workers);
      (void)penalty;
      if (!std::isfinite(batch_loss))
        throw DivergenceError("non-finite loss in epoch " + std::to_string(epoch) +
                              (last_good_checkpoint.empty() ? "" : "; last good checkpoint " + last_good_checkpoint));
      epoch_loss += batch_loss;

      clip_global_norm(model.params, cfg.clip_norm);
      try {
        adam_step(model.params, adam, adam_cfg);
      } catch (const NumericError& e) {
        throw DivergenceError(std::string(e.what()) +
                              (last_good_checkpoint.empty() ? "" : "; last good checkpoint " + last_good_checkpoint));
      }
      ++result.steps;
      if (opts.on_step) opts.on_step(result.steps, batch_loss / double(plans.size()));
      if (opts.max_steps && result.steps >= opts.max_steps) {
        stop = true;
        break;
      }
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.mean_loss = epoch_loss / double(examples.size());
    stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (opts.evaluate_epoch) stats.dev_score = opts.evaluate_epoch(model, epoch);
    if (!opts.out_dir.empty()) {
      stats.checkpoint = (std::filesystem::path(opts.out_dir) / checkpoint_name(cfg.kind, epoch)).string();
      write_checkpoint(model, stats.checkpoint);
      last_good_checkpoint = stats.checkpoint;
      log_file << epoch << '\t' << format_fixed(stats.mean_loss, 6) << '\t' << format_fixed(stats.seconds, 3) << '\n';
      log_file.flush();
    }
    if (opts.log) {
      *opts.log << "epoch " << epoch << " loss " << format_fixed(stats.mean_loss, 6);
      if (stats.dev_score) *opts.log << " dev " << format_fixed(*stats.dev_score, 4);
      *opts.log << '\n';
    }
    if (stats.dev_score && (!best_score || *stats.dev_score > *best_score)) {
      best_score = stats.dev_score;
      best = model;
      result.best_epoch = epoch;
    }
    result.epochs.push_back(stats);
    if (stop) break;
  }

  if (best) {
    result.model = std::move(*best);
  } else {
    result.model = std::move(model);
    result.best_epoch = result.epochs.back().epoch;
  }
  return result;
}

}  // namespace uschema
