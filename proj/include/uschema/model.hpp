#pragma once

// Trained model container: entity-pair embeddings, lookup relation
// embeddings and (for compositional models) the word vocabulary plus
// encoder parameters, together with the configuration that produced them.

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "uschema/corpus.hpp"
#include "uschema/encoders.hpp"
#include "uschema/numerics.hpp"
#include "uschema/text.hpp"

namespace uschema {

enum class ModelKind { uschema, cnn, lstm };

inline std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::uschema: return "uschema";
    case ModelKind::cnn: return "cnn";
    case ModelKind::lstm: return "lstm";
  }
  return "?";
}

inline ModelKind parse_model_kind(std::string_view s) {
  if (s == "uschema") return ModelKind::uschema;
  if (s == "cnn") return ModelKind::cnn;
  if (s == "lstm") return ModelKind::lstm;
  throw std::invalid_argument("unknown model kind '" + std::string(s) + "'");
}

struct TrainConfig {
  ModelKind kind = ModelKind::uschema;
  std::size_t dim = 50;
  double learning_rate = 0.001;
  std::size_t batch_size = 1024;
  std::size_t max_epochs = 15;
  double clip_norm = 1.0;
  double l2_pair = 1e-4;
  double l2_relation = 1e-4;
  double l2_encoder = 1e-4;
  double dropout = 0.1;  // encoders only, after the embedding layer
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double init_scale = 0.1;
  std::size_t negatives = 1;
  std::size_t negative_attempts = 100;
  std::uint64_t seed = 1;
  std::vector<std::string> languages;  // empty: every language in the store
  bool tie_dictionary = false;
  bool deterministic = false;
  std::size_t threads = 1;

  /// Per-kind defaults: 50d/1e-3/1024 for lookup, 100d/1e-4/128 for encoders.
  static TrainConfig defaults_for(ModelKind kind) {
    TrainConfig c;
    c.kind = kind;
    if (kind != ModelKind::uschema) {
      c.dim = 100;
      c.learning_rate = 0.0001;
      c.batch_size = 128;
    }
    return c;
  }

  AdamConfig adam() const { return {learning_rate, beta1, beta2, epsilon}; }
};

inline bool parse_bool(std::string_view v, bool& out) {
  if (v == "1" || v == "true" || v == "on" || v == "yes") return out = true, true;
  if (v == "0" || v == "false" || v == "off" || v == "no") return out = false, true;
  return false;
}

/// Applies one key=value setting; throws std::invalid_argument on an unknown
/// key or a malformed/non-positive value.
inline void apply_setting(TrainConfig& c, std::string_view key, std::string_view value) {
  auto bad = [&] { return std::invalid_argument("bad value '" + std::string(value) + "' for " + std::string(key)); };
  auto positive_size = [&](std::size_t& out) {
    long long v = 0;
    if (!parse_long(value, v) || v <= 0) throw bad();
    out = std::size_t(v);
  };
  auto real = [&](double& out, bool allow_zero) {
    double v = 0;
    if (!parse_double(value, v) || v < 0 || (!allow_zero && v == 0)) throw bad();
    out = v;
  };
  if (key == "kind") {
    c.kind = parse_model_kind(value);
  } else if (key == "dim") {
    positive_size(c.dim);
  } else if (key == "learning_rate") {
    real(c.learning_rate, false);
  } else if (key == "batch_size") {
    positive_size(c.batch_size);
  } else if (key == "max_epochs") {
    positive_size(c.max_epochs);
  } else if (key == "clip_norm") {
    real(c.clip_norm, false);
  } else if (key == "l2_pair") {
    real(c.l2_pair, true);
  } else if (key == "l2_relation") {
    real(c.l2_relation, true);
  } else if (key == "l2_encoder") {
    real(c.l2_encoder, true);
  } else if (key == "dropout") {
    real(c.dropout, true);
    if (c.dropout >= 1) throw bad();
  } else if (key == "beta1") {
    real(c.beta1, true);
    if (c.beta1 >= 1) throw bad();
  } else if (key == "beta2") {
    real(c.beta2, true);
    if (c.beta2 >= 1) throw bad();
  } else if (key == "epsilon") {
    real(c.epsilon, false);
  } else if (key == "init_scale") {
    real(c.init_scale, false);
  } else if (key == "negatives") {
    positive_size(c.negatives);
  } else if (key == "negative_attempts") {
    positive_size(c.negative_attempts);
  } else if (key == "seed") {
    long long v = 0;
    if (!parse_long(value, v) || v < 0) throw bad();
    c.seed = std::uint64_t(v);
  } else if (key == "languages") {
    c.languages.clear();
    for (auto& l : split(value, ','))
      if (!l.empty()) c.languages.push_back(l);
  } else if (key == "tie_dictionary") {
    if (!parse_bool(value, c.tie_dictionary)) throw bad();
  } else if (key == "deterministic") {
    if (!parse_bool(value, c.deterministic)) throw bad();
  } else if (key == "threads") {
    positive_size(c.threads);
  } else {
    throw std::invalid_argument("unknown config key '" + std::string(key) + "'");
  }
}

/// key=value lines covering every field, in a fixed order.
inline std::string to_text(const TrainConfig& c) {
  std::ostringstream o;
  o << "kind=" << to_string(c.kind) << '\n'
    << "dim=" << c.dim << '\n'
    << "learning_rate=" << format_exact(c.learning_rate) << '\n'
    << "batch_size=" << c.batch_size << '\n'
    << "max_epochs=" << c.max_epochs << '\n'
    << "clip_norm=" << format_exact(c.clip_norm) << '\n'
    << "l2_pair=" << format_exact(c.l2_pair) << '\n'
    << "l2_relation=" << format_exact(c.l2_relation) << '\n'
    << "l2_encoder=" << format_exact(c.l2_encoder) << '\n'
    << "dropout=" << format_exact(c.dropout) << '\n'
    << "beta1=" << format_exact(c.beta1) << '\n'
    << "beta2=" << format_exact(c.beta2) << '\n'
    << "epsilon=" << format_exact(c.epsilon) << '\n'
    << "init_scale=" << format_exact(c.init_scale) << '\n'
    << "negatives=" << c.negatives << '\n'
    << "negative_attempts=" << c.negative_attempts << '\n'
    << "seed=" << c.seed << '\n'
    << "languages=" << join(c.languages, ",") << '\n'
    << "tie_dictionary=" << (c.tie_dictionary ? "true" : "false") << '\n'
    << "deterministic=" << (c.deterministic ? "true" : "false") << '\n'
    << "threads=" << c.threads << '\n';
  return o.str();
}

/// Parses key=value lines. `kind` is applied first so that per-kind
/// defaults can be overridden by the remaining keys.
inline TrainConfig parse_config_text(const std::string& text, const std::string& origin, TrainConfig base) {
  std::istringstream in(text);
  std::string line;
  std::size_t n = 0;
  std::vector<std::tuple<std::string, std::string, std::size_t>> settings;
  while (std::getline(in, line)) {
    ++n;
    const auto view = trim(strip_cr(line));
    if (view.empty() || view.front() == '#') continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) throw ParseError(origin, n, "expected key=value");
    settings.emplace_back(std::string(trim(view.substr(0, eq))), std::string(trim(view.substr(eq + 1))), n);
  }
  for (const auto& [k, v, ln] : settings) {
    if (k != "kind") continue;
    try {
      const auto kind = parse_model_kind(v);
      if (kind != base.kind) base = TrainConfig::defaults_for(kind);
    } catch (const std::invalid_argument& e) {
      throw ParseError(origin, ln, e.what());
    }
  }
  for (const auto& [k, v, ln] : settings) {
    try {
      apply_setting(base, k, v);
    } catch (const std::invalid_argument& e) {
      throw ParseError(origin, ln, e.what());
    }
  }
  return base;
}

// ---------------------------------------------------------------------------

template <class T>
class Model {
 public:
  using value_type = T;

  TrainConfig config;
  std::vector<std::string> pairs;
  std::unordered_map<std::string, std::size_t> pair_ids;
  std::vector<std::string> relations;  // lookup table keys
  std::vector<bool> relation_is_kb;
  std::unordered_map<std::string, std::size_t> relation_ids;
  Vocabulary vocab;  // empty for lookup models
  ParameterSet<T> params;
  EncoderLayout layout;

  bool compositional() const noexcept { return config.kind != ModelKind::uschema; }
  std::size_t dim() const noexcept { return config.dim; }

  /// Allocates parameter blocks and indexes. Does not initialize values.
  void allocate(std::vector<std::string> pair_keys, std::vector<std::string> relation_keys,
                std::vector<bool> is_kb) {
    pairs = std::move(pair_keys);
    relations = std::move(relation_keys);
    relation_is_kb = std::move(is_kb);
    pair_ids.clear();
    relation_ids.clear();
    for (std::size_t i = 0; i < pairs.size(); ++i) pair_ids.emplace(pairs[i], i);
    for (std::size_t i = 0; i < relations.size(); ++i) relation_ids.emplace(relations[i], i);
    params = ParameterSet<T>();
    params.add("pair_emb", pairs.size(), dim());
    params.add("rel_emb", relations.size(), dim());
    if (compositional()) {
      params.add("word_emb", vocab.size(), dim());
      if (config.kind == ModelKind::cnn)
        add_cnn_params(params, dim());
      else
        add_lstm_params(params, dim());
    }
    layout = resolve_layout(params);
  }

  /// Uniform [-init_scale, init_scale] everywhere; LSTM forget bias 1.
  void initialize(std::mt19937_64& rng) {
    const T scale = T(config.init_scale);
    for (auto& b : params.blocks()) {
      if (b.name.ends_with(".bias"))
        b.value.fill(T(0));
      else
        fill_uniform(b.value.values(), scale, rng);
    }
    if (config.kind == ModelKind::lstm) set_forget_bias(params, T(1));
  }

  Matrix<T>& pair_embeddings() { return params.blocks()[0].value; }
  const Matrix<T>& pair_embeddings() const { return params.blocks()[0].value; }
  Matrix<T>& relation_embeddings() { return params.blocks()[1].value; }
  const Matrix<T>& relation_embeddings() const { return params.blocks()[1].value; }

  std::vector<std::string> schema_relations() const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < relations.size(); ++i)
      if (relation_is_kb[i]) out.push_back(relations[i]);
    return out;
  }

  /// Lookup-table key of a text pattern: direction marker plus the
  /// log-shortened pattern.
  static std::string shortened_key(const std::vector<std::string>& pattern, bool inverse) {
    return text_relation_key(shorten_pattern(pattern), inverse);
  }

  /// Key under which a triple's relation lives in the lookup table, or
  /// nullopt when a compositional model encodes it instead.
  std::optional<std::string> lookup_key(const Triple& t) const {
    if (t.kind == TripleKind::kb) return t.relation;
    if (compositional()) return std::nullopt;
    return shortened_key(t.pattern, t.inverse);
  }

  /// Canonical embedding rows for a direction-marked pattern.
  std::vector<std::size_t> token_rows(const std::vector<std::string>& pattern, bool inverse,
                                      std::string_view language) const {
    std::vector<std::size_t> rows;
    for (const auto& tok : marked_pattern(pattern, inverse)) rows.push_back(vocab.canonical(vocab.id(tok, language)));
    return rows;
  }

  std::size_t pad_row() const { return vocab.canonical(vocab.id(kPadToken)); }

  RelationRepr<T> lookup_relation(std::string_view key) const {
    RelationRepr<T> r;
    r.source = ReprSource::lookup;
    if (auto it = relation_ids.find(std::string(key)); it != relation_ids.end()) {
      const auto row = relation_embeddings().row(it->second);
      r.vector.assign(row.begin(), row.end());
      r.coverage = Coverage::scored;
    }
    return r;
  }

  /// Prediction-time representation of a text pattern (dropout off).
  RelationRepr<T> represent_pattern(const std::vector<std::string>& pattern, bool inverse,
                                    std::string_view language) const {
    if (!compositional()) return lookup_relation(shortened_key(pattern, inverse));
    const auto rows = token_rows(pattern, inverse, language);
    if (config.kind == ModelKind::cnn) return encode_cnn<T>(rows, pad_row(), params, layout);
    return encode_lstm<T>(rows, params, layout);
  }

  RelationRepr<T> represent(const Triple& t) const {
    if (t.kind == TripleKind::kb) return lookup_relation(t.relation);
    return represent_pattern(t.pattern, t.inverse, t.language);
  }

  std::optional<std::size_t> pair_id(std::string_view subject, std::string_view object) const {
    if (auto it = pair_ids.find(pair_key(subject, object)); it != pair_ids.end()) return it->second;
    return std::nullopt;
  }

  std::optional<T> score(std::size_t pair, const RelationRepr<T>& repr) const {
    return score_triple<T>(pair_embeddings().row(pair), repr);
  }
};

}  // namespace uschema
