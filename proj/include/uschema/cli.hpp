#pragma once

// Command-line front end. Exit status: 0 on success, 1 on any input or
// runtime error (one line on stderr), 2 on usage errors.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "uschema/checkpoint.hpp"
#include "uschema/corpus.hpp"
#include "uschema/evaluation.hpp"
#include "uschema/gradcheck.hpp"
#include "uschema/model.hpp"
#include "uschema/predictor.hpp"
#include "uschema/synth.hpp"
#include "uschema/training.hpp"

namespace uschema::cli {

inline constexpr const char* kThreadsEnv = "USCHEMA_THREADS";

/// Thread count from USCHEMA_THREADS, or 1 when unset or invalid.
inline std::size_t default_threads() {
  const char* v = std::getenv(kThreadsEnv);
  long long n = 0;
  return v && parse_long(v, n) && n > 0 ? std::size_t(n) : 1;
}

/// True when a key=value config text assigns `key`.
inline bool sets_key(const std::string& text, std::string_view key) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    if (trim(std::string_view(line).substr(0, eq)) == key) return true;
  }
  return false;
}

struct LanguageInput {
  std::string language;
  std::string path;
};

inline std::vector<LanguageInput> parse_language_inputs(const std::vector<std::string>& specs) {
  std::vector<LanguageInput> out;
  for (const auto& s : specs) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == s.size())
      throw std::invalid_argument("expected LANG=PATH, got '" + s + "'");
    out.push_back({s.substr(0, eq), s.substr(eq + 1)});
  }
  return out;
}

inline std::vector<LanguageCorpus> read_corpora(const std::vector<LanguageInput>& inputs) {
  std::vector<LanguageCorpus> out;
  for (const auto& in : inputs) out.push_back({in.language, read_sentences(in.path)});
  return out;
}

/// Text triples of every sentence, both argument orders.
inline std::vector<Triple> text_triples(const std::vector<LanguageCorpus>& corpora, std::size_t max_len) {
  std::vector<Triple> out;
  for (const auto& c : corpora)
    for (const auto& s : c.sentences)
      for (auto& t : extract_text_triples(s, max_len, c.language)) out.push_back(std::move(t));
  return out;
}

inline TypeConstraints read_types(const std::string& signatures, const std::string& entity_types) {
  TypeConstraints types;
  if (!signatures.empty()) read_signatures(signatures, types);
  if (!entity_types.empty()) read_entity_types(entity_types, types);
  return types;
}

/// Token gap between the query and filler mentions in the provenance
/// sentence; -1 when the sentence or mentions are missing.
inline void attach_pattern_lengths(std::vector<Prediction>& preds, const std::vector<LanguageCorpus>& corpora) {
  std::map<std::pair<std::string, long long>, const Sentence*> index;
  for (const auto& c : corpora)
    for (const auto& s : c.sentences) index.emplace(std::pair{s.doc_id, s.index}, &s);
  for (auto& p : preds) {
    p.pattern_length = -1;
    const auto it = index.find({p.provenance.doc_id, p.provenance.sentence_index});
    if (it == index.end()) continue;
    for (const auto& a : it->second->mentions)
      for (const auto& b : it->second->mentions) {
        if (a.entity != p.query || b.entity != p.filler) continue;
        const auto& first = a.start < b.start ? a : b;
        const auto& second = a.start < b.start ? b : a;
        if (second.start < first.end) continue;
        const int gap = int(second.start - first.end);
        if (p.pattern_length < 0 || gap < p.pattern_length) p.pattern_length = gap;
      }
  }
}

inline std::vector<LengthBin> parse_bins(const std::string& spec) {
  std::vector<LengthBin> bins;
  for (const auto& part : split(spec, ',')) {
    const auto dash = part.find('-');
    long long lo = 0, hi = 0;
    if (dash == std::string::npos || !parse_long(part.substr(0, dash), lo) || !parse_long(part.substr(dash + 1), hi) ||
        lo < 0 || hi < lo)
      throw std::invalid_argument("bad length bin '" + part + "'");
    bins.push_back({int(lo), int(hi)});
  }
  return bins;
}

/// "f32" or "f64" from a checkpoint header.
inline std::string checkpoint_dtype(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string magic, dtype;
  std::getline(in, magic);
  std::getline(in, dtype);
  if (dtype == "dtype\tf32") return "f32";
  if (dtype == "dtype\tf64") return "f64";
  throw ParseError(path, 2, "missing dtype line");
}

template <class F>
decltype(auto) with_checkpoint(const std::string& path, F&& f) {
  if (checkpoint_dtype(path) == "f64") return f(read_checkpoint<double>(path));
  return f(read_checkpoint<float>(path));
}

/// Snapshot path next to an output: inside it for directories, alongside
/// it otherwise.
inline std::string snapshot_path(const std::string& output, bool is_dir) {
  return is_dir ? (std::filesystem::path(output) / "run_config.txt").string() : output + ".run_config.txt";
}

inline void write_snapshot(const CLI::App& sub, const std::string& path, const std::string& extra = "") {
  auto out = open_output(path);
  out << "# " << sub.get_name() << '\n' << sub.config_to_str(true, false) << extra;
}

// ---------------------------------------------------------------------------

struct Runner {
  Runner(std::ostream& o, std::ostream& e) : out(o), err(e) {}

  std::ostream& out;
  std::ostream& err;

  // preprocess
  std::vector<std::string> inputs;
  std::string kb_path, out_path;
  PreprocessConfig pre;

  // train
  std::string triples_path, config_path, dictionary_path, init_from, precision = "f32", kind;
  std::vector<std::string> settings, dev_inputs;
  std::string dev_gold;
  std::optional<std::size_t> dim, epochs, batch_size, threads;
  std::optional<double> learning_rate;
  std::optional<std::uint64_t> seed;
  bool deterministic = false;

  // tune / predict / nn / evaluate
  std::string model_path, gold_path, thresholds_path, signatures, entity_types, aliases, source;
  std::string alias_relation = "per:alternate_names";
  double alias_floor = 0.5;
  std::size_t max_len = 20;
  std::vector<std::string> prediction_paths;
  std::string mode = "anydoc", curve_path, length_path, bins = "1-5,6-10,11-20";
  std::optional<std::size_t> recall_denominator;
  std::vector<std::string> sentence_inputs;
  std::string word, pattern, language, filter_language;
  std::size_t k = 10;
  bool relations = false;
  bool inverse = false;

  // gradcheck
  GradCheckOptions gc;
  std::string gc_kind = "lstm";

  // synth
  SynthConfig synth;

  TrainConfig resolve_train_config() const {
    std::string text;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw std::runtime_error("cannot open " + config_path);
      std::ostringstream ss;
      ss << in.rdbuf();
      text = ss.str();
    }
    if (!kind.empty()) text += "\nkind=" + kind + "\n";
    auto cfg = parse_config_text(text, config_path.empty() ? "<flags>" : config_path, TrainConfig{});
    if (!sets_key(text, "threads")) cfg.threads = default_threads();
    for (const auto& s : settings) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw std::invalid_argument("expected KEY=VALUE, got '" + s + "'");
      apply_setting(cfg, s.substr(0, eq), s.substr(eq + 1));
    }
    if (dim) cfg.dim = *dim;
    if (epochs) cfg.max_epochs = *epochs;
    if (batch_size) cfg.batch_size = *batch_size;
    if (threads) cfg.threads = *threads;
    if (learning_rate) cfg.learning_rate = *learning_rate;
    if (seed) cfg.seed = *seed;
    if (deterministic) cfg.deterministic = true;
    validate(cfg);
    return cfg;
  }

  int do_preprocess(const CLI::App& sub) {
    const auto corpora = read_corpora(parse_language_inputs(inputs));
    const auto kb = kb_path.empty() ? std::vector<Triple>{} : read_kb(kb_path);
    const auto result = preprocess(corpora, kb, pre);
    std::filesystem::create_directories(out_path);
    const std::filesystem::path dir(out_path);
    write_triple_store(result.filtered.store, (dir / "triples.tsv").string());
    for (const auto& [lang, vocab] : result.vocabularies) write_vocabulary(vocab, (dir / ("vocab." + lang + ".tsv")).string());
    write_snapshot(sub, snapshot_path(out_path, true));
    const auto& f = result.filtered;
    out << "triples\t" << f.store.size() << "\npairs\t" << f.store.pairs.size() << "\nrelations\t"
        << f.store.relations.size() << "\npairs_below_count\t" << f.pairs_below_count << "\npairs_outside_component\t"
        << f.pairs_outside_component << "\ncomponent_entities\t" << f.component_entities << '\n';
    if (f.too_sparse) err << "warning: corpus too sparse, no triples survived filtering\n";
    return 0;
  }

  template <class T>
  int train_as(const CLI::App& sub, const TrainConfig& cfg) {
    const auto store = read_triple_store(triples_path);
    TrainOptions<T> opts;
    opts.out_dir = out_path;
    opts.log = &err;
    if (!dictionary_path.empty()) opts.dictionary = read_dictionary(dictionary_path);
    std::optional<Model<T>> init;
    if (!init_from.empty()) {
      if (checkpoint_dtype(init_from) != dtype_name<T>())
        throw std::invalid_argument("--init-from checkpoint precision differs from --precision");
      init = read_checkpoint<T>(init_from);
      opts.init_from = &*init;
    }
    std::vector<Triple> dev;
    GoldSet gold;
    const auto types = read_types(signatures, entity_types);
    if (!dev_inputs.empty()) {
      if (dev_gold.empty()) throw std::invalid_argument("--dev needs --dev-gold");
      dev = text_triples(read_corpora(parse_language_inputs(dev_inputs)), max_len);
      gold = read_gold(dev_gold);
      opts.evaluate_epoch = [&](const Model<T>& m, std::size_t) -> std::optional<double> {
        const auto thresholds = tune_on_dev(m, dev, gold, types);
        return score_predictions(predict(dev, m, thresholds, types), gold, MatchMode::anydoc).f1;
      };
    }
    std::filesystem::create_directories(out_path);
    {
      auto resolved = open_output((std::filesystem::path(out_path) / "resolved_config.txt").string());
      resolved << to_text(cfg);
    }
    write_snapshot(sub, snapshot_path(out_path, true));
    auto result = train<T>(store, cfg, opts);
    for (const auto& line : result.report) err << "note: " << line << '\n';
    const auto best = (std::filesystem::path(out_path) / ("model." + to_string(cfg.kind) + ".best.ckpt")).string();
    write_checkpoint(result.model, best);
    out << "best_epoch\t" << result.best_epoch << "\ncheckpoint\t" << best << '\n';
    return 0;
  }

  int do_train(const CLI::App& sub) {
    const auto cfg = resolve_train_config();
    if (precision == "f64") return train_as<double>(sub, cfg);
    return train_as<float>(sub, cfg);
  }

  int do_tune(const CLI::App& sub) {
    const auto dev = text_triples(read_corpora(parse_language_inputs(sentence_inputs)), max_len);
    const auto gold = read_gold(gold_path);
    const auto types = read_types(signatures, entity_types);
    const auto table = with_checkpoint(model_path, [&](const auto& model) { return tune_on_dev(model, dev, gold, types); });
    write_thresholds(table, out_path);
    write_snapshot(sub, snapshot_path(out_path, false));
    return 0;
  }

  int do_predict(const CLI::App& sub) {
    const auto corpora = read_corpora(parse_language_inputs(sentence_inputs));
    const auto test = text_triples(corpora, max_len);
    const auto table = read_thresholds(thresholds_path);
    const auto types = read_types(signatures, entity_types);
    auto preds = with_checkpoint(model_path, [&](const auto& model) {
      return predict(test, model, table, types, source.empty() ? to_string(model.config.kind) : source);
    });
    if (!aliases.empty()) {
      const auto alias_table = read_alias_table(aliases);
      std::vector<Sentence> all;
      for (const auto& c : corpora) all.insert(all.end(), c.sentences.begin(), c.sentences.end());
      const auto index = DocumentIndex::build(all);
      std::vector<Prediction> alt;
      for (const auto& [entity, _] : alias_table)
        for (auto& p : alternate_names(entity, alias_table, index, alias_floor, alias_relation)) alt.push_back(std::move(p));
      preds = ensemble_union({preds, alt});
    }
    canonicalize(preds);
    write_predictions(preds, out_path);
    write_snapshot(sub, snapshot_path(out_path, false));
    return 0;
  }

  int do_ensemble(const CLI::App& sub) {
    std::vector<std::vector<Prediction>> lists;
    for (const auto& p : prediction_paths) lists.push_back(read_predictions(p));
    write_predictions(ensemble_union(lists), out_path);
    write_snapshot(sub, snapshot_path(out_path, false));
    return 0;
  }

  int do_evaluate(const CLI::App& sub) {
    const auto gold = read_gold(gold_path);
    const auto m = parse_match_mode(mode);
    std::vector<NamedPredictions> models;
    for (const auto& spec : prediction_paths) {
      const auto eq = spec.find('=');
      NamedPredictions np;
      np.name = eq == std::string::npos ? std::filesystem::path(spec).stem().string() : spec.substr(0, eq);
      np.predictions = read_predictions(eq == std::string::npos ? spec : spec.substr(eq + 1));
      models.push_back(std::move(np));
    }
    std::ostringstream report;
    for (const auto& np : models) {
      report << "# " << np.name << '\n';
      write_report(score_predictions(np.predictions, gold, m, recall_denominator), report);
    }
    if (!curve_path.empty()) {
      auto c = open_output(curve_path);
      write_curve(pr_curve(models.front().predictions, gold, m, recall_denominator), c);
    }
    if (!length_path.empty()) {
      if (sentence_inputs.empty()) throw std::invalid_argument("--by-length needs --sentences");
      const auto corpora = read_corpora(parse_language_inputs(sentence_inputs));
      for (auto& np : models) attach_pattern_lengths(np.predictions, corpora);
      auto c = open_output(length_path);
      write_length_table(f1_by_pattern_length(models, gold, m, parse_bins(bins)), models, c);
    }
    if (out_path.empty()) {
      out << report.str();
    } else {
      auto o = open_output(out_path);
      o << report.str();
      write_snapshot(sub, snapshot_path(out_path, false));
    }
    return 0;
  }

  int do_nn(const CLI::App&) {
    return with_checkpoint(model_path, [&](const auto& model) {
      using T = typename std::decay_t<decltype(model)>::value_type;
      std::vector<Neighbor> result;
      if (!word.empty()) {
        result = nearest_words(model, normalize_digits(word), language, k, filter_language);
      } else {
        std::vector<std::string> toks;
        for (auto& t : split_ws(pattern)) toks.push_back(normalize_digits(t));
        Triple q = make_text_triple("", toks, "", inverse, language, {"", 0});
        if (relations) {
          result = rank_relations<T>(model, model.represent(q));
          if (result.size() > k) result.resize(k);
          if (result.empty()) throw std::invalid_argument("query pattern is not representable");
        } else {
          auto candidates = text_triples(read_corpora(parse_language_inputs(sentence_inputs)), max_len);
          if (!filter_language.empty())
            std::erase_if(candidates, [&](const Triple& t) { return t.language != filter_language; });
          result = nearest_patterns(model, q, candidates, k);
        }
      }
      for (const auto& n : result) out << n.item << '\t' << format_fixed(n.cosine, 6) << '\n';
      return 0;
    });
  }

  int do_gradcheck(const CLI::App&) {
    gc.kind = parse_model_kind(gc_kind);
    const auto r = run_gradcheck(gc);
    for (const auto& [name, e] : r.block_max) out << name << '\t' << format_exact(e) << '\n';
    out << "max_relative_error\t" << format_exact(r.max_relative_error) << "\nworst\t" << r.worst_block << '['
        << r.worst_index << "]\ncoordinates\t" << r.coordinates << "\nstatus\t" << (r.passed ? "PASS" : "FAIL") << '\n';
    return r.passed ? 0 : 1;
  }

  int do_synth(const CLI::App& sub) {
    const auto corpus = generate_synthetic(synth);
    for (const auto& w : corpus.warnings) err << "warning: " << w << '\n';
    std::filesystem::create_directories(out_path);
    write_synthetic(corpus, out_path);
    write_snapshot(sub, snapshot_path(out_path, true));
    return 0;
  }
};

inline std::string one_line(std::string s) {
  for (auto& c : s)
    if (c == '\n' || c == '\r') c = ' ';
  return s;
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  Runner r(out, err);
  CLI::App app{"Universal schema relation extraction toolkit", "uschema"};
  app.require_subcommand(1);

  auto* pre = app.add_subcommand("preprocess", "Extract, normalize and filter training triples");
  pre->add_option("--input", r.inputs, "LANG=PATH sentence file (repeatable)")->required();
  pre->add_option("--kb", r.kb_path, "KB facts TSV");
  pre->add_option("--out", r.out_path, "Output directory")->required();
  pre->add_option("--max-pattern-length", r.pre.max_pattern_length)->capture_default_str();
  pre->add_option("--min-token-count", r.pre.min_token_count)->capture_default_str();
  pre->add_option("--min-pair-count", r.pre.min_pair_count)->capture_default_str();

  auto* tr = app.add_subcommand("train", "Train a model on a triple store");
  tr->add_option("--triples", r.triples_path, "Triple store from preprocess")->required();
  tr->add_option("--out", r.out_path, "Output directory")->required();
  tr->add_option("--config", r.config_path, "key=value config file");
  tr->add_option("--set", r.settings, "KEY=VALUE override (repeatable)");
  tr->add_option("--kind", r.kind, "uschema|cnn|lstm");
  tr->add_option("--dim", r.dim);
  tr->add_option("--epochs", r.epochs);
  tr->add_option("--batch-size", r.batch_size);
  tr->add_option("--learning-rate", r.learning_rate);
  tr->add_option("--seed", r.seed);
  tr->add_option("--threads", r.threads, std::string("Worker threads (default $") + kThreadsEnv + ")");
  tr->add_flag("--deterministic", r.deterministic, "Fixed-order gradient reduction");
  tr->add_option("--precision", r.precision)->check(CLI::IsMember({"f32", "f64"}))->capture_default_str();
  tr->add_option("--dictionary", r.dictionary_path, "word_a TAB word_b pairs to tie");
  tr->add_option("--init-from", r.init_from, "USchema checkpoint for pair embeddings");
  tr->add_option("--dev", r.dev_inputs, "LANG=PATH dev sentences for epoch selection");
  tr->add_option("--dev-gold", r.dev_gold);
  tr->add_option("--max-pattern-length", r.max_len)->capture_default_str();
  tr->add_option("--signatures", r.signatures);
  tr->add_option("--entity-types", r.entity_types);

  auto* tune = app.add_subcommand("tune-thresholds", "Tune per-relation thresholds on dev data");
  tune->add_option("--model", r.model_path)->required();
  tune->add_option("--sentences", r.sentence_inputs, "LANG=PATH")->required();
  tune->add_option("--gold", r.gold_path)->required();
  tune->add_option("--out", r.out_path)->required();
  tune->add_option("--signatures", r.signatures);
  tune->add_option("--entity-types", r.entity_types);
  tune->add_option("--max-pattern-length", r.max_len)->capture_default_str();

  auto* pr = app.add_subcommand("predict", "Emit slot-filling predictions");
  pr->add_option("--model", r.model_path)->required();
  pr->add_option("--sentences", r.sentence_inputs, "LANG=PATH")->required();
  pr->add_option("--thresholds", r.thresholds_path)->required();
  pr->add_option("--out", r.out_path)->required();
  pr->add_option("--signatures", r.signatures);
  pr->add_option("--entity-types", r.entity_types);
  pr->add_option("--aliases", r.aliases, "entity TAB alias TAB probability");
  pr->add_option("--alias-floor", r.alias_floor)->capture_default_str();
  pr->add_option("--alias-relation", r.alias_relation)->capture_default_str();
  pr->add_option("--source", r.source, "Source tag (default: model kind)");
  pr->add_option("--max-pattern-length", r.max_len)->capture_default_str();

  auto* ens = app.add_subcommand("ensemble", "Union of prediction files");
  ens->add_option("--inputs", r.prediction_paths)->required()->expected(1, -1);
  ens->add_option("--out", r.out_path)->required();

  auto* ev = app.add_subcommand("evaluate", "Score predictions against gold");
  ev->add_option("--predictions", r.prediction_paths, "[NAME=]PATH (repeatable)")->required();
  ev->add_option("--gold", r.gold_path)->required();
  ev->add_option("--mode", r.mode)->check(CLI::IsMember({"anydoc", "strict"}))->capture_default_str();
  ev->add_option("--recall-denominator", r.recall_denominator);
  ev->add_option("--curve", r.curve_path, "PR curve TSV for the first predictions file");
  ev->add_option("--by-length", r.length_path, "F1 by pattern length TSV");
  ev->add_option("--sentences", r.sentence_inputs, "LANG=PATH sentences holding the provenance");
  ev->add_option("--bins", r.bins)->capture_default_str();
  ev->add_option("--out", r.out_path, "Report path (default stdout)");

  auto* nn = app.add_subcommand("nn", "Nearest neighbors of a word or pattern");
  nn->add_option("--model", r.model_path)->required();
  auto* w = nn->add_option("--word", r.word);
  auto* p = nn->add_option("--pattern", r.pattern, "Space-separated pattern tokens");
  w->excludes(p);
  nn->add_option("--language", r.language)->required();
  nn->add_option("--k", r.k)->capture_default_str();
  nn->add_option("--filter-language", r.filter_language);
  nn->add_option("--sentences", r.sentence_inputs, "LANG=PATH candidate patterns");
  nn->add_flag("--relations", r.relations, "Rank schema relations for the pattern");
  nn->add_flag("--inverse", r.inverse, "Query pattern has inverse direction");
  nn->add_option("--max-pattern-length", r.max_len)->capture_default_str();

  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check on the toy model");
  gc->add_option("--kind", r.gc_kind)->check(CLI::IsMember({"uschema", "cnn", "lstm"}))->capture_default_str();
  gc->add_option("--dim", r.gc.dim)->capture_default_str();
  gc->add_option("--seed", r.gc.seed)->capture_default_str();
  gc->add_option("--epsilon", r.gc.epsilon)->capture_default_str();
  gc->add_option("--tolerance", r.gc.tolerance)->capture_default_str();

  auto* sy = app.add_subcommand("synth", "Generate a synthetic bilingual corpus");
  sy->add_option("--out", r.out_path)->required();
  sy->add_option("--seed", r.synth.seed)->capture_default_str();
  sy->add_option("--relations", r.synth.relations)->capture_default_str();
  sy->add_option("--rank", r.synth.rank)->capture_default_str();
  sy->add_option("--kb-pairs", r.synth.kb_pairs)->capture_default_str();
  sy->add_option("--text-pairs", r.synth.text_pairs)->capture_default_str();
  sy->add_option("--b-pairs", r.synth.b_pairs)->capture_default_str();
  sy->add_option("--overlap", r.synth.overlap)->capture_default_str();
  sy->add_option("--tie-fraction", r.synth.tie_fraction)->capture_default_str();
  sy->add_option("--sentences-per-pair", r.synth.sentences_per_pair)->capture_default_str();
  sy->add_option("--dev-pairs", r.synth.dev_pairs)->capture_default_str();
  sy->add_option("--test-pairs", r.synth.test_pairs)->capture_default_str();
  sy->add_option("--min-length", r.synth.min_length)->capture_default_str();
  sy->add_option("--max-length", r.synth.max_length)->capture_default_str();
  sy->add_option("--test-min-length", r.synth.test_min_length)->capture_default_str();
  sy->add_option("--test-max-length", r.synth.test_max_length)->capture_default_str();
  sy->add_option("--language-a", r.synth.language_a)->capture_default_str();
  sy->add_option("--language-b", r.synth.language_b)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << one_line(e.what()) << '\n' << app.help();
    return 2;
  }

  try {
    if (*pre) return r.do_preprocess(*pre);
    if (*tr) return r.do_train(*tr);
    if (*tune) return r.do_tune(*tune);
    if (*pr) return r.do_predict(*pr);
    if (*ens) return r.do_ensemble(*ens);
    if (*ev) return r.do_evaluate(*ev);
    if (*nn) {
      if (r.word.empty() && r.pattern.empty()) throw std::invalid_argument("nn needs --word or --pattern");
      return r.do_nn(*nn);
    }
    if (*gc) return r.do_gradcheck(*gc);
    if (*sy) return r.do_synth(*sy);
  } catch (const ParseError& e) {
    err << "error\tparse\t" << e.path() << '\t' << e.line() << '\t' << one_line(e.reason()) << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error\truntime\t" << one_line(e.what()) << '\n';
    return 1;
  }
  return 2;
}

}  // namespace uschema::cli
