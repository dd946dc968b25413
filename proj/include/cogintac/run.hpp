#pragma once

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cogintac/abduction.hpp"
#include "cogintac/emotion.hpp"
#include "cogintac/generation.hpp"

namespace cogintac {

enum class Task { abduction, emotion, generation };

inline std::string_view to_string(Task t) {
  switch (t) {
    case Task::abduction: return "abduction";
    case Task::emotion: return "emotion";
    default: return "generation";
  }
}

inline Task parse_task(std::string_view s) {
  if (s == "abduction") return Task::abduction;
  if (s == "emotion") return Task::emotion;
  if (s == "generation") return Task::generation;
  throw ConfigError("unknown task '" + std::string(s) + "' (abduction, emotion, generation)");
}

struct AblationFlags {
  bool intdic = true;
  bool fusion = true;
  bool multitask = true;
  bool full_conditioning = true;
  bool operator==(const AblationFlags&) const = default;
};

/// Table I row label for a flag combination.
inline std::string ablation_label(const AblationFlags& f) {
  if (f.intdic && f.fusion && f.multitask) return "+All";
  std::string s;
  if (f.intdic) s += "+IntDic";
  if (f.fusion) s += "+Fusion Mechanism";
  if (f.multitask) s += "+Multi-task";
  return s.empty() ? "Baseline" : s;
}

/// Abduction only depends on the dictionary flag.
inline std::string ablation_label(Task task, const AblationFlags& f) {
  if (task == Task::abduction) return f.intdic ? "+IntDic" : "Baseline";
  if (task == Task::generation) return f.full_conditioning ? "full" : "context_only";
  return ablation_label(f);
}

/// The five Table I rows in order.
inline std::vector<AblationFlags> table_one_rows() {
  return {{false, false, false, true}, {true, false, false, true}, {false, true, false, true},
          {false, false, true, true}, {true, true, true, true}};
}

struct HyperGrid {
  std::vector<double> learning_rates = {0.01, 0.04, 0.1, 0.4};
  std::vector<std::size_t> batch_sizes = {16, 32};
  std::vector<std::size_t> epochs = {3, 20};
};

/// `points` values spaced evenly in log between lo and hi inclusive.
inline std::vector<double> log_spaced(double lo, double hi, std::size_t points) {
  if (!(lo > 0) || !(hi >= lo) || points < 1) throw ConfigError("invalid learning-rate range");
  if (points == 1) return {lo};
  std::vector<double> out;
  for (std::size_t i = 0; i < points; ++i)
    out.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / static_cast<double>(points - 1)));
  return out;
}

struct GridPoint {
  double learning_rate;
  std::size_t batch_size;
  std::size_t epochs;
};

/// Grid points in deterministic order: learning rate, then batch size, then
/// epochs.
inline std::vector<GridPoint> expand(const HyperGrid& g) {
  std::vector<GridPoint> out;
  for (double lr : g.learning_rates)
    for (auto b : g.batch_sizes)
      for (auto e : g.epochs) out.push_back({lr, b, e});
  return out;
}

struct RunConfig {
  Task task = Task::abduction;
  std::string corpus;  // single file split 80/10/10 by seed
  std::string train, val, test;
  std::string out = "run";
  std::uint64_t seed = 7;
  /// "recurrent", "recurrent+attention" or a registered plug-in name.
  std::string encoder = "recurrent";
  Index embedding_dim = 300;
  Index hidden = 128;
  Index layers = 2;
  std::string pretrained_embeddings;
  HyperGrid grid;
  AblationFlags ablation;
  DictConfig dictionary;
  double lambda_emotion = 1.0;
  double lambda_satisfaction = 1.0;
  std::string generator = "tiny-char";
  json generator_options = json::object();
  DecodeConfig decode;
  bool predicted_emotion = false;

  void validate() const {
    if (corpus.empty() && (train.empty() || val.empty() || test.empty()))
      throw ConfigError("config needs either 'corpus' or all of 'train', 'val', 'test'");
    if (grid.learning_rates.empty() || grid.batch_sizes.empty() || grid.epochs.empty())
      throw ConfigError("hyperparameter grid has an empty axis");
    for (double lr : grid.learning_rates)
      if (!(lr > 0)) throw ConfigError("learning rates must be positive");
    for (auto b : grid.batch_sizes)
      if (b < 1) throw ConfigError("batch sizes must be >= 1");
    for (auto e : grid.epochs)
      if (e < 1) throw ConfigError("epochs must be >= 1");
    if (out.empty()) throw ConfigError("output directory is empty");
    if (decode.max_length < 1) throw ConfigError("max_length must be >= 1");
    dictionary.validate();
    encoder_config().validate();
  }

  EncoderConfig encoder_config() const {
    EncoderConfig c;
    c.embedding_dim = embedding_dim;
    c.hidden = hidden;
    c.layers = layers;
    c.attention = encoder == "recurrent+attention";
    return c;
  }
  bool uses_plugin() const { return encoder != "recurrent" && encoder != "recurrent+attention"; }
};

inline std::string_view to_string(DecodeStrategy s) {
  switch (s) {
    case DecodeStrategy::beam: return "beam";
    case DecodeStrategy::sample: return "sample";
    default: return "greedy";
  }
}

inline DecodeStrategy parse_strategy(std::string_view s) {
  if (s == "greedy") return DecodeStrategy::greedy;
  if (s == "beam") return DecodeStrategy::beam;
  if (s == "sample") return DecodeStrategy::sample;
  throw ConfigError("unknown decoding strategy '" + std::string(s) + "'");
}

inline json to_json(const RunConfig& c) {
  return json{{"task", to_string(c.task)},
              {"corpus", c.corpus},
              {"train", c.train},
              {"val", c.val},
              {"test", c.test},
              {"out", c.out},
              {"seed", c.seed},
              {"encoder", {{"kind", c.encoder},
                           {"embedding_dim", c.embedding_dim},
                           {"hidden", c.hidden},
                           {"layers", c.layers},
                           {"pretrained_embeddings", c.pretrained_embeddings}}},
              {"grid", {{"learning_rates", c.grid.learning_rates},
                        {"batch_sizes", c.grid.batch_sizes},
                        {"epochs", c.grid.epochs}}},
              {"ablation", {{"intdic", c.ablation.intdic},
                            {"fusion", c.ablation.fusion},
                            {"multitask", c.ablation.multitask},
                            {"full_conditioning", c.ablation.full_conditioning}}},
              {"dictionary", {{"min_count", c.dictionary.min_count},
                              {"max_entries", c.dictionary.max_entries},
                              {"smoothing_mass", c.dictionary.smoothing_mass},
                              {"max_ngram", c.dictionary.max_ngram}}},
              {"loss", {{"lambda_emotion", c.lambda_emotion}, {"lambda_satisfaction", c.lambda_satisfaction}}},
              {"generator", {{"name", c.generator},
                             {"options", c.generator_options},
                             {"decode", {{"max_length", c.decode.max_length},
                                         {"strategy", to_string(c.decode.strategy)},
                                         {"beam_width", c.decode.beam_width},
                                         {"temperature", c.decode.temperature}}}}},
              {"predicted_emotion", c.predicted_emotion}};
}

namespace detail {

inline void check_keys(const json& j, std::initializer_list<std::string_view> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (auto a : allowed) ok |= it.key() == a;
    if (!ok) throw ConfigError("unknown key '" + it.key() + "' in " + where);
  }
}

}  // namespace detail

inline RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  try {
    detail::check_keys(j, {"task", "corpus", "train", "val", "test", "out", "seed", "encoder", "grid",
                           "ablation", "dictionary", "loss", "generator", "predicted_emotion"},
                       "run config");
    if (j.contains("task")) c.task = parse_task(j.at("task").get<std::string>());
    c.corpus = j.value("corpus", c.corpus);
    c.train = j.value("train", c.train);
    c.val = j.value("val", c.val);
    c.test = j.value("test", c.test);
    c.out = j.value("out", c.out);
    c.seed = j.value("seed", c.seed);
    c.predicted_emotion = j.value("predicted_emotion", c.predicted_emotion);
    if (j.contains("encoder")) {
      const auto& e = j.at("encoder");
      detail::check_keys(e, {"kind", "embedding_dim", "hidden", "layers", "pretrained_embeddings"}, "encoder");
      c.encoder = e.value("kind", c.encoder);
      c.embedding_dim = e.value("embedding_dim", c.embedding_dim);
      c.hidden = e.value("hidden", c.hidden);
      c.layers = e.value("layers", c.layers);
      c.pretrained_embeddings = e.value("pretrained_embeddings", c.pretrained_embeddings);
    }
    if (j.contains("grid")) {
      const auto& g = j.at("grid");
      detail::check_keys(g, {"learning_rates", "learning_rate_range", "batch_sizes", "epochs"}, "grid");
      if (g.contains("learning_rates") && g.contains("learning_rate_range"))
        throw ConfigError("grid takes 'learning_rates' or 'learning_rate_range', not both");
      c.grid.learning_rates = g.value("learning_rates", c.grid.learning_rates);
      if (g.contains("learning_rate_range")) {
        const auto& lr = g.at("learning_rate_range");
        detail::check_keys(lr, {"min", "max", "points"}, "learning_rate_range");
        c.grid.learning_rates = log_spaced(lr.at("min").get<double>(), lr.at("max").get<double>(),
                                           lr.value("points", std::size_t{4}));
      }
      c.grid.batch_sizes = g.value("batch_sizes", c.grid.batch_sizes);
      c.grid.epochs = g.value("epochs", c.grid.epochs);
    }
    if (j.contains("ablation")) {
      const auto& a = j.at("ablation");
      detail::check_keys(a, {"intdic", "fusion", "multitask", "full_conditioning"}, "ablation");
      c.ablation.intdic = a.value("intdic", true);
      c.ablation.fusion = a.value("fusion", true);
      c.ablation.multitask = a.value("multitask", true);
      c.ablation.full_conditioning = a.value("full_conditioning", true);
    }
    if (j.contains("dictionary")) {
      const auto& d = j.at("dictionary");
      detail::check_keys(d, {"min_count", "max_entries", "smoothing_mass", "max_ngram"}, "dictionary");
      c.dictionary.min_count = d.value("min_count", c.dictionary.min_count);
      c.dictionary.max_entries = d.value("max_entries", c.dictionary.max_entries);
      c.dictionary.smoothing_mass = d.value("smoothing_mass", c.dictionary.smoothing_mass);
      c.dictionary.max_ngram = d.value("max_ngram", c.dictionary.max_ngram);
    }
    if (j.contains("loss")) {
      const auto& l = j.at("loss");
      detail::check_keys(l, {"lambda_emotion", "lambda_satisfaction"}, "loss");
      c.lambda_emotion = l.value("lambda_emotion", c.lambda_emotion);
      c.lambda_satisfaction = l.value("lambda_satisfaction", c.lambda_satisfaction);
    }
    if (j.contains("generator")) {
      const auto& g = j.at("generator");
      detail::check_keys(g, {"name", "options", "decode"}, "generator");
      c.generator = g.value("name", c.generator);
      c.generator_options = g.value("options", json::object());
      if (g.contains("decode")) {
        const auto& d = g.at("decode");
        detail::check_keys(d, {"max_length", "strategy", "beam_width", "temperature"}, "decode");
        c.decode.max_length = d.value("max_length", c.decode.max_length);
        c.decode.strategy = parse_strategy(d.value("strategy", std::string("greedy")));
        c.decode.beam_width = d.value("beam_width", c.decode.beam_width);
        c.decode.temperature = d.value("temperature", c.decode.temperature);
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed run config: ") + e.what());
  }
  return c;
}

// ---------------------------------------------------------------------------
// Data

inline Corpus read_corpus_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open corpus file '" + path + "'");
  return load_corpus(in);
}

struct RunData {
  Corpus train, val, test;
  IntentionDictionary dict;
  Vocabulary vocab;
  json fingerprints;
};

inline RunData prepare_data(const RunConfig& cfg) {
  RunData d;
  if (!cfg.corpus.empty()) {
    const auto all = read_corpus_file(cfg.corpus);
    auto s = split_corpus(all, cfg.seed);
    d.train = std::move(s.train);
    d.val = std::move(s.val);
    d.test = std::move(s.test);
  } else {
    d.train = read_corpus_file(cfg.train);
    d.val = read_corpus_file(cfg.val);
    d.test = read_corpus_file(cfg.test);
  }
  if (d.train.empty() || d.val.empty() || d.test.empty())
    throw DataError("train, validation and test sets must all be non-empty");
  d.dict = build_dictionary(d.train, cfg.dictionary);
  d.vocab = build_vocab(d.train);
  d.fingerprints = {{"train", corpus_fingerprint(d.train)},
                    {"val", corpus_fingerprint(d.val)},
                    {"test", corpus_fingerprint(d.test)},
                    {"dictionary", d.dict.fingerprint()}};
  return d;
}

/// Plug-in model cache directory, if configured.
inline std::optional<std::filesystem::path> plugin_cache_dir() {
  if (const char* v = std::getenv("COGINTAC_PLUGIN_CACHE"); v && *v) return std::filesystem::path(v);
  return std::nullopt;
}

inline std::string cache_string() {
  const auto d = plugin_cache_dir();
  return d ? d->string() : std::string();
}

inline void load_embeddings_if_configured(const RunConfig& cfg, const Vocabulary& vocab, nn::ParameterSet& params,
                                          const std::string& table) {
  if (cfg.pretrained_embeddings.empty() || cfg.uses_plugin()) return;
  std::filesystem::path p(cfg.pretrained_embeddings);
  if (p.is_relative())
    if (auto dir = plugin_cache_dir()) p = *dir / p;
  std::ifstream in(p);
  if (!in) throw InputError("cannot open pretrained embeddings '" + p.string() + "'");
  load_pretrained_embeddings(in, vocab, params.get(table));
}

// ---------------------------------------------------------------------------
// Runs

/// Everything a run produces; files are written by write_run.
struct RunResult {
  json manifest;
  std::map<std::string, std::string> artifacts;  // relative path -> contents
  eval::ReportTable report;
  json test_metrics;
};

namespace detail {

inline std::string jsonl(const std::vector<json>& rows) {
  std::string s;
  for (const auto& r : rows) s += r.dump() + "\n";
  return s;
}

inline json point_json(const GridPoint& p) {
  return {{"learning_rate", p.learning_rate}, {"batch_size", p.batch_size}, {"epochs", p.epochs}};
}

inline TrainConfig train_config(const RunConfig& cfg, const GridPoint& p) {
  return {.epochs = p.epochs, .batch_size = p.batch_size, .learning_rate = p.learning_rate, .seed = cfg.seed};
}

inline AbductionModel make_abduction(const RunConfig& cfg, const RunData& d) {
  AbductionConfig ac;
  ac.encoder = cfg.encoder_config();
  ac.use_intdic = cfg.ablation.intdic;
  ac.seed = cfg.seed;
  if (cfg.uses_plugin()) return AbductionModel::create(ac, EncoderRegistry::instance().create(cfg.encoder, cache_string()));
  auto m = AbductionModel::create(ac, d.vocab);
  load_embeddings_if_configured(cfg, d.vocab, m.params(), "abduction.encoder.embedding");
  return m;
}

inline EmotionModel make_emotion(const RunConfig& cfg, const RunData& d) {
  EmotionConfig ec;
  ec.encoder = cfg.encoder_config();
  ec.use_intdic = cfg.ablation.intdic;
  ec.use_fusion = cfg.ablation.fusion;
  ec.lambda_emotion = cfg.lambda_emotion;
  ec.lambda_satisfaction = cfg.ablation.multitask ? cfg.lambda_satisfaction : 0.0;
  ec.seed = cfg.seed;
  if (cfg.uses_plugin()) return EmotionModel::create(ec, EncoderRegistry::instance().create(cfg.encoder, cache_string()));
  auto m = EmotionModel::create(ec, d.vocab);
  load_embeddings_if_configured(cfg, d.vocab, m.params(), "emotion.encoder.embedding");
  return m;
}

/// Trains one model per grid point via `train_point`, which returns the best
/// validation metric and the winner's checkpoint. Failed points are recorded.
struct GridOutcome {
  json points = json::array();
  std::optional<std::size_t> best;
  json best_checkpoint;
  double best_metric = 0;
  json best_history;
};

template <typename TrainPoint>
GridOutcome search(const RunConfig& cfg, bool higher_is_better, TrainPoint&& train_point) {
  GridOutcome g;
  const auto points = expand(cfg.grid);
  for (std::size_t i = 0; i < points.size(); ++i) {
    json rec = point_json(points[i]);
    try {
      auto [history, checkpoint] = train_point(points[i]);
      rec["status"] = "ok";
      rec["val_metric"] = history.best_metric;
      rec["best_epoch"] = history.best_epoch ? json(*history.best_epoch) : json(nullptr);
      const bool better = !g.best || (higher_is_better ? history.best_metric > g.best_metric
                                                       : history.best_metric < g.best_metric);
      if (better) {
        g.best = i;
        g.best_metric = history.best_metric;
        g.best_checkpoint = std::move(checkpoint);
        g.best_history = to_json(history);
      }
    } catch (const TrainingError& e) {
      rec["status"] = "failed";
      rec["error"] = e.what();
    }
    g.points.push_back(std::move(rec));
  }
  if (!g.best) throw TrainingError("all " + std::to_string(points.size()) + " grid points failed");
  return g;
}

inline json classification_json(const eval::ClassificationResult& r) { return eval::to_json(r); }

}  // namespace detail

inline RunResult run_abduction(const RunConfig& cfg, const RunData& d) {
  RunResult r;
  auto g = detail::search(cfg, true, [&](const GridPoint& p) {
    auto m = detail::make_abduction(cfg, d);
    auto h = train_abduction(m, d.train, d.val, &d.dict, detail::train_config(cfg, p));
    return std::pair{std::move(h), checkpoint_json(m)};
  });
  const auto model = abduction_from_checkpoint(g.best_checkpoint);
  const auto ev = evaluate_abduction(model, d.test, &d.dict);
  std::vector<json> preds;
  for (std::size_t i = 0; i < d.test.size(); ++i) preds.push_back(prediction_record(d.test[i].id, ev.predictions[i]));
  r.artifacts["model.json"] = g.best_checkpoint.dump();
  r.artifacts["predictions.jsonl"] = detail::jsonl(preds);
  r.test_metrics = {{"intention", detail::classification_json(ev.metrics)}};
  r.report = {"Intention abduction (test)",
              {{"intention_p", "0-1"}, {"intention_r", "0-1"}, {"intention_f1", "0-1"}},
              {}};
  r.report.add_row(ablation_label(cfg.task, cfg.ablation), {{"intention_p", ev.metrics.macro_precision},
                                                  {"intention_r", ev.metrics.macro_recall},
                                                  {"intention_f1", ev.metrics.macro_f1}});
  r.manifest["grid"] = g.points;
  r.manifest["best"] = {{"point", g.points[*g.best]}, {"val_macro_f1", g.best_metric}, {"history", g.best_history}};
  return r;
}

inline RunResult run_emotion(const RunConfig& cfg, const RunData& d) {
  RunResult r;
  auto g = detail::search(cfg, true, [&](const GridPoint& p) {
    auto m = detail::make_emotion(cfg, d);
    auto h = train_emotion(m, d.train, d.val, &d.dict, detail::train_config(cfg, p));
    return std::pair{std::move(h), checkpoint_json(m)};
  });
  const auto model = emotion_from_checkpoint(g.best_checkpoint);
  const auto ev = evaluate_emotion(model, d.test, &d.dict);
  std::vector<json> preds;
  for (std::size_t i = 0; i < d.test.size(); ++i) preds.push_back(prediction_record(d.test[i].id, ev.predictions[i]));
  r.artifacts["model.json"] = g.best_checkpoint.dump();
  r.artifacts["predictions.jsonl"] = detail::jsonl(preds);
  r.test_metrics = {{"emotion", detail::classification_json(ev.emotion)},
                    {"satisfaction", detail::classification_json(ev.satisfaction)},
                    {"consistency", ev.consistency}};
  r.report = {"Emotion prediction (test)",
              {{"emotion_f1", "0-1"}, {"satisfaction_f1", "0-1"}, {"consistency", "0-1"}},
              {}};
  std::map<std::string, double> row{{"emotion_f1", ev.emotion.macro_f1}, {"consistency", ev.consistency}};
  if (cfg.ablation.multitask) row["satisfaction_f1"] = ev.satisfaction.macro_f1;
  r.report.add_row(ablation_label(cfg.ablation), row);
  r.manifest["grid"] = g.points;
  r.manifest["best"] = {{"point", g.points[*g.best]}, {"val_emotion_macro_f1", g.best_metric},
                        {"history", g.best_history}};
  return r;
}

inline RunResult run_generation(const RunConfig& cfg, const RunData& d) {
  RunResult r;
  const auto first = expand(cfg.grid).front();
  auto& registry = GeneratorRegistry::instance();
  auto probe = registry.create(cfg.generator, cfg.generator_options);
  const bool trainable = dynamic_cast<TrainableGenerator*>(probe.get()) != nullptr;

  // Upstream emotion model and listener-intention map, trained at the first
  // grid point.
  std::optional<EmotionModel> emotion;
  std::optional<IntentionInference> inference;
  json upstream = json::object();
  if (cfg.ablation.full_conditioning || cfg.predicted_emotion) {
    emotion.emplace(detail::make_emotion(cfg, d));
    const auto he = train_emotion(*emotion, d.train, d.val, &d.dict, detail::train_config(cfg, first));
    r.artifacts["emotion_model.json"] = checkpoint_json(*emotion).dump();
    upstream["emotion"] = {{"point", detail::point_json(first)}, {"val_emotion_macro_f1", he.best_metric}};
  }
  if (cfg.ablation.full_conditioning) {
    auto speaker_vectors = [&](const Corpus& c) {
      std::vector<IntentionVector> xs;
      std::vector<Intention> ys;
      for (const auto& p : c) {
        xs.push_back(speaker_intention(*emotion, &d.dict, p.utterance_s));
        ys.push_back(p.intention_r);
      }
      return std::pair{xs, ys};
    };
    const auto [tx, ty] = speaker_vectors(d.train);
    const auto [vx, vy] = speaker_vectors(d.val);
    inference.emplace(IntentionInference::create(emotion->hidden(), cfg.seed));
    const auto hi = train_intention_inference(*inference, tx, ty, vx, vy, detail::train_config(cfg, first));
    r.artifacts["inference.json"] = checkpoint_json(*inference).dump();
    upstream["inference"] = {{"point", detail::point_json(first)}, {"val_accuracy", hi.best_metric}};
  }
  GenerationPipeline pipe;
  pipe.emotion = emotion ? &*emotion : nullptr;
  pipe.inference = inference ? &*inference : nullptr;
  pipe.dict = &d.dict;
  pipe.use_predicted_emotion = cfg.predicted_emotion;

  auto inputs = [&](const Corpus& c, ConditioningMode mode) {
    std::pair<std::vector<GeneratorInput>, std::vector<std::string>> out;
    for (const auto& p : c) {
      out.first.push_back(make_input(pipe, p, mode, cfg.decode));
      out.second.push_back(p.utterance_r);
    }
    return out;
  };
  auto options_for = [&](ConditioningMode mode) {
    json o = cfg.generator_options.is_null() ? json::object() : cfg.generator_options;
    if (cfg.generator == "tiny-char") {
      o["seed"] = cfg.seed;
      o["intention_dim"] = (mode == ConditioningMode::full && inference) ? inference->hidden() : 0;
    }
    return o;
  };

  std::unique_ptr<Generator> full, context;
  json grid = json::array(), best = json::object();
  if (trainable) {
    const auto [ti, tt] = inputs(d.train, ConditioningMode::full);
    const auto [vi, vt] = inputs(d.val, ConditioningMode::full);
    auto g = detail::search(cfg, false, [&](const GridPoint& p) {
      auto gen = registry.create(cfg.generator, options_for(ConditioningMode::full));
      auto h = train_generator_adapter(*gen, ti, tt, vi, vt, detail::train_config(cfg, p));
      return std::pair{std::move(h), generator_checkpoint(*gen)};
    });
    full = generator_from_checkpoint(g.best_checkpoint);
    grid = g.points;
    best = {{"point", g.points[*g.best]}, {"val_token_loss", g.best_metric}, {"history", g.best_history}};
    // Context-only counterpart at the selected hyperparameters.
    const auto& bp = g.points[*g.best];
    const GridPoint win{bp["learning_rate"].get<double>(), bp["batch_size"].get<std::size_t>(),
                        bp["epochs"].get<std::size_t>()};
    const auto [ci, ct] = inputs(d.train, ConditioningMode::context_only);
    const auto [cvi, cvt] = inputs(d.val, ConditioningMode::context_only);
    context = registry.create(cfg.generator, options_for(ConditioningMode::context_only));
    const auto hc = train_generator_adapter(*context, ci, ct, cvi, cvt, detail::train_config(cfg, win));
    best["context_only_val_token_loss"] = hc.best_metric;
  } else {
    full = registry.create(cfg.generator, cfg.generator_options);
    context = registry.create(cfg.generator, cfg.generator_options);
  }
  r.artifacts["generator_full.json"] = generator_checkpoint(*full).dump();
  r.artifacts["generator_context_only.json"] = generator_checkpoint(*context).dump();

  const auto records = generate_paired(*full, *context, pipe, d.test, cfg.decode);
  std::vector<json> rows;
  std::vector<std::string> cand_full, cand_ctx, refs;
  for (std::size_t i = 0; i < records.size(); ++i) {
    rows.push_back(to_json(records[i]));
    (records[i].mode == ConditioningMode::full ? cand_full : cand_ctx).push_back(records[i].response.text);
  }
  for (const auto& p : d.test) refs.push_back(p.utterance_r);
  r.artifacts["generations.jsonl"] = detail::jsonl(rows);
  const auto sf = eval::generation_scores(cand_full, refs);
  const auto sc = eval::generation_scores(cand_ctx, refs);
  r.test_metrics = {{"full", eval::to_json(sf)}, {"context_only", eval::to_json(sc)}};
  r.report = {"Response generation (test)",
              {{"bleu1", "0-1"}, {"bleu2", "0-1"}, {"bleu4", "0-1"},
               {"rouge1", "0-1"}, {"rouge2", "0-1"}, {"rougeL", "0-1"}},
              {}};
  auto row = [](const eval::GenerationScores& s) {
    return std::map<std::string, double>{{"bleu1", s.bleu1},   {"bleu2", s.bleu2},   {"bleu4", s.bleu4},
                                         {"rouge1", s.rouge1}, {"rouge2", s.rouge2}, {"rougeL", s.rougeL}};
  };
  r.report.add_row(cfg.generator + "*", row(sc));
  r.report.add_row(cfg.generator, row(sf));
  r.manifest["grid"] = grid;
  r.manifest["best"] = best;
  r.manifest["upstream"] = upstream;
  return r;
}

inline RunResult execute(const RunConfig& cfg, const RunData& d) {
  switch (cfg.task) {
    case Task::abduction: return run_abduction(cfg, d);
    case Task::emotion: return run_emotion(cfg, d);
    default: return run_generation(cfg, d);
  }
}

/// Writes artifacts, reports and manifest.json under cfg.out. Returns the
/// manifest.
inline json write_run(const RunConfig& cfg, const RunData& d, RunResult r, double seconds) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out);
  r.artifacts["dictionary.json"] = to_json(d.dict).dump(1) + "\n";
  r.artifacts["report.txt"] = eval::render_text(r.report);
  r.artifacts["report.json"] = json{{"table", eval::to_json(r.report)}, {"test_metrics", r.test_metrics}}.dump(1) + "\n";
  json files = json::array();
  for (const auto& [name, contents] : r.artifacts) {
    std::ofstream out(fs::path(cfg.out) / name, std::ios::binary);
    if (!out) throw InputError("cannot write '" + (fs::path(cfg.out) / name).string() + "'");
    out << contents;
    files.push_back({{"path", name}, {"fingerprint", Fingerprint().update(contents).hex()}});
  }
  files.push_back({{"path", "manifest.json"}, {"fingerprint", nullptr}});
  json m = r.manifest;
  m["config"] = to_json(cfg);
  m["seed"] = cfg.seed;
  m["task"] = to_string(cfg.task);
  m["ablation_label"] = ablation_label(cfg.task, cfg.ablation);
  m["fingerprints"] = d.fingerprints;
  m["sizes"] = {{"train", d.train.size()}, {"val", d.val.size()}, {"test", d.test.size()}};
  m["test_metrics"] = r.test_metrics;
  m["artifacts"] = files;
  const auto cache = plugin_cache_dir();
  m["plugin_cache"] = cache ? json(cache->string()) : json(nullptr);
  m["wall_clock_seconds"] = seconds;
  std::ofstream out(fs::path(cfg.out) / "manifest.json");
  out << m.dump(1) << "\n";
  return m;
}

/// Grid search for the configured task, with artifacts and manifest written.
inline json run_grid_search(const RunConfig& cfg) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const auto d = prepare_data(cfg);
  auto r = execute(cfg, d);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return write_run(cfg, d, std::move(r), secs);
}

/// The five Table I rows: intention F1 from abduction (depends on IntDic
/// only) and emotion/satisfaction F1 from the emotion model, each averaged
/// over `seeds` consecutive seeds starting at base.seed.
inline json run_ablation_suite(const RunConfig& base, std::size_t seeds = 1) {
  base.validate();
  if (seeds < 1) throw ConfigError("ablation suite needs at least one seed");
  const auto t0 = std::chrono::steady_clock::now();
  const auto d = prepare_data(base);
  RunResult suite;
  suite.report = {"Ablation (test, macro F1, mean over " + std::to_string(seeds) + " seed" +
                      (seeds == 1 ? "" : "s") + ")",
                  {{"intention_f1", "0-1"}, {"emotion_f1", "0-1"}, {"satisfaction_f1", "0-1"}},
                  {}};
  auto f1 = [](const json& m, const char* head) { return m[head]["macro"]["f1"].get<double>(); };
  std::map<bool, double> intention_f1;
  json rows = json::array();
  for (const auto& flags : table_one_rows()) {
    RunConfig cfg = base;
    cfg.ablation = flags;
    const bool need_intention = !intention_f1.count(flags.intdic);
    double emo = 0, sat = 0, intent = 0;
    json per_seed = json::array();
    for (std::size_t k = 0; k < seeds; ++k) {
      cfg.seed = base.seed + k;
      if (need_intention) {
        RunConfig ac = cfg;
        ac.task = Task::abduction;
        intent += f1(run_abduction(ac, d).test_metrics, "intention") / static_cast<double>(seeds);
      }
      cfg.task = Task::emotion;
      auto er = run_emotion(cfg, d);
      const double e = f1(er.test_metrics, "emotion"), s = f1(er.test_metrics, "satisfaction");
      emo += e / static_cast<double>(seeds);
      sat += s / static_cast<double>(seeds);
      per_seed.push_back({{"seed", cfg.seed}, {"emotion_f1", e}, {"satisfaction_f1", s},
                          {"best", er.manifest["best"]["point"]}});
    }
    if (need_intention) intention_f1[flags.intdic] = intent;
    std::map<std::string, double> row{{"intention_f1", intention_f1[flags.intdic]}, {"emotion_f1", emo}};
    if (flags.multitask) row["satisfaction_f1"] = sat;
    const auto label = ablation_label(flags);
    suite.report.add_row(label, row);
    rows.push_back({{"label", label}, {"metrics", row}, {"per_seed", per_seed}});
  }
  suite.manifest["rows"] = rows;
  suite.manifest["seeds"] = seeds;
  suite.test_metrics = rows;
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  RunConfig cfg = base;
  cfg.task = Task::emotion;
  return write_run(cfg, d, std::move(suite), secs);
}

}  // namespace cogintac
