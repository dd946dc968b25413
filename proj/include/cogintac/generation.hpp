#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "cogintac/emotion.hpp"
#include "cogintac/nn/layers.hpp"
#include "cogintac/train.hpp"

namespace cogintac {

inline constexpr std::string_view kExpectationPrefix = "The emotional expectation of the listener is ";
inline constexpr std::string_view kDefaultSeparator = " </s> ";

inline std::string expectation_template(Emotion emotion) {
  return std::string(kExpectationPrefix) + std::string(to_string(emotion)) + ".";
}

/// Inverse of expectation_template.
inline Emotion extract_expectation(std::string_view sentence) {
  if (sentence.size() <= kExpectationPrefix.size() + 1 || !sentence.starts_with(kExpectationPrefix) ||
      sentence.back() != '.')
    throw InputError("not an expectation sentence: '" + std::string(sentence) + "'");
  const auto word = sentence.substr(kExpectationPrefix.size(),
                                    sentence.size() - kExpectationPrefix.size() - 1);
  auto e = try_parse<Emotion>(word);
  if (!e) throw LabelError("emotion_s", std::string(word));
  return *e;
}

// ---------------------------------------------------------------------------
// Listener intention

/// h_bar_r = W_r h_bar_s + b_r, with an auxiliary 7-way head reading h_bar_r
/// so the map can be fitted to intention_r labels.
class IntentionInference {
 public:
  static IntentionInference create(Index hidden, std::uint64_t seed, nn::Init init = nn::Init::xavier) {
    IntentionInference m;
    Rng rng(seed);
    m.map_ = nn::Linear::create(m.params_, "inference.map", hidden, hidden, rng, init);
    m.head_ = nn::Linear::create(m.params_, "inference.head", hidden,
                                 static_cast<Index>(kNumIntentions), rng);
    return m;
  }

  Index hidden() const { return map_.out(); }
  nn::ParameterSet& params() { return params_; }
  const nn::ParameterSet& params() const { return params_; }

  Expr infer(Expr h_bar_s) const {
    if (h_bar_s.size() != hidden()) throw DimensionError("listener inference expects dimension " +
                                                         std::to_string(hidden()));
    return map_(h_bar_s);
  }
  Expr label_logits(Expr h_bar_r) const { return head_(h_bar_r); }

  IntentionVector infer(const IntentionVector& h_bar_s) const {
    if (h_bar_s.role != IntentionRole::speaker)
      throw InputError("listener inference expects the speaker intention vector");
    if (h_bar_s.value.size() != hidden()) throw DimensionError("listener inference expects dimension " +
                                                               std::to_string(hidden()));
    return {map_.apply(h_bar_s.value), IntentionRole::listener};
  }

  Intention label(const IntentionVector& h_bar_r) const {
    const Vector logits = head_.apply(h_bar_r.value);
    Index best = 0;
    logits.maxCoeff(&best);
    return label_at<Intention>(static_cast<std::size_t>(best));
  }

 private:
  nn::ParameterSet params_;
  nn::Linear map_, head_;
};

inline json checkpoint_json(const IntentionInference& m) {
  return json{{"version", 1}, {"kind", "inference"}, {"hidden", m.hidden()},
              {"tensors", nn::tensors_to_json(m.params())}};
}

inline IntentionInference inference_from_checkpoint(const json& j) {
  try {
    if (j.at("version").get<int>() != 1 || j.at("kind").get<std::string>() != "inference")
      throw FormatError("not a version-1 inference checkpoint");
    auto m = IntentionInference::create(j.at("hidden").get<Index>(), 0);
    nn::tensors_from_json(m.params(), j.at("tensors"));
    return m;
  } catch (const json::exception& e) {
    throw FormatError(std::string("corrupt inference checkpoint: ") + e.what());
  }
}

/// Fits the inference map on (h_bar_s, intention_r) pairs; selection on
/// validation accuracy.
inline TrainHistory train_intention_inference(IntentionInference& m,
                                              const std::vector<IntentionVector>& train_x,
                                              const std::vector<Intention>& train_y,
                                              const std::vector<IntentionVector>& val_x,
                                              const std::vector<Intention>& val_y,
                                              const TrainConfig& cfg) {
  if (train_x.size() != train_y.size() || val_x.size() != val_y.size())
    throw DataError("inference inputs and labels differ in length");
  return train_loop(
      m.params(), train_x.size(), cfg,
      [&](Tape& t, std::size_t i) {
        auto hr = m.infer(nn::constant(t, train_x[i].value));
        return nn::cross_entropy(m.label_logits(hr), static_cast<Index>(index_of(train_y[i])));
      },
      [&] {
        if (val_x.empty()) return 0.0;
        std::size_t hit = 0;
        for (std::size_t i = 0; i < val_x.size(); ++i)
          if (m.label(m.infer(val_x[i])) == val_y[i]) ++hit;
        return static_cast<double>(hit) / static_cast<double>(val_x.size());
      });
}

// ---------------------------------------------------------------------------
// Generator input / output

enum class DecodeStrategy { greedy, beam, sample };
enum class ConditioningMode { full, context_only };
enum class FinishReason { end_token, max_length };

inline std::string_view to_string(ConditioningMode m) {
  return m == ConditioningMode::full ? "full" : "context_only";
}
inline std::string_view to_string(FinishReason r) {
  return r == FinishReason::end_token ? "end_token" : "max_length";
}

struct DecodeConfig {
  std::size_t max_length = 64;
  DecodeStrategy strategy = DecodeStrategy::greedy;
  std::size_t beam_width = 4;
  double temperature = 1.0;
  std::uint64_t seed = 7;
};

struct ListenerIntention {
  IntentionVector vector;
  Intention label = Intention::inform;
};

struct GeneratorInput {
  std::string conditioning_text;
  ConditioningMode mode = ConditioningMode::full;
  std::optional<ListenerIntention> intention;
  DecodeConfig decode;
};

struct GeneratedResponse {
  std::vector<std::string> tokens;
  std::string text;
  FinishReason finish_reason = FinishReason::end_token;
};

inline GeneratorInput assemble_input(std::string_view m_j, std::string_view utterance_s,
                                     std::optional<ListenerIntention> h_bar_r, DecodeConfig decode = {},
                                     std::string_view separator = kDefaultSeparator) {
  if (utterance_s.empty()) throw InputError("speaker utterance is empty");
  if (m_j.empty()) throw InputError("expectation sentence is empty");
  if (separator.empty()) throw ConfigError("separator must be non-empty");
  if (decode.max_length == 0) throw ConfigError("max_length must be >= 1");
  if (h_bar_r && h_bar_r->vector.role != IntentionRole::listener)
    throw InputError("generator conditioning expects the listener intention vector");
  return {std::string(m_j) + std::string(separator) + std::string(utterance_s), ConditioningMode::full,
          std::move(h_bar_r), decode};
}

/// Context-only ablation: the speaker utterance alone.
inline GeneratorInput assemble_context_only(std::string_view utterance_s, DecodeConfig decode = {}) {
  if (utterance_s.empty()) throw InputError("speaker utterance is empty");
  if (decode.max_length == 0) throw ConfigError("max_length must be >= 1");
  return {std::string(utterance_s), ConditioningMode::context_only, std::nullopt, decode};
}

/// Splits conditioning text back into (m_j, utterance_s).
inline std::pair<std::string, std::string> split_input(std::string_view text,
                                                       std::string_view separator = kDefaultSeparator) {
  const auto pos = text.find(separator);
  if (pos == std::string_view::npos) throw InputError("separator not found in conditioning text");
  return {std::string(text.substr(0, pos)), std::string(text.substr(pos + separator.size()))};
}

inline std::string intention_prefix(Intention label) {
  return "intention: " + std::string(to_string(label)) + ". ";
}

// ---------------------------------------------------------------------------
// Plugins

class Generator {
 public:
  virtual ~Generator() = default;
  virtual std::string name() const = 0;
  /// Dimension of h_bar_r consumed natively; 0 when the plugin only reads text.
  virtual Index intention_dim() const { return 0; }
  bool accepts_vector_conditioning() const { return intention_dim() > 0; }
  virtual GeneratedResponse decode(const GeneratorInput& input) = 0;
};

class TrainableGenerator : public Generator {
 public:
  virtual nn::ParameterSet& params() = 0;
  /// Mean teacher-forced cross-entropy per target token (end token included).
  virtual Expr token_loss(Tape& tape, const GeneratorInput& input, std::string_view target) = 0;
  virtual json checkpoint() const = 0;
};

/// Routes the listener intention to the plugin (natively or as a text prefix)
/// and enforces the output contract.
/// Moves the listener intention into the text prefix for plugins that take
/// no vector conditioning.
inline GeneratorInput prepare_input(const Generator& plugin, GeneratorInput input) {
  if (input.intention && !plugin.accepts_vector_conditioning()) {
    input.conditioning_text = intention_prefix(input.intention->label) + input.conditioning_text;
    input.intention.reset();
  }
  return input;
}

inline GeneratedResponse generate(Generator& plugin, GeneratorInput input) {
  if (input.conditioning_text.empty()) throw InputError("conditioning text is empty");
  if (input.decode.max_length == 0) throw ConfigError("max_length must be >= 1");
  input = prepare_input(plugin, std::move(input));
  if (input.intention && input.intention->vector.value.size() != plugin.intention_dim())
    throw DimensionError("generator '" + plugin.name() + "' expects intention dimension " +
                         std::to_string(plugin.intention_dim()));
  GeneratedResponse out;
  try {
    out = plugin.decode(input);
  } catch (const GenerationError&) {
    throw;
  } catch (const std::exception& e) {
    throw GenerationError("generator '" + plugin.name() + "' failed: " + e.what());
  }
  if (out.tokens.size() > input.decode.max_length)
    throw GenerationError("generator '" + plugin.name() + "' exceeded max_length");
  return out;
}

/// Returns the conditioning text, whitespace-tokenized and truncated.
class EchoGenerator : public Generator {
 public:
  std::string name() const override { return "echo"; }
  GeneratedResponse decode(const GeneratorInput& input) override {
    GeneratedResponse r;
    std::istringstream in(input.conditioning_text);
    std::string tok;
    while (in >> tok) {
      if (r.tokens.size() == input.decode.max_length) {
        r.finish_reason = FinishReason::max_length;
        break;
      }
      r.tokens.push_back(tok);
    }
    for (std::size_t i = 0; i < r.tokens.size(); ++i) r.text += (i ? " " : "") + r.tokens[i];
    return r;
  }
};

struct TinyCharConfig {
  Index embedding_dim = 16;
  Index hidden = 48;
  Index intention_dim = 0;
  std::size_t max_input_chars = 160;
  std::uint64_t seed = 7;
};

inline json to_json(const TinyCharConfig& c) {
  return json{{"embedding_dim", c.embedding_dim}, {"hidden", c.hidden}, {"intention_dim", c.intention_dim},
              {"max_input_chars", c.max_input_chars}, {"seed", c.seed}};
}

inline TinyCharConfig tiny_char_config_from_json(const json& j) {
  TinyCharConfig c;
  if (!j.is_object()) throw ConfigError("tiny-char options must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (it.key() != "embedding_dim" && it.key() != "hidden" && it.key() != "intention_dim" &&
        it.key() != "max_input_chars" && it.key() != "seed")
      throw ConfigError("unknown tiny-char option '" + it.key() + "'");
  c.embedding_dim = j.value("embedding_dim", c.embedding_dim);
  c.hidden = j.value("hidden", c.hidden);
  c.intention_dim = j.value("intention_dim", c.intention_dim);
  c.max_input_chars = j.value("max_input_chars", c.max_input_chars);
  c.seed = j.value("seed", c.seed);
  if (c.embedding_dim < 1 || c.hidden < 1 || c.intention_dim < 0 || c.max_input_chars < 1)
    throw ConfigError("invalid tiny-char generator configuration");
  return c;
}

/// Character-level encoder-decoder. A bidirectional GRU reads the
/// conditioning text; the context [fwd_last; bwd_first; h_bar_r] seeds the
/// decoder state and is fed at every decoding step.
class TinyCharGenerator : public TrainableGenerator {
 public:
  static constexpr Index kBos = 0, kEos = 1, kUnk = 2, kFirstChar = 3;
  static constexpr Index kVocab = kFirstChar + 95;  // printable ASCII

  explicit TinyCharGenerator(const TinyCharConfig& cfg) : cfg_(cfg) {
    Rng rng(cfg.seed);
    const Index e = cfg.embedding_dim, h = cfg.hidden;
    embed_ = &params_.add("tinychar.embedding", kVocab, e, nn::Init::small_uniform, rng);
    fwd_ = nn::GruLayer::create(params_, "tinychar.enc.fwd", e, h, rng);
    bwd_ = nn::GruLayer::create(params_, "tinychar.enc.bwd", e, h, rng);
    init_ = nn::Linear::create(params_, "tinychar.init", context_dim(), h, rng);
    dec_ = nn::GruLayer::create(params_, "tinychar.dec", e + context_dim(), h, rng);
    out_ = nn::Linear::create(params_, "tinychar.out", h, kVocab, rng);
  }

  static Index symbol(char c) {
    const auto u = static_cast<unsigned char>(c);
    return (u >= 32 && u <= 126) ? kFirstChar + (u - 32) : kUnk;
  }
  static std::string glyph(Index s) {
    if (s >= kFirstChar) return std::string(1, static_cast<char>(32 + (s - kFirstChar)));
    return s == kUnk ? "?" : "";
  }

  std::string name() const override { return "tiny-char"; }
  Index intention_dim() const override { return cfg_.intention_dim; }
  const TinyCharConfig& config() const { return cfg_; }
  nn::ParameterSet& params() override { return params_; }

  Expr token_loss(Tape& tape, const GeneratorInput& input, std::string_view target) override {
    auto ctx = context(tape, input);
    Expr h = nn::tanh(init_(ctx));
    std::vector<Index> ys;
    for (char c : target) ys.push_back(symbol(c));
    ys.push_back(kEos);
    std::vector<Expr> losses;
    Index prev = kBos;
    for (Index y : ys) {
      h = dec_.step(nn::concat({nn::lookup(tape, *embed_, prev), ctx}), h);
      losses.push_back(nn::cross_entropy(out_(h), y));
      prev = y;
    }
    return nn::mean(losses);
  }

  GeneratedResponse decode(const GeneratorInput& input) override {
    Tape tape;
    const Vector ctx = context(tape, input).value();
    const Vector h0 = nn::tanh(init_(nn::constant(tape, ctx))).value();
    switch (input.decode.strategy) {
      case DecodeStrategy::beam: return beam_decode(ctx, h0, input.decode);
      case DecodeStrategy::sample: return sample_decode(ctx, h0, input.decode);
      case DecodeStrategy::greedy: break;
    }
    return sample_decode(ctx, h0, input.decode, /*greedy=*/true);
  }

  json checkpoint() const override {
    return json{{"version", 1}, {"kind", "tiny-char"}, {"config", to_json(cfg_)},
                {"tensors", nn::tensors_to_json(params_)}};
  }

  static std::unique_ptr<TinyCharGenerator> from_checkpoint(const json& j) {
    try {
      if (j.at("version").get<int>() != 1 || j.at("kind").get<std::string>() != "tiny-char")
        throw FormatError("not a version-1 tiny-char checkpoint");
      auto g = std::make_unique<TinyCharGenerator>(tiny_char_config_from_json(j.at("config")));
      nn::tensors_from_json(g->params_, j.at("tensors"));
      return g;
    } catch (const json::exception& e) {
      throw FormatError(std::string("corrupt generator checkpoint: ") + e.what());
    }
  }

 private:
  Index context_dim() const { return 2 * cfg_.hidden + cfg_.intention_dim; }

  Expr context(Tape& tape, const GeneratorInput& input) const {
    std::string_view text = input.conditioning_text;
    if (text.empty()) throw InputError("conditioning text is empty");
    text = text.substr(0, cfg_.max_input_chars);
    std::vector<Expr> xs;
    for (char c : text) xs.push_back(nn::lookup(tape, *embed_, symbol(c)));
    const auto f = fwd_.run(tape, xs, false);
    const auto b = bwd_.run(tape, xs, true);
    Vector intent = Vector::Zero(cfg_.intention_dim);
    if (input.intention && cfg_.intention_dim > 0) {
      if (input.intention->vector.value.size() != cfg_.intention_dim)
        throw DimensionError("tiny-char expects intention dimension " + std::to_string(cfg_.intention_dim));
      intent = input.intention->vector.value;
    }
    if (cfg_.intention_dim == 0) return nn::concat({f.back(), b.front()});
    return nn::concat({f.back(), b.front(), nn::constant(tape, intent)});
  }

  std::pair<Vector, Vector> step(const Vector& ctx, const Vector& h, Index prev) const {
    Tape t;
    auto hn = dec_.step(nn::concat({nn::lookup(t, *embed_, prev), nn::constant(t, ctx)}),
                        nn::constant(t, h));
    return {hn.value(), out_(hn).value()};
  }

  static GeneratedResponse finish(const std::vector<Index>& seq, FinishReason reason) {
    GeneratedResponse r;
    r.finish_reason = reason;
    for (Index s : seq) {
      r.tokens.push_back(glyph(s));
      r.text += r.tokens.back();
    }
    return r;
  }

  GeneratedResponse sample_decode(const Vector& ctx, Vector h, const DecodeConfig& dc,
                                  bool greedy = false) const {
    Rng rng(dc.seed);
    std::vector<Index> seq;
    Index prev = kBos;
    while (seq.size() < dc.max_length) {
      auto [hn, logits] = step(ctx, h, prev);
      h = hn;
      Index next = 0;
      if (greedy) {
        logits.maxCoeff(&next);
      } else {
        if (!(dc.temperature > 0)) throw ConfigError("temperature must be positive");
        const Vector p = nn::softmax_values(logits / dc.temperature);
        double u = uniform01(rng), acc = 0;
        next = p.size() - 1;
        for (Index i = 0; i < p.size(); ++i) {
          acc += p(i);
          if (u < acc) { next = i; break; }
        }
      }
      if (next == kEos) return finish(seq, FinishReason::end_token);
      seq.push_back(next);
      prev = next;
    }
    return finish(seq, FinishReason::max_length);
  }

  GeneratedResponse beam_decode(const Vector& ctx, const Vector& h0, const DecodeConfig& dc) const {
    struct Beam {
      std::vector<Index> seq;
      Vector h;
      double logp = 0;
      bool ended = false;
    };
    const std::size_t width = std::max<std::size_t>(1, dc.beam_width);
    std::vector<Beam> alive{{{}, h0, 0.0, false}}, done;
    // Length-normalized score; the end token counts as one step.
    auto norm = [](const Beam& b) { return b.logp / static_cast<double>(b.seq.size() + 1); };
    for (std::size_t len = 0; len < dc.max_length && !alive.empty() && done.size() < width; ++len) {
      std::vector<Beam> cand;
      for (const auto& b : alive) {
        auto [hn, logits] = step(ctx, b.h, b.seq.empty() ? kBos : b.seq.back());
        const Vector lp = logits.array() - nn::log_sum_exp(logits);
        for (Index s = kEos; s < kVocab; ++s) {
          Beam nb{b.seq, hn, b.logp + lp(s), s == kEos};
          if (!nb.ended) nb.seq.push_back(s);
          cand.push_back(std::move(nb));
        }
      }
      std::stable_sort(cand.begin(), cand.end(), [](const Beam& a, const Beam& b) { return a.logp > b.logp; });
      if (cand.size() > width) cand.resize(width);
      alive.clear();
      for (auto& c : cand) (c.ended ? done : alive).push_back(std::move(c));
    }
    auto better = [&](const Beam& a, const Beam& b) { return norm(a) > norm(b); };
    std::stable_sort(done.begin(), done.end(), better);
    if (alive.empty() || (!done.empty() && alive.front().seq.size() < dc.max_length))
      return finish(done.front().seq, FinishReason::end_token);
    std::stable_sort(alive.begin(), alive.end(), better);
    if (!done.empty() && norm(done.front()) >= norm(alive.front()))
      return finish(done.front().seq, FinishReason::end_token);
    return finish(alive.front().seq, FinishReason::max_length);
  }

  TinyCharConfig cfg_;
  nn::ParameterSet params_;
  nn::Parameter* embed_ = nullptr;
  nn::GruLayer fwd_, bwd_, dec_;
  nn::Linear init_, out_;
};

/// Name -> factory taking a JSON options object.
class GeneratorRegistry {
 public:
  using Factory = std::function<std::unique_ptr<Generator>(const json&)>;

  static GeneratorRegistry& instance() {
    static GeneratorRegistry r = [] {
      GeneratorRegistry g;
      g.add("echo", [](const json&) { return std::make_unique<EchoGenerator>(); });
      g.add("tiny-char", [](const json& o) {
        return std::make_unique<TinyCharGenerator>(tiny_char_config_from_json(o.is_null() ? json::object() : o));
      });
      return g;
    }();
    return r;
  }

  void add(const std::string& name, Factory f) { factories_[name] = std::move(f); }
  bool contains(const std::string& name) const { return factories_.count(name) > 0; }
  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& [k, _] : factories_) out.push_back(k);
    return out;
  }
  std::unique_ptr<Generator> create(const std::string& name, const json& options = json::object()) const {
    auto it = factories_.find(name);
    if (it == factories_.end()) throw ConfigError("unknown generator plugin '" + name + "'");
    return it->second(options);
  }

 private:
  std::map<std::string, Factory> factories_;
};

inline json generator_checkpoint(const Generator& g) {
  if (auto* t = dynamic_cast<const TrainableGenerator*>(&g)) return t->checkpoint();
  return json{{"version", 1}, {"kind", g.name()}};
}

inline std::unique_ptr<Generator> generator_from_checkpoint(const json& j) {
  const auto kind = j.value("kind", std::string{});
  if (kind == "tiny-char") return TinyCharGenerator::from_checkpoint(j);
  if (GeneratorRegistry::instance().contains(kind)) return GeneratorRegistry::instance().create(kind);
  throw FormatError("unknown generator checkpoint kind '" + kind + "'");
}

// ---------------------------------------------------------------------------
// Training

inline double mean_token_loss(TrainableGenerator& g, const std::vector<GeneratorInput>& inputs,
                              const std::vector<std::string>& targets) {
  if (inputs.empty()) return 0.0;
  double s = 0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    Tape t;
    s += g.token_loss(t, prepare_input(g, inputs[i]), targets[i]).scalar();
  }
  return s / static_cast<double>(inputs.size());
}

/// Teacher-forced fine-tuning on (input, utterance_r) pairs; the returned
/// history's val_metric is the validation token loss (lower is better).
inline TrainHistory train_generator_adapter(Generator& plugin, const std::vector<GeneratorInput>& train_in,
                                            const std::vector<std::string>& train_targets,
                                            const std::vector<GeneratorInput>& val_in,
                                            const std::vector<std::string>& val_targets,
                                            const TrainConfig& cfg) {
  auto* g = dynamic_cast<TrainableGenerator*>(&plugin);
  if (!g) throw GenerationError("generator '" + plugin.name() + "' does not support training");
  if (train_in.size() != train_targets.size() || val_in.size() != val_targets.size())
    throw DataError("generator inputs and targets differ in length");
  std::vector<GeneratorInput> tr, va;
  for (const auto& x : train_in) tr.push_back(prepare_input(*g, x));
  for (const auto& x : val_in) va.push_back(prepare_input(*g, x));
  return train_loop(
      g->params(), tr.size(), cfg,
      [&](Tape& t, std::size_t i) { return g->token_loss(t, tr[i], train_targets[i]); },
      [&] { return mean_token_loss(*g, va, val_targets); }, /*higher_is_better=*/false);
}

// ---------------------------------------------------------------------------
// Harness

/// Upstream components used to condition the generator. Without an emotion
/// model the generator gets m_j and x^s only.
struct GenerationPipeline {
  const EmotionModel* emotion = nullptr;
  const IntentionInference* inference = nullptr;
  const IntentionDictionary* dict = nullptr;
  bool use_predicted_emotion = false;
  std::string separator = std::string(kDefaultSeparator);
};

inline IntentionVector speaker_intention(const EmotionModel& m, const IntentionDictionary* dict,
                                         std::string_view utterance_s) {
  Tape t;
  auto h_s = m.encoder().represent(t, utterance_s);
  const auto alpha = m.alpha_for(utterance_s, dict);
  auto hb = m.intention_vector(h_s, nn::constant(t, Eigen::Map<const Vector>(alpha.data(), kNumIntentions)));
  return {hb.value(), IntentionRole::speaker};
}

inline std::optional<ListenerIntention> listener_intention(const GenerationPipeline& p,
                                                           std::string_view utterance_s) {
  if (!p.emotion || !p.inference) return std::nullopt;
  const auto hr = p.inference->infer(speaker_intention(*p.emotion, p.dict, utterance_s));
  return ListenerIntention{hr, p.inference->label(hr)};
}

inline GeneratorInput make_input(const GenerationPipeline& p, const ConversationPair& pair,
                                 ConditioningMode mode, const DecodeConfig& decode) {
  if (mode == ConditioningMode::context_only) return assemble_context_only(pair.utterance_s, decode);
  Emotion e = pair.emotion_s;
  if (p.use_predicted_emotion) {
    if (!p.emotion) throw ConfigError("predicted-emotion mode needs an emotion model");
    e = p.emotion->predict(pair.utterance_s, pair.utterance_r, p.dict).emotion;
  }
  return assemble_input(expectation_template(e), pair.utterance_s, listener_intention(p, pair.utterance_s),
                        decode, p.separator);
}

struct GenerationRecord {
  std::string id;
  std::string input_text;
  ConditioningMode mode = ConditioningMode::full;
  GeneratedResponse response;
};

inline json to_json(const GenerationRecord& r) {
  return json{{"id", r.id},
              {"input_text", r.input_text},
              {"mode", to_string(r.mode)},
              {"response", r.response.text},
              {"finish_reason", to_string(r.response.finish_reason)}};
}

/// Both conditioning modes for every item, full first. The context-only
/// outputs may come from a separately trained plugin.
inline std::vector<GenerationRecord> generate_paired(Generator& full, Generator& context_only,
                                                     const GenerationPipeline& p, const Corpus& corpus,
                                                     const DecodeConfig& decode) {
  std::vector<GenerationRecord> out;
  for (const auto& pair : corpus) {
    for (auto mode : {ConditioningMode::full, ConditioningMode::context_only}) {
      Generator& plugin = mode == ConditioningMode::full ? full : context_only;
      auto in = prepare_input(plugin, make_input(p, pair, mode, decode));
      out.push_back({pair.id, in.conditioning_text, mode, generate(plugin, in)});
    }
  }
  return out;
}

inline std::vector<GenerationRecord> generate_paired(Generator& plugin, const GenerationPipeline& p,
                                                     const Corpus& corpus, const DecodeConfig& decode) {
  return generate_paired(plugin, plugin, p, corpus, decode);
}

}  // namespace cogintac
