#pragma once

#include <array>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "cogintac/abduction.hpp"
#include "cogintac/corpus.hpp"
#include "cogintac/encoder.hpp"
#include "cogintac/eval.hpp"
#include "cogintac/intdic.hpp"
#include "cogintac/train.hpp"

namespace cogintac {

enum class IntentionRole { speaker, listener };

/// Dense intention representation of the speaker or the listener.
struct IntentionVector {
  Vector value;
  IntentionRole role = IntentionRole::speaker;
};

/// "The speaker's emotion is {emotion} because his intention is
/// {satisfied|not satisfied} by the listener."
inline std::string explain(Emotion emotion, Satisfaction satisfaction) {
  return "The speaker's emotion is " + std::string(to_string(emotion)) +
         " because his intention is " +
         (satisfaction == Satisfaction::satisfied ? "satisfied" : "not satisfied") +
         " by the listener.";
}

struct EmotionConfig {
  EncoderConfig encoder;
  std::string plugin;
  Index head_input_dim = 0;
  bool use_intdic = true;
  bool use_fusion = true;
  double lambda_emotion = 1.0;
  double lambda_satisfaction = 1.0;
  std::uint64_t seed = 7;

  bool multitask() const { return lambda_satisfaction > 0.0; }
};

inline json to_json(const EmotionConfig& c) {
  return json{{"encoder", to_json(c.encoder)},
              {"plugin", c.plugin},
              {"head_input_dim", c.head_input_dim},
              {"use_intdic", c.use_intdic},
              {"use_fusion", c.use_fusion},
              {"lambda_emotion", c.lambda_emotion},
              {"lambda_satisfaction", c.lambda_satisfaction},
              {"seed", c.seed}};
}

inline EmotionConfig emotion_config_from_json(const json& j) {
  EmotionConfig c;
  if (j.contains("encoder")) c.encoder = encoder_config_from_json(j.at("encoder"));
  c.plugin = j.value("plugin", c.plugin);
  c.head_input_dim = j.value("head_input_dim", c.head_input_dim);
  c.use_intdic = j.value("use_intdic", c.use_intdic);
  c.use_fusion = j.value("use_fusion", c.use_fusion);
  c.lambda_emotion = j.value("lambda_emotion", c.lambda_emotion);
  c.lambda_satisfaction = j.value("lambda_satisfaction", c.lambda_satisfaction);
  c.seed = j.value("seed", c.seed);
  return c;
}

struct EmotionPrediction {
  Emotion emotion = Emotion::neutral;
  Satisfaction satisfaction = Satisfaction::satisfied;
  std::array<double, kNumEmotions> emotion_distribution{};
  std::array<double, kNumSatisfaction> satisfaction_distribution{};
  std::string explanation;
};

/// Speaker emotional reaction from both utterances:
///   h_bar_s = ReLU(W_e [h_s; alpha])
///   f = Fuse(h_r, h_bar_s)
/// followed by an emotion head (6) and a satisfaction head (2).
///
/// Fuse is gated: m = [h_r; h_bar_s; h_r * h_bar_s; h_r - h_bar_s],
/// c = tanh(W_c m + b_c), g = sigmoid(W_g m + b_g), f = g * c + (1 - g) * h_r.
/// With fusion disabled, f = W_p [h_r; h_bar_s] + b_p.
class EmotionModel {
 public:
  static EmotionModel create(const EmotionConfig& cfg, Vocabulary vocab) {
    EmotionModel m(cfg);
    Rng rng(cfg.seed);
    m.encoder_ = UtteranceEncoder::recurrent(m.params_, "emotion.encoder", cfg.encoder,
                                             std::move(vocab), rng);
    m.build(rng);
    return m;
  }

  static EmotionModel create(const EmotionConfig& cfg,
                             std::shared_ptr<const ContextualEncoder> plugin) {
    EmotionModel m(cfg);
    Rng rng(cfg.seed);
    m.config_.plugin = plugin->name();
    m.encoder_ = UtteranceEncoder::external(std::move(plugin));
    m.build(rng);
    return m;
  }

  /// Bare heads for a given hidden size, without an encoder; used to drive
  /// the Eq.-level operations directly.
  static EmotionModel heads_only(const EmotionConfig& cfg, Index hidden) {
    EmotionModel m(cfg);
    Rng rng(cfg.seed);
    m.hidden_ = hidden;
    m.build(rng);
    return m;
  }

  const EmotionConfig& config() const { return config_; }
  const UtteranceEncoder& encoder() const { return encoder_; }
  nn::ParameterSet& params() { return params_; }
  const nn::ParameterSet& params() const { return params_; }
  Index hidden() const { return hidden_; }

  // -- tape-level pieces ----------------------------------------------------

  Expr intention_vector(Expr h_s, Expr alpha) const {
    if (h_s.size() != hidden_ || alpha.size() != static_cast<Index>(kNumIntentions))
      throw DimensionError("intention_vector expects h_s of " + std::to_string(hidden_) +
                           " and alpha of 7");
    return nn::relu(nn::matvec(*w_e_, nn::concat({h_s, alpha})));
  }

  Expr fuse(Expr h_r, Expr h_bar_s) const {
    if (h_r.size() != hidden_ || h_bar_s.size() != hidden_)
      throw DimensionError("fuse expects two vectors of " + std::to_string(hidden_));
    if (!config_.use_fusion) return projection_(nn::concat({h_r, h_bar_s}));
    auto m = nn::concat({h_r, h_bar_s, nn::cmul(h_r, h_bar_s), nn::sub(h_r, h_bar_s)});
    auto c = nn::tanh(candidate_(m));
    auto g = nn::sigmoid(gate_(m));
    return nn::add(nn::cmul(g, c), nn::cmul(nn::one_minus(g), h_r));
  }

  std::pair<Expr, Expr> head_logits(Expr f) const { return {emotion_head_(f), satisfaction_head_(f)}; }

  // -- value-level operations -------------------------------------------------

  IntentionVector intention_vector(const Vector& h_s, const PriorDistribution& alpha) const {
    Tape t;
    auto a = nn::constant(t, Eigen::Map<const Vector>(alpha.alpha.data(), kNumIntentions));
    return {intention_vector(nn::constant(t, h_s), a).value(), IntentionRole::speaker};
  }

  Vector fuse(const Vector& h_r, const IntentionVector& h_bar_s) const {
    if (h_bar_s.role != IntentionRole::speaker) throw InputError("fuse expects the speaker intention");
    Tape t;
    return fuse(nn::constant(t, h_r), nn::constant(t, h_bar_s.value)).value();
  }

  std::pair<std::array<double, kNumEmotions>, std::array<double, kNumSatisfaction>> predict_heads(
      const Vector& f) const {
    if (f.size() != hidden_) throw DimensionError("fused vector has the wrong dimension");
    Tape t;
    auto [e, s] = head_logits(nn::constant(t, f));
    const Vector pe = nn::softmax_values(e.value()), ps = nn::softmax_values(s.value());
    std::pair<std::array<double, kNumEmotions>, std::array<double, kNumSatisfaction>> out;
    for (std::size_t i = 0; i < kNumEmotions; ++i) out.first[i] = pe(static_cast<Index>(i));
    for (std::size_t i = 0; i < kNumSatisfaction; ++i) out.second[i] = ps(static_cast<Index>(i));
    return out;
  }

  IntentionScores alpha_for(std::string_view utterance_s, const IntentionDictionary* dict) const {
    if (!config_.use_intdic) return PriorDistribution::uniform().alpha;
    if (!dict) throw ConfigError("emotion model expects an intention dictionary");
    return dict->lookup(utterance_s).alpha;
  }

  struct Forward {
    Expr h_bar_s;
    Expr fused;
    Expr emotion_logits;
    Expr satisfaction_logits;
  };

  Forward forward(Tape& tape, std::string_view utterance_s, std::string_view utterance_r,
                  const IntentionScores& alpha) const {
    auto h_s = encoder_.represent(tape, utterance_s);
    auto h_r = encoder_.represent(tape, utterance_r);
    auto a = nn::constant(tape, Eigen::Map<const Vector>(alpha.data(), kNumIntentions));
    auto hb = intention_vector(h_s, a);
    auto f = fuse(h_r, hb);
    auto [e, s] = head_logits(f);
    return {hb, f, e, s};
  }

  EmotionPrediction predict(std::string_view utterance_s, std::string_view utterance_r,
                            const IntentionDictionary* dict) const {
    Tape tape;
    auto fw = forward(tape, utterance_s, utterance_r, alpha_for(utterance_s, dict));
    const Vector pe = nn::softmax_values(fw.emotion_logits.value());
    const Vector ps = nn::softmax_values(fw.satisfaction_logits.value());
    EmotionPrediction out;
    for (std::size_t i = 0; i < kNumEmotions; ++i) out.emotion_distribution[i] = pe(static_cast<Index>(i));
    for (std::size_t i = 0; i < kNumSatisfaction; ++i)
      out.satisfaction_distribution[i] = ps(static_cast<Index>(i));
    out.emotion = label_at<Emotion>(argmax(out.emotion_distribution));
    out.satisfaction = label_at<Satisfaction>(argmax(out.satisfaction_distribution));
    out.explanation = explain(out.emotion, out.satisfaction);
    return out;
  }

 private:
  explicit EmotionModel(const EmotionConfig& cfg) : config_(cfg) {
    if (cfg.lambda_emotion < 0 || cfg.lambda_satisfaction < 0)
      throw ConfigError("loss weights must be non-negative");
  }

  void build(Rng& rng) {
    if (encoder_.is_recurrent() || encoder_.plugin()) hidden_ = encoder_.dimension();
    if (config_.head_input_dim != 0 && config_.head_input_dim != hidden_)
      throw DimensionError("encoder dimension " + std::to_string(hidden_) +
                           " does not match head input " + std::to_string(config_.head_input_dim));
    const Index h = hidden_;
    w_e_ = &params_.add("emotion.W_e", h, h + static_cast<Index>(kNumIntentions), nn::Init::xavier, rng);
    candidate_ = nn::Linear::create(params_, "emotion.fuse.candidate", 4 * h, h, rng);
    gate_ = nn::Linear::create(params_, "emotion.fuse.gate", 4 * h, h, rng);
    projection_ = nn::Linear::create(params_, "emotion.fuse.projection", 2 * h, h, rng);
    emotion_head_ = nn::Linear::create(params_, "emotion.head.emotion", h,
                                       static_cast<Index>(kNumEmotions), rng, nn::Init::zero);
    satisfaction_head_ = nn::Linear::create(params_, "emotion.head.satisfaction", h,
                                            static_cast<Index>(kNumSatisfaction), rng, nn::Init::zero);
    // Parameters of the unused fusion path never receive gradients.
    for (auto* p : {candidate_.weight, candidate_.bias, gate_.weight, gate_.bias})
      p->frozen = !config_.use_fusion;
    for (auto* p : {projection_.weight, projection_.bias}) p->frozen = config_.use_fusion;
  }

  EmotionConfig config_;
  nn::ParameterSet params_;
  UtteranceEncoder encoder_;
  Index hidden_ = 0;
  nn::Parameter* w_e_ = nullptr;
  nn::Linear candidate_, gate_, projection_, emotion_head_, satisfaction_head_;
};

// ---------------------------------------------------------------------------

struct EmotionEvaluation {
  eval::ClassificationResult emotion;
  eval::ClassificationResult satisfaction;
  /// Fraction of items whose predicted satisfaction agrees with the polarity
  /// of the predicted emotion (satisfied <-> positive).
  double consistency = 0;
  std::vector<EmotionPrediction> predictions;
};

inline EmotionEvaluation evaluate_emotion(const EmotionModel& model, const Corpus& corpus,
                                          const IntentionDictionary* dict) {
  if (corpus.empty()) throw DataError("evaluation corpus is empty");
  EmotionEvaluation out;
  std::vector<std::size_t> pe, ge, psat, gsat;
  std::size_t consistent = 0;
  for (const auto& p : corpus) {
    auto pred = model.predict(p.utterance_s, p.utterance_r, dict);
    pe.push_back(index_of(pred.emotion));
    ge.push_back(index_of(p.emotion_s));
    psat.push_back(index_of(pred.satisfaction));
    gsat.push_back(index_of(p.satisfaction));
    const bool positive = polarity(pred.emotion) == Polarity::positive;
    if (positive == (pred.satisfaction == Satisfaction::satisfied)) ++consistent;
    out.predictions.push_back(std::move(pred));
  }
  out.emotion = eval::prf1(pe, ge, {kEmotionNames.begin(), kEmotionNames.end()});
  out.satisfaction = eval::prf1(psat, gsat, {kSatisfactionNames.begin(), kSatisfactionNames.end()});
  out.consistency = static_cast<double>(consistent) / static_cast<double>(corpus.size());
  return out;
}

/// Minimizes lambda_e * CE(emotion) + lambda_s * CE(satisfaction); model
/// selection on validation emotion macro-F1.
inline TrainHistory train_emotion(EmotionModel& model, const Corpus& train, const Corpus& val,
                                  const IntentionDictionary* dict, const TrainConfig& cfg) {
  if (cfg.epochs > 0 && (train.empty() || val.empty()))
    throw DataError("emotion training needs non-empty train and validation sets");
  std::vector<IntentionScores> alphas;
  for (const auto& p : train) alphas.push_back(model.alpha_for(p.utterance_s, dict));
  const double le = model.config().lambda_emotion, ls = model.config().lambda_satisfaction;
  return train_loop(
      model.params(), train.size(), cfg,
      [&](Tape& tape, std::size_t i) {
        const auto& p = train[i];
        auto fw = model.forward(tape, p.utterance_s, p.utterance_r, alphas[i]);
        auto loss = nn::scale(nn::cross_entropy(fw.emotion_logits, static_cast<Index>(index_of(p.emotion_s))), le);
        if (ls > 0)
          loss = nn::add(loss, nn::scale(nn::cross_entropy(fw.satisfaction_logits,
                                                           static_cast<Index>(index_of(p.satisfaction))),
                                         ls));
        return loss;
      },
      [&] { return evaluate_emotion(model, val, dict).emotion.macro_f1; });
}

inline json prediction_record(const std::string& id, const EmotionPrediction& p) {
  return json{{"id", id},
              {"predicted_emotion", to_string(p.emotion)},
              {"predicted_satisfaction", to_string(p.satisfaction)},
              {"emotion_distribution", p.emotion_distribution},
              {"satisfaction_distribution", p.satisfaction_distribution},
              {"explanation", p.explanation}};
}

inline json checkpoint_json(const EmotionModel& m) {
  return json{{"version", 1},
              {"kind", "emotion"},
              {"config", to_json(m.config())},
              {"vocab", m.encoder().vocab().tokens()},
              {"tensors", nn::tensors_to_json(m.params())}};
}

inline EmotionModel emotion_from_checkpoint(const json& j,
                                            const EncoderRegistry& registry = EncoderRegistry::instance()) {
  try {
    if (j.at("version").get<int>() != 1 || j.at("kind").get<std::string>() != "emotion")
      throw FormatError("not a version-1 emotion checkpoint");
    const auto cfg = emotion_config_from_json(j.at("config"));
    auto model = cfg.plugin.empty()
                     ? EmotionModel::create(cfg, Vocabulary(j.at("vocab").get<std::vector<std::string>>()))
                     : EmotionModel::create(cfg, registry.create(cfg.plugin));
    nn::tensors_from_json(model.params(), j.at("tensors"));
    return model;
  } catch (const json::exception& e) {
    throw FormatError(std::string("corrupt emotion checkpoint: ") + e.what());
  }
}

}  // namespace cogintac
