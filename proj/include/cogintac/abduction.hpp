#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cogintac/corpus.hpp"
#include "cogintac/encoder.hpp"
#include "cogintac/eval.hpp"
#include "cogintac/intdic.hpp"
#include "cogintac/train.hpp"

namespace cogintac {

/// Encoder posterior over intentions.
struct PosteriorDistribution {
  IntentionScores beta{};
};

struct AbductionConfig {
  EncoderConfig encoder;
  /// Registered contextual encoder name; empty selects the recurrent encoder.
  std::string plugin;
  /// Input width the heads are wired for; 0 adopts the encoder dimension.
  Index head_input_dim = 0;
  Index beta_hidden = 64;
  Index classifier_hidden = 32;
  bool use_intdic = true;
  std::uint64_t seed = 7;
};

inline json to_json(const EncoderConfig& c) {
  return json{{"embedding_dim", c.embedding_dim}, {"hidden", c.hidden}, {"layers", c.layers},
              {"bidirectional", c.bidirectional}, {"attention", c.attention}};
}

inline EncoderConfig encoder_config_from_json(const json& j) {
  EncoderConfig c;
  c.embedding_dim = j.value("embedding_dim", c.embedding_dim);
  c.hidden = j.value("hidden", c.hidden);
  c.layers = j.value("layers", c.layers);
  c.bidirectional = j.value("bidirectional", c.bidirectional);
  c.attention = j.value("attention", c.attention);
  return c;
}

inline json to_json(const AbductionConfig& c) {
  return json{{"encoder", to_json(c.encoder)},       {"plugin", c.plugin},
              {"head_input_dim", c.head_input_dim}, {"beta_hidden", c.beta_hidden},
              {"classifier_hidden", c.classifier_hidden}, {"use_intdic", c.use_intdic},
              {"seed", c.seed}};
}

inline AbductionConfig abduction_config_from_json(const json& j) {
  AbductionConfig c;
  if (j.contains("encoder")) c.encoder = encoder_config_from_json(j.at("encoder"));
  c.plugin = j.value("plugin", c.plugin);
  c.head_input_dim = j.value("head_input_dim", c.head_input_dim);
  c.beta_hidden = j.value("beta_hidden", c.beta_hidden);
  c.classifier_hidden = j.value("classifier_hidden", c.classifier_hidden);
  c.use_intdic = j.value("use_intdic", c.use_intdic);
  c.seed = j.value("seed", c.seed);
  return c;
}

struct AbductionPrediction {
  Intention predicted = Intention::request;
  IntentionScores distribution{};
  IntentionScores alpha{};
  IntentionScores beta{};
};

/// Speaker intention from the speaker utterance. The encoder posterior
/// beta = softmax(MLP(h_s)) and the dictionary prior alpha are concatenated
/// and mapped by the abductive classifier (14 -> hidden -> 7) to the final
/// distribution.
///
/// Initialization: the beta output layer is zero (beta starts uniform) and
/// the classifier starts as logits = beta + alpha, so an untrained model
/// follows the dictionary.
class AbductionModel {
 public:
  static AbductionModel create(const AbductionConfig& cfg, Vocabulary vocab) {
    AbductionModel m(cfg);
    Rng rng(cfg.seed);
    m.encoder_ = UtteranceEncoder::recurrent(m.params_, "abduction.encoder", cfg.encoder,
                                             std::move(vocab), rng);
    m.build_heads(rng);
    return m;
  }

  static AbductionModel create(const AbductionConfig& cfg,
                               std::shared_ptr<const ContextualEncoder> plugin) {
    AbductionModel m(cfg);
    Rng rng(cfg.seed);
    m.config_.plugin = plugin->name();
    m.encoder_ = UtteranceEncoder::external(std::move(plugin));
    m.build_heads(rng);
    return m;
  }

  const AbductionConfig& config() const { return config_; }
  const UtteranceEncoder& encoder() const { return encoder_; }
  nn::ParameterSet& params() { return params_; }
  const nn::ParameterSet& params() const { return params_; }

  Expr beta_logits(Tape& tape, Expr h_s) const {
    (void)tape;
    return beta_out_(nn::tanh(beta_hidden_(h_s)));
  }

  PosteriorDistribution compute_beta(const Vector& h_s) const {
    if (h_s.size() != beta_hidden_.in())
      throw DimensionError("h_s has dimension " + std::to_string(h_s.size()) + ", head expects " +
                           std::to_string(beta_hidden_.in()));
    if (!h_s.allFinite()) throw NumericError("h_s contains non-finite values");
    Tape tape;
    const Vector p = nn::softmax_values(beta_logits(tape, nn::constant(tape, h_s)).value());
    PosteriorDistribution out;
    for (std::size_t c = 0; c < kNumIntentions; ++c) out.beta[c] = p(static_cast<Index>(c));
    return out;
  }

  /// Classifier logits over [beta; alpha].
  Expr classifier_logits(Expr beta, Expr alpha) const {
    return cls_out_(nn::relu(cls_hidden_(nn::concat({beta, alpha}))));
  }

  struct Forward {
    Expr beta;
    Expr logits;
  };

  Forward forward(Tape& tape, std::string_view utterance, const IntentionScores& alpha) const {
    auto h_s = encoder_.represent(tape, utterance);
    auto beta = nn::softmax(beta_logits(tape, h_s));
    auto a = nn::constant(tape, Eigen::Map<const Vector>(alpha.data(), kNumIntentions));
    return {beta, classifier_logits(beta, a)};
  }

  /// Prior actually fed to the classifier: the dictionary lookup, or uniform
  /// when the dictionary is ablated.
  IntentionScores alpha_for(std::string_view utterance, const IntentionDictionary* dict) const {
    if (!config_.use_intdic) return PriorDistribution::uniform().alpha;
    if (!dict) throw ConfigError("abduction model expects an intention dictionary");
    return dict->lookup(utterance).alpha;
  }

  AbductionPrediction abduce(std::string_view utterance, const IntentionDictionary* dict) const {
    if (tokenize(utterance).empty()) throw InputError("cannot abduce from an empty utterance");
    AbductionPrediction out;
    out.alpha = alpha_for(utterance, dict);
    Tape tape;
    auto f = forward(tape, utterance, out.alpha);
    const Vector p = nn::softmax_values(f.logits.value());
    for (std::size_t c = 0; c < kNumIntentions; ++c) {
      out.distribution[c] = p(static_cast<Index>(c));
      out.beta[c] = f.beta.value()(static_cast<Index>(c));
    }
    out.predicted = label_at<Intention>(argmax(out.distribution));
    return out;
  }

 private:
  explicit AbductionModel(const AbductionConfig& cfg) : config_(cfg) {
    if (cfg.classifier_hidden < 2 * static_cast<Index>(kNumIntentions))
      throw ConfigError("classifier_hidden must be >= 14");
  }

  void build_heads(Rng& rng) {
    const Index h = encoder_.dimension();
    if (config_.head_input_dim != 0 && config_.head_input_dim != h)
      throw DimensionError("encoder dimension " + std::to_string(h) +
                           " does not match head input " + std::to_string(config_.head_input_dim));
    const Index k = static_cast<Index>(kNumIntentions);
    beta_hidden_ = nn::Linear::create(params_, "abduction.beta.hidden", h, config_.beta_hidden, rng);
    beta_out_ = nn::Linear::create(params_, "abduction.beta.out", config_.beta_hidden, k, rng,
                                   nn::Init::zero);
    cls_hidden_ = nn::Linear::create(params_, "abduction.classifier.hidden", 2 * k,
                                     config_.classifier_hidden, rng);
    cls_out_ = nn::Linear::create(params_, "abduction.classifier.out", config_.classifier_hidden,
                                  k, rng, nn::Init::zero);
    auto& w1 = cls_hidden_.weight->value;
    w1.topRows(2 * k).setIdentity();
    auto& w2 = cls_out_.weight->value;
    for (Index c = 0; c < k; ++c) w2(c, c) = w2(c, k + c) = 1.0;
  }

  AbductionConfig config_;
  nn::ParameterSet params_;
  UtteranceEncoder encoder_;
  nn::Linear beta_hidden_, beta_out_, cls_hidden_, cls_out_;
};

// ---------------------------------------------------------------------------

struct AbductionEvaluation {
  eval::ClassificationResult metrics;
  std::vector<AbductionPrediction> predictions;
};

inline std::vector<std::string> intention_class_names() {
  return {kIntentionNames.begin(), kIntentionNames.end()};
}

inline AbductionEvaluation evaluate_abduction(const AbductionModel& model, const Corpus& corpus,
                                              const IntentionDictionary* dict) {
  if (corpus.empty()) throw DataError("evaluation corpus is empty");
  AbductionEvaluation out;
  std::vector<std::size_t> preds, golds;
  for (const auto& p : corpus) {
    out.predictions.push_back(model.abduce(p.utterance_s, dict));
    preds.push_back(index_of(out.predictions.back().predicted));
    golds.push_back(index_of(p.intention_s));
  }
  out.metrics = eval::prf1(preds, golds, intention_class_names());
  return out;
}

/// Mean cross-entropy of the final distribution against intention_s; model
/// selection on validation macro-F1.
inline TrainHistory train_abduction(AbductionModel& model, const Corpus& train, const Corpus& val,
                                    const IntentionDictionary* dict, const TrainConfig& cfg) {
  if (cfg.epochs > 0 && (train.empty() || val.empty()))
    throw DataError("abduction training needs non-empty train and validation sets");
  std::vector<IntentionScores> alphas;
  for (const auto& p : train) alphas.push_back(model.alpha_for(p.utterance_s, dict));
  return train_loop(
      model.params(), train.size(), cfg,
      [&](Tape& tape, std::size_t i) {
        auto f = model.forward(tape, train[i].utterance_s, alphas[i]);
        return nn::cross_entropy(f.logits, static_cast<Index>(index_of(train[i].intention_s)));
      },
      [&] { return evaluate_abduction(model, val, dict).metrics.macro_f1; });
}

inline json prediction_record(const std::string& id, const AbductionPrediction& p) {
  return json{{"id", id},
              {"predicted_intention", to_string(p.predicted)},
              {"distribution", p.distribution}};
}

inline json checkpoint_json(const AbductionModel& m) {
  return json{{"version", 1},
              {"kind", "abduction"},
              {"config", to_json(m.config())},
              {"vocab", m.encoder().vocab().tokens()},
              {"tensors", nn::tensors_to_json(m.params())}};
}

inline AbductionModel abduction_from_checkpoint(const json& j,
                                                const EncoderRegistry& registry = EncoderRegistry::instance()) {
  try {
    if (j.at("version").get<int>() != 1 || j.at("kind").get<std::string>() != "abduction")
      throw FormatError("not a version-1 abduction checkpoint");
    const auto cfg = abduction_config_from_json(j.at("config"));
    auto model = cfg.plugin.empty()
                     ? AbductionModel::create(cfg, Vocabulary(j.at("vocab").get<std::vector<std::string>>()))
                     : AbductionModel::create(cfg, registry.create(cfg.plugin));
    nn::tensors_from_json(model.params(), j.at("tensors"));
    return model;
  } catch (const json::exception& e) {
    throw FormatError(std::string("corrupt abduction checkpoint: ") + e.what());
  }
}

}  // namespace cogintac
