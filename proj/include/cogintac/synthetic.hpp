#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cogintac/corpus.hpp"
#include "cogintac/random.hpp"

namespace cogintac {

/// Recipe for a synthetic CogIEA-shaped corpus. Speaker utterances are
/// filler pseudo-words, optionally carrying a trigger phrase of the
/// speaker intention; listener utterances carry a response phrase that
/// determines satisfaction and (with `emotion_cue_rate`) the emotion.
struct SyntheticSpec {
  std::size_t count = 2000;
  std::size_t vocab_size = 400;
  double injection_rate = 0.8;
  /// Probability that a filler word is drawn from the intention's own pool.
  double cue_rate = 0.5;
  double satisfied_rate = 0.5;
  double emotion_cue_rate = 0.8;
  std::size_t min_filler = 3;
  std::size_t max_filler = 8;
  std::array<std::vector<std::string>, kNumIntentions> triggers = default_triggers();

  static std::array<std::vector<std::string>, kNumIntentions> default_triggers() {
    return {{{"would like", "ask for", "could you please"},
             {"proposal", "how about", "why not"},
             {"you must", "do it now", "i order you"},
             {"yes", "agreed", "sounds good"},
             {"no", "i refuse", "not going to"},
             {"what is", "do you know", "where is"},
             {"i heard that", "let me tell you", "just so you know"}}};
  }

  void validate() const {
    auto rate = [](double r, const char* name) {
      if (!(r >= 0.0 && r <= 1.0))
        throw ConfigError(std::string(name) + " must lie in [0, 1]");
    };
    rate(injection_rate, "injection_rate");
    rate(cue_rate, "cue_rate");
    rate(satisfied_rate, "satisfied_rate");
    rate(emotion_cue_rate, "emotion_cue_rate");
    if (vocab_size < 2 * kNumIntentions) throw ConfigError("vocab_size must be >= 14");
    if (min_filler > max_filler) throw ConfigError("min_filler exceeds max_filler");
    for (std::size_t c = 0; c < kNumIntentions; ++c)
      if (triggers[c].empty())
        throw ConfigError("no trigger phrases for intention '" +
                          std::string(kIntentionNames[c]) + "'");
  }
};

inline SyntheticSpec synthetic_spec_from_json(const json& j) {
  SyntheticSpec s;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto& k = it.key();
    if (k == "count") s.count = it->get<std::size_t>();
    else if (k == "vocab_size") s.vocab_size = it->get<std::size_t>();
    else if (k == "injection_rate") s.injection_rate = it->get<double>();
    else if (k == "cue_rate") s.cue_rate = it->get<double>();
    else if (k == "satisfied_rate") s.satisfied_rate = it->get<double>();
    else if (k == "emotion_cue_rate") s.emotion_cue_rate = it->get<double>();
    else if (k == "min_filler") s.min_filler = it->get<std::size_t>();
    else if (k == "max_filler") s.max_filler = it->get<std::size_t>();
    else if (k == "polarity_rule") {
      if (it->get<std::string>() != "strict")
        throw ConfigError("synthetic corpora only support polarity_rule \"strict\"");
    } else if (k == "triggers") {
      for (auto t = it->begin(); t != it->end(); ++t) {
        const auto label = parse_label<Intention>(t.key(), "triggers");
        s.triggers[index_of(label)] = t->get<std::vector<std::string>>();
      }
    } else {
      throw ConfigError("unknown synthetic spec key '" + k + "'");
    }
  }
  s.validate();
  return s;
}

inline json to_json(const SyntheticSpec& s) {
  json trig = json::object();
  for (std::size_t c = 0; c < kNumIntentions; ++c)
    trig[std::string(kIntentionNames[c])] = s.triggers[c];
  return json{{"count", s.count},           {"vocab_size", s.vocab_size},
              {"injection_rate", s.injection_rate}, {"cue_rate", s.cue_rate},
              {"satisfied_rate", s.satisfied_rate}, {"emotion_cue_rate", s.emotion_cue_rate},
              {"min_filler", s.min_filler}, {"max_filler", s.max_filler},
              {"polarity_rule", "strict"},  {"triggers", trig}};
}

/// Listener response phrases keyed by emotion; each implies the emotion's
/// satisfaction side of the polarity rule.
inline const std::array<std::string, kNumEmotions>& emotion_response_phrases() {
  static const std::array<std::string, kNumEmotions> phrases = {
      "of course , gladly", "okay , that works", "maybe another time",
      "sorry , we ran out", "absolutely not , go away", "that is disgusting"};
  return phrases;
}

inline const std::array<std::string, kNumSatisfaction>& satisfaction_response_phrases() {
  static const std::array<std::string, kNumSatisfaction> phrases = {"here you go",
                                                                    "i can not help"};
  return phrases;
}

namespace detail {
inline std::string pseudo_word(std::size_t index) {
  static constexpr std::array<std::string_view, 16> syllables = {
      "ba", "ke", "lo", "mi", "nu", "ra", "si", "to", "ve", "zo", "du", "fa", "gi", "ho", "pe", "ty"};
  std::string w;
  std::size_t v = index;
  do {
    w += syllables[v % 16];
    v /= 16;
  } while (v > 0);
  return w + "x";
}
}  // namespace detail

inline Corpus generate_synthetic_corpus(const SyntheticSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  std::vector<std::string> shared;
  std::array<std::vector<std::string>, kNumIntentions> pools;
  const std::size_t n_shared = spec.vocab_size / 2;
  for (std::size_t i = 0; i < spec.vocab_size; ++i) {
    auto w = detail::pseudo_word(i);
    if (i < n_shared) shared.push_back(std::move(w));
    else pools[(i - n_shared) % kNumIntentions].push_back(std::move(w));
  }
  const std::array<Emotion, 2> positive = {Emotion::happy, Emotion::content};
  const std::array<Emotion, 4> non_positive = {Emotion::neutral, Emotion::sadness, Emotion::anger,
                                               Emotion::disgust};

  auto fillers = [&](std::size_t c, std::size_t n) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) {
      const bool cue = bernoulli(rng, spec.cue_rate);
      const auto& pool = cue ? pools[c] : shared;
      out.push_back(pool[uniform_index(rng, pool.size())]);
    }
    return out;
  };
  auto filler_count = [&] {
    return spec.min_filler + uniform_index(rng, spec.max_filler - spec.min_filler + 1);
  };

  std::vector<ConversationPair> pairs;
  pairs.reserve(spec.count);
  for (std::size_t k = 0; k < spec.count; ++k) {
    ConversationPair p;
    char id[32];
    std::snprintf(id, sizeof id, "syn-%06zu", k);
    p.id = id;

    const std::size_t c = uniform_index(rng, kNumIntentions);
    p.intention_s = label_at<Intention>(c);
    auto words = fillers(c, filler_count());
    if (bernoulli(rng, spec.injection_rate)) {
      const auto& phrases = spec.triggers[c];
      const auto& phrase = phrases[uniform_index(rng, phrases.size())];
      const auto pos = uniform_index(rng, words.size() + 1);
      words.insert(words.begin() + static_cast<std::ptrdiff_t>(pos), phrase);
    }
    p.utterance_s = join(words);
    p.utterance_s += p.intention_s == Intention::question ? " ?" : " .";

    const bool satisfied = bernoulli(rng, spec.satisfied_rate);
    p.satisfaction = satisfied ? Satisfaction::satisfied : Satisfaction::unsatisfied;
    p.emotion_s = satisfied ? positive[uniform_index(rng, positive.size())]
                            : non_positive[uniform_index(rng, non_positive.size())];
    p.intention_r = p.intention_s == Intention::question
                        ? Intention::inform
                        : (satisfied ? Intention::accept : Intention::reject);

    std::string response = bernoulli(rng, spec.emotion_cue_rate)
                               ? emotion_response_phrases()[index_of(p.emotion_s)]
                               : satisfaction_response_phrases()[index_of(p.satisfaction)];
    auto tail = fillers(index_of(p.intention_r), 1 + uniform_index(rng, 3));
    p.utterance_r = response + " " + join(tail) + " .";
    pairs.push_back(std::move(p));
  }
  return Corpus(std::move(pairs));
}

/// True when the utterance contains one of the intention's trigger phrases
/// as a contiguous token span.
inline bool contains_trigger(const SyntheticSpec& spec, Intention c, std::string_view utterance) {
  const auto toks = tokenize(utterance);
  for (const auto& phrase : spec.triggers[index_of(c)]) {
    const auto ptoks = tokenize(phrase);
    if (ptoks.empty() || ptoks.size() > toks.size()) continue;
    for (std::size_t i = 0; i + ptoks.size() <= toks.size(); ++i)
      if (std::equal(ptoks.begin(), ptoks.end(), toks.begin() + static_cast<std::ptrdiff_t>(i)))
        return true;
  }
  return false;
}

}  // namespace cogintac
