#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

#include "cogintac/error.hpp"

namespace cogintac {

enum class Intention { request, suggest, command, accept, reject, question, inform };
enum class Emotion { happy, content, neutral, sadness, anger, disgust };
enum class Polarity { positive, neutral, negative };
enum class Satisfaction { satisfied, unsatisfied };

inline constexpr std::size_t kNumIntentions = 7;
inline constexpr std::size_t kNumEmotions = 6;
inline constexpr std::size_t kNumSatisfaction = 2;

inline constexpr std::array<std::string_view, kNumIntentions> kIntentionNames = {
    "request", "suggest", "command", "accept", "reject", "question", "inform"};
inline constexpr std::array<std::string_view, kNumEmotions> kEmotionNames = {
    "happy", "content", "neutral", "sadness", "anger", "disgust"};
inline constexpr std::array<std::string_view, kNumSatisfaction> kSatisfactionNames = {
    "satisfied", "unsatisfied"};
inline constexpr std::array<std::string_view, 3> kPolarityNames = {"positive", "neutral",
                                                                  "negative"};

/// Compile-time description of a closed label set, used by generic code
/// (argmax decoding, metrics, stats).
template <typename Label>
struct LabelTraits;

template <>
struct LabelTraits<Intention> {
  static constexpr std::size_t size = kNumIntentions;
  static constexpr const auto& names = kIntentionNames;
};
template <>
struct LabelTraits<Emotion> {
  static constexpr std::size_t size = kNumEmotions;
  static constexpr const auto& names = kEmotionNames;
};
template <>
struct LabelTraits<Satisfaction> {
  static constexpr std::size_t size = kNumSatisfaction;
  static constexpr const auto& names = kSatisfactionNames;
};
template <>
struct LabelTraits<Polarity> {
  static constexpr std::size_t size = 3;
  static constexpr const auto& names = kPolarityNames;
};

template <typename Label>
constexpr std::size_t index_of(Label l) {
  return static_cast<std::size_t>(l);
}

template <typename Label>
Label label_at(std::size_t i) {
  if (i >= LabelTraits<Label>::size) throw InputError("label index out of range");
  return static_cast<Label>(i);
}

template <typename Label>
std::string_view to_string(Label l) {
  return LabelTraits<Label>::names[index_of(l)];
}

template <typename Label>
std::optional<Label> try_parse(std::string_view s) {
  const auto& names = LabelTraits<Label>::names;
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == s) return static_cast<Label>(i);
  return std::nullopt;
}

/// Parses a lowercase label string; throws LabelError naming `field`.
template <typename Label>
Label parse_label(std::string_view s, std::string_view field) {
  if (auto l = try_parse<Label>(s)) return *l;
  throw LabelError(std::string(field), std::string(s));
}

constexpr Polarity polarity(Emotion e) {
  switch (e) {
    case Emotion::happy:
    case Emotion::content:
      return Polarity::positive;
    case Emotion::neutral:
      return Polarity::neutral;
    default:
      return Polarity::negative;
  }
}

}  // namespace cogintac
