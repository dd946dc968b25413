#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "cogintac/error.hpp"
#include "cogintac/labels.hpp"
#include "cogintac/random.hpp"
#include "cogintac/text.hpp"

namespace cogintac {

using json = nlohmann::json;

/// One single-turn exchange with speaker/listener intentions, the speaker's
/// emotional reaction and whether the listener satisfied the speaker.
struct ConversationPair {
  std::string id;
  std::string utterance_s;
  std::string utterance_r;
  Intention intention_s = Intention::request;
  Intention intention_r = Intention::request;
  Emotion emotion_s = Emotion::neutral;
  Satisfaction satisfaction = Satisfaction::satisfied;

  bool operator==(const ConversationPair&) const = default;
};

/// motives_s -> action_s -> action_r -> emotional_reaction_s.
struct InteractionChain {
  struct Motives {
    Intention intention;
    Polarity emotional_expectation = Polarity::positive;
  };
  Motives motives_s;
  std::string action_s;
  std::string action_r;
  Emotion emotional_reaction_s;

  static constexpr std::array<std::string_view, 4> node_order = {
      "motives_s", "action_s", "action_r", "emotional_reaction_s"};
};

inline InteractionChain make_chain(const ConversationPair& p) {
  return InteractionChain{{p.intention_s, Polarity::positive}, p.utterance_s, p.utterance_r,
                          p.emotion_s};
}

enum class SplitTag { train, val, test };

inline std::string_view to_string(SplitTag t) {
  switch (t) {
    case SplitTag::train:
      return "train";
    case SplitTag::val:
      return "val";
    default:
      return "test";
  }
}

/// Ordered collection of pairs with unique ids. Immutable once built.
class Corpus {
 public:
  Corpus() = default;
  explicit Corpus(std::vector<ConversationPair> pairs, std::optional<SplitTag> tag = std::nullopt)
      : pairs_(std::move(pairs)), split_(tag) {
    std::unordered_set<std::string> seen;
    for (const auto& p : pairs_)
      if (!seen.insert(p.id).second) throw DataError("duplicate pair id '" + p.id + "'");
  }

  const std::vector<ConversationPair>& pairs() const { return pairs_; }
  std::optional<SplitTag> split() const { return split_; }
  std::size_t size() const { return pairs_.size(); }
  bool empty() const { return pairs_.empty(); }
  const ConversationPair& operator[](std::size_t i) const { return pairs_[i]; }
  auto begin() const { return pairs_.begin(); }
  auto end() const { return pairs_.end(); }

 private:
  std::vector<ConversationPair> pairs_;
  std::optional<SplitTag> split_;
};

// ---------------------------------------------------------------------------
// Validation

struct Violation {
  std::string invariant;
  std::string message;
};

inline std::vector<Violation> validate_pair(const ConversationPair& p) {
  std::vector<Violation> out;
  if (tokenize(p.utterance_s).empty())
    out.push_back({"non_empty_utterance_s", "speaker utterance has no tokens"});
  if (tokenize(p.utterance_r).empty())
    out.push_back({"non_empty_utterance_r", "listener utterance has no tokens"});
  const Polarity pol = polarity(p.emotion_s);
  if (p.satisfaction == Satisfaction::satisfied && pol != Polarity::positive)
    out.push_back({"satisfaction_polarity",
                   "satisfied pair with non-positive emotion '" +
                       std::string(to_string(p.emotion_s)) + "'"});
  if (p.satisfaction == Satisfaction::unsatisfied && pol == Polarity::positive)
    out.push_back({"satisfaction_polarity",
                   "unsatisfied pair with positive emotion '" +
                       std::string(to_string(p.emotion_s)) + "'"});
  return out;
}

inline bool is_hard_violation(const Violation& v) { return v.invariant != "satisfaction_polarity"; }

// ---------------------------------------------------------------------------
// JSON-lines records

inline constexpr std::array<std::string_view, 7> kRecordKeys = {
    "id", "utterance_s", "utterance_r", "intention_s", "intention_r", "emotion_s", "satisfaction"};

inline json to_json(const ConversationPair& p) {
  return json{{"id", p.id},
              {"utterance_s", p.utterance_s},
              {"utterance_r", p.utterance_r},
              {"intention_s", to_string(p.intention_s)},
              {"intention_r", to_string(p.intention_r)},
              {"emotion_s", to_string(p.emotion_s)},
              {"satisfaction", to_string(p.satisfaction)}};
}

/// Converts one decoded record. Throws FormatError on a wrong key set or
/// non-string value, LabelError on an unknown label.
inline ConversationPair pair_from_json(const json& j) {
  if (!j.is_object()) throw FormatError("record is not a JSON object");
  for (auto key : kRecordKeys)
    if (!j.contains(key)) throw FormatError("missing key '" + std::string(key) + "'");
  if (j.size() != kRecordKeys.size()) throw FormatError("unexpected extra keys in record");
  auto str = [&](std::string_view key) {
    const auto& v = j.at(std::string(key));
    if (!v.is_string()) throw FormatError("key '" + std::string(key) + "' is not a string");
    return v.get<std::string>();
  };
  ConversationPair p;
  p.id = str("id");
  p.utterance_s = str("utterance_s");
  p.utterance_r = str("utterance_r");
  p.intention_s = parse_label<Intention>(str("intention_s"), "intention_s");
  p.intention_r = parse_label<Intention>(str("intention_r"), "intention_r");
  p.emotion_s = parse_label<Emotion>(str("emotion_s"), "emotion_s");
  p.satisfaction = parse_label<Satisfaction>(str("satisfaction"), "satisfaction");
  return p;
}

struct RecordIssue {
  std::size_t line = 0;
  std::string id;
  std::string field;  // empty for whole-record issues
  std::string message;
};

struct ParseResult {
  Corpus corpus;
  std::vector<RecordIssue> errors;    // records rejected
  std::vector<RecordIssue> warnings;  // records accepted with soft violations
};

/// Reads JSON-lines. Blank lines are skipped. A line that is not valid JSON
/// aborts with ParseError; records with bad labels, missing keys, empty
/// utterances or duplicate ids are rejected and reported in `errors`.
inline ParseResult parse_corpus(std::istream& in) {
  ParseResult result;
  std::vector<ConversationPair> pairs;
  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(line_no, std::string("malformed JSON: ") + e.what());
    }
    std::string id = j.is_object() && j.contains("id") && j["id"].is_string()
                         ? j["id"].get<std::string>()
                         : std::string{};
    ConversationPair p;
    try {
      p = pair_from_json(j);
    } catch (const LabelError& e) {
      result.errors.push_back({line_no, id, e.field, e.what()});
      continue;
    } catch (const FormatError& e) {
      result.errors.push_back({line_no, id, "", e.what()});
      continue;
    }
    if (!ids.insert(p.id).second) {
      result.errors.push_back({line_no, p.id, "id", "duplicate id"});
      continue;
    }
    bool hard = false;
    for (const auto& v : validate_pair(p)) {
      if (is_hard_violation(v)) {
        result.errors.push_back({line_no, p.id, v.invariant, v.message});
        hard = true;
      } else {
        result.warnings.push_back({line_no, p.id, v.invariant, v.message});
      }
    }
    if (!hard) pairs.push_back(std::move(p));
  }
  result.corpus = Corpus(std::move(pairs));
  return result;
}

/// Strict variant: any rejected record is an error.
inline Corpus load_corpus(std::istream& in) {
  auto r = parse_corpus(in);
  if (!r.errors.empty()) {
    const auto& e = r.errors.front();
    if (!e.field.empty() && e.message.rfind("unknown label", 0) == 0)
      throw LabelError(e.field, e.message);
    throw DataError("line " + std::to_string(e.line) + ": " + e.message);
  }
  return std::move(r.corpus);
}

inline void write_corpus(std::ostream& out, const Corpus& corpus) {
  for (const auto& p : corpus) out << to_json(p).dump() << '\n';
}

inline std::string corpus_fingerprint(const Corpus& corpus) {
  Fingerprint fp;
  for (const auto& p : corpus) fp.update(to_json(p).dump()).update("\n");
  return fp.hex();
}

// ---------------------------------------------------------------------------
// Splitting

struct SplitRatios {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

struct SplitSizes {
  std::size_t train, val, test;
  bool operator==(const SplitSizes&) const = default;
};

/// Train gets floor(n * train); the remainder is divided between val and
/// test in proportion, with val taking the odd element.
inline SplitSizes split_sizes(std::size_t n, const SplitRatios& r) {
  if (r.train < 0 || r.val < 0 || r.test < 0 ||
      std::abs(r.train + r.val + r.test - 1.0) > 1e-9)
    throw ConfigError("split ratios must be non-negative and sum to 1");
  const auto train = static_cast<std::size_t>(std::floor(static_cast<double>(n) * r.train + 1e-9));
  const std::size_t rem = n - std::min(train, n);
  std::size_t val = 0;
  if (r.val + r.test > 0)
    val = static_cast<std::size_t>(
        std::ceil(static_cast<double>(rem) * r.val / (r.val + r.test) - 1e-9));
  val = std::min(val, rem);
  return {train, val, rem - val};
}

struct CorpusSplit {
  Corpus train, val, test;
};

inline CorpusSplit split_corpus(const Corpus& corpus, std::uint64_t seed,
                                const SplitRatios& ratios = {}) {
  const auto sizes = split_sizes(corpus.size(), ratios);
  if (corpus.empty()) throw DataError("cannot split an empty corpus");
  std::vector<std::size_t> order(corpus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  shuffle(order, rng);
  auto take = [&](std::size_t from, std::size_t count, SplitTag tag) {
    std::vector<ConversationPair> out;
    out.reserve(count);
    for (std::size_t i = from; i < from + count; ++i) out.push_back(corpus[order[i]]);
    return Corpus(std::move(out), tag);
  };
  return {take(0, sizes.train, SplitTag::train), take(sizes.train, sizes.val, SplitTag::val),
          take(sizes.train + sizes.val, sizes.test, SplitTag::test)};
}

// ---------------------------------------------------------------------------
// Statistics

template <std::size_t N>
struct Distribution {
  std::array<std::size_t, N> counts{};
  std::size_t total() const {
    std::size_t t = 0;
    for (auto c : counts) t += c;
    return t;
  }
  double proportion(std::size_t i) const {
    const auto t = total();
    return t == 0 ? 0.0 : static_cast<double>(counts[i]) / static_cast<double>(t);
  }
};

struct StatsReport {
  std::size_t pairs = 0;
  Distribution<kNumIntentions> intention_s, intention_r;
  Distribution<kNumEmotions> emotion_s;
  Distribution<kNumSatisfaction> satisfaction;
  std::map<std::size_t, std::size_t> length_s, length_r;  // token length -> count
  std::size_t consistency_violations = 0;

  double consistency_violation_rate() const {
    return pairs == 0 ? 0.0 : static_cast<double>(consistency_violations) / pairs;
  }
};

inline StatsReport corpus_stats(const Corpus& corpus) {
  StatsReport r;
  r.pairs = corpus.size();
  for (const auto& p : corpus) {
    ++r.intention_s.counts[index_of(p.intention_s)];
    ++r.intention_r.counts[index_of(p.intention_r)];
    ++r.emotion_s.counts[index_of(p.emotion_s)];
    ++r.satisfaction.counts[index_of(p.satisfaction)];
    ++r.length_s[tokenize(p.utterance_s).size()];
    ++r.length_r[tokenize(p.utterance_r).size()];
    for (const auto& v : validate_pair(p))
      if (!is_hard_violation(v)) ++r.consistency_violations;
  }
  return r;
}

namespace detail {
template <typename Label, std::size_t N>
json distribution_json(const Distribution<N>& d) {
  json counts = json::object(), props = json::object();
  for (std::size_t i = 0; i < N; ++i) {
    const std::string name(LabelTraits<Label>::names[i]);
    counts[name] = d.counts[i];
    props[name] = d.proportion(i);
  }
  return json{{"counts", counts}, {"proportions", props}};
}

inline json histogram_json(const std::map<std::size_t, std::size_t>& h) {
  json out = json::object();
  for (auto [len, count] : h) out[std::to_string(len)] = count;
  return out;
}
}  // namespace detail

inline json to_json(const StatsReport& r) {
  return json{{"pairs", r.pairs},
              {"intention_s", detail::distribution_json<Intention>(r.intention_s)},
              {"intention_r", detail::distribution_json<Intention>(r.intention_r)},
              {"emotion_s", detail::distribution_json<Emotion>(r.emotion_s)},
              {"satisfaction", detail::distribution_json<Satisfaction>(r.satisfaction)},
              {"length_s", detail::histogram_json(r.length_s)},
              {"length_r", detail::histogram_json(r.length_r)},
              {"consistency_violations", r.consistency_violations},
              {"consistency_violation_rate", r.consistency_violation_rate()}};
}

inline std::string render_stats_table(const StatsReport& r) {
  std::ostringstream os;
  os << "pairs: " << r.pairs << "\n";
  auto section = [&](const std::string& title, auto label_tag, const auto& dist) {
    using Label = decltype(label_tag);
    os << "\n" << title << "\n";
    os << std::left << std::setw(14) << "label" << std::right << std::setw(8) << "count"
       << std::setw(12) << "proportion" << "\n";
    for (std::size_t i = 0; i < LabelTraits<Label>::size; ++i)
      os << std::left << std::setw(14) << LabelTraits<Label>::names[i] << std::right
         << std::setw(8) << dist.counts[i] << std::setw(12) << std::fixed << std::setprecision(4)
         << dist.proportion(i) << "\n";
  };
  section("intention_s", Intention{}, r.intention_s);
  section("intention_r", Intention{}, r.intention_r);
  section("emotion_s", Emotion{}, r.emotion_s);
  section("satisfaction", Satisfaction{}, r.satisfaction);
  auto hist = [&](const std::string& title, const std::map<std::size_t, std::size_t>& h) {
    os << "\n" << title << "\n" << std::left << std::setw(14) << "tokens" << std::right
       << std::setw(8) << "count" << "\n";
    for (auto [len, count] : h)
      os << std::left << std::setw(14) << len << std::right << std::setw(8) << count << "\n";
  };
  hist("length_s", r.length_s);
  hist("length_r", r.length_r);
  os << "\nconsistency violations: " << r.consistency_violations << " (rate " << std::fixed
     << std::setprecision(4) << r.consistency_violation_rate() << ")\n";
  return os.str();
}

}  // namespace cogintac
