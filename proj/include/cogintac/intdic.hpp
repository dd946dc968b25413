#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "cogintac/corpus.hpp"
#include "cogintac/labels.hpp"
#include "cogintac/text.hpp"

namespace cogintac {

using IntentionScores = std::array<double, kNumIntentions>;

/// Prior over the seven intentions produced by the dictionary.
struct PriorDistribution {
  IntentionScores alpha{};

  static PriorDistribution uniform() {
    PriorDistribution p;
    p.alpha.fill(1.0 / kNumIntentions);
    return p;
  }
};

struct DictConfig {
  std::size_t min_count = 2;
  std::size_t max_entries = 5000;
  double smoothing_mass = 0.1;
  std::size_t max_ngram = 3;

  void validate() const {
    if (min_count < 1) throw ConfigError("min_count must be >= 1");
    if (!(smoothing_mass > 0.0)) throw ConfigError("smoothing_mass must be positive");
    if (max_ngram < 1 || max_ngram > 3) throw ConfigError("max_ngram must be in [1, 3]");
  }
  bool operator==(const DictConfig&) const = default;
};

/// All contiguous token spans of length 1..max_n, joined by single spaces.
inline std::vector<std::string> ngrams(const std::vector<std::string>& tokens, std::size_t max_n) {
  std::vector<std::string> out;
  for (std::size_t n = 1; n <= max_n; ++n)
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
      std::string g = tokens[i];
      for (std::size_t k = 1; k < n; ++k) g += ' ' + tokens[i + k];
      out.push_back(std::move(g));
    }
  return out;
}

/// Keyword -> per-intention distribution table. Immutable after build.
class IntentionDictionary {
 public:
  IntentionDictionary() = default;
  IntentionDictionary(std::map<std::string, IntentionScores> entries, DictConfig config,
                      std::string provenance)
      : entries_(std::move(entries)), config_(config), provenance_(std::move(provenance)) {
    check_invariants();
  }

  const std::map<std::string, IntentionScores>& entries() const { return entries_; }
  const DictConfig& config() const { return config_; }
  double smoothing_mass() const { return config_.smoothing_mass; }
  const std::string& provenance() const { return provenance_; }
  std::size_t size() const { return entries_.size(); }

  /// Normalized sum of the score vectors of every matching n-gram
  /// occurrence; uniform when nothing matches.
  PriorDistribution lookup(std::string_view utterance) const {
    IntentionScores sum{};
    std::size_t matches = 0;
    for (const auto& g : ngrams(tokenize(utterance), config_.max_ngram)) {
      auto it = entries_.find(g);
      if (it == entries_.end()) continue;
      for (std::size_t c = 0; c < kNumIntentions; ++c) sum[c] += it->second[c];
      ++matches;
    }
    if (matches == 0) return PriorDistribution::uniform();
    double total = 0.0;
    for (double v : sum) total += v;
    PriorDistribution p;
    for (std::size_t c = 0; c < kNumIntentions; ++c) p.alpha[c] = sum[c] / total;
    return p;
  }

  std::string fingerprint() const;

  bool operator==(const IntentionDictionary& o) const {
    return entries_ == o.entries_ && config_ == o.config_ && provenance_ == o.provenance_;
  }

 private:
  void check_invariants() const {
    for (const auto& [key, scores] : entries_) {
      if (key.empty() || key != normalize_phrase(key))
        throw InvariantError("dictionary key '" + key + "' is not normalized");
      double s = 0.0;
      for (double v : scores) {
        if (!(v >= 0.0) || !std::isfinite(v))
          throw InvariantError("negative or non-finite score for '" + key + "'");
        s += v;
      }
      if (std::abs(s - 1.0) > 1e-9)
        throw InvariantError("scores for '" + key + "' sum to " + std::to_string(s));
    }
  }

  std::map<std::string, IntentionScores> entries_;
  DictConfig config_;
  std::string provenance_;
};

/// Class-conditional smoothed n-gram frequencies over speaker utterances.
/// score(g, c) = (count_c(g) + m) / (count(g) + 7m); an n-gram is kept when
/// count(g) >= min_count and its best class holds strictly more than 1/7 of
/// its occurrences. The max_entries most concentrated n-grams survive, ties
/// broken by keyword order.
inline IntentionDictionary build_dictionary(const Corpus& train, const DictConfig& config = {}) {
  config.validate();
  if (train.empty()) throw DataError("cannot build a dictionary from an empty corpus");
  std::unordered_map<std::string, std::array<std::size_t, kNumIntentions>> counts;
  for (const auto& p : train)
    for (auto& g : ngrams(tokenize(p.utterance_s), config.max_ngram))
      ++counts[std::move(g)][index_of(p.intention_s)];

  struct Candidate {
    std::string key;
    IntentionScores scores;
    double concentration;
  };
  std::vector<Candidate> candidates;
  const double m = config.smoothing_mass;
  for (const auto& [key, per_class] : counts) {
    std::size_t total = 0, best = 0;
    for (auto c : per_class) total += c, best = std::max(best, c);
    if (total < config.min_count || 7 * best <= total) continue;
    Candidate cand{key, {}, 0.0};
    const double denom = static_cast<double>(total) + kNumIntentions * m;
    for (std::size_t c = 0; c < kNumIntentions; ++c) {
      cand.scores[c] = (static_cast<double>(per_class[c]) + m) / denom;
      cand.concentration = std::max(cand.concentration, cand.scores[c]);
    }
    candidates.push_back(std::move(cand));
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.concentration != b.concentration) return a.concentration > b.concentration;
    return a.key < b.key;
  });
  if (candidates.size() > config.max_entries) candidates.resize(config.max_entries);

  std::map<std::string, IntentionScores> entries;
  for (auto& c : candidates) entries.emplace(std::move(c.key), c.scores);
  return IntentionDictionary(std::move(entries), config, corpus_fingerprint(train));
}

inline json to_json(const IntentionDictionary& d) {
  json entries = json::object();
  for (const auto& [key, scores] : d.entries()) entries[key] = scores;
  return json{{"version", 1},
              {"smoothing_mass", d.smoothing_mass()},
              {"min_count", d.config().min_count},
              {"max_entries", d.config().max_entries},
              {"max_ngram", d.config().max_ngram},
              {"provenance", d.provenance()},
              {"entries", entries}};
}

inline IntentionDictionary dictionary_from_json(const json& j) {
  try {
    if (!j.is_object() || !j.contains("version") || !j.contains("entries") ||
        !j.contains("smoothing_mass"))
      throw FormatError("dictionary document lacks version/smoothing_mass/entries");
    if (j.at("version").get<int>() != 1)
      throw FormatError("unsupported dictionary version " + j.at("version").dump());
    DictConfig cfg;
    cfg.smoothing_mass = j.at("smoothing_mass").get<double>();
    cfg.min_count = j.value("min_count", cfg.min_count);
    cfg.max_entries = j.value("max_entries", cfg.max_entries);
    cfg.max_ngram = j.value("max_ngram", cfg.max_ngram);
    std::map<std::string, IntentionScores> entries;
    for (auto it = j.at("entries").begin(); it != j.at("entries").end(); ++it) {
      const auto v = it->get<std::vector<double>>();
      if (v.size() != kNumIntentions)
        throw FormatError("entry '" + it.key() + "' does not have 7 scores");
      IntentionScores s;
      std::copy(v.begin(), v.end(), s.begin());
      entries.emplace(it.key(), s);
    }
    return IntentionDictionary(std::move(entries), cfg, j.value("provenance", std::string{}));
  } catch (const json::exception& e) {
    throw FormatError(std::string("corrupt dictionary: ") + e.what());
  }
}

/// Keys are emitted sorted, so output is byte-stable.
inline void save_dictionary(const IntentionDictionary& d, std::ostream& out) {
  out << to_json(d).dump(1) << '\n';
}

inline IntentionDictionary load_dictionary(std::istream& in) {
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(std::string("corrupt dictionary file: ") + e.what());
  }
  return dictionary_from_json(j);
}

inline std::string IntentionDictionary::fingerprint() const {
  return Fingerprint().update(to_json(*this).dump()).hex();
}

/// Index of the largest entry; ties go to the lowest index.
template <typename Container>
std::size_t argmax(const Container& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < static_cast<std::size_t>(v.size()); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

}  // namespace cogintac
