#include <gtest/gtest.h>

#include <sstream>

#include "cogintac/intdic.hpp"
#include "cogintac/synthetic.hpp"

using namespace cogintac;

namespace {

ConversationPair speaker(const std::string& id, const std::string& text, Intention c) {
  return {id, text, "ok", c, Intention::inform, Emotion::neutral, Satisfaction::unsatisfied};
}

/// Occurrences of `key` in the utterance, counted on the space-padded token
/// string rather than through the n-gram enumerator.
std::size_t occurrences(const std::string& key, const std::string& utterance) {
  const std::string hay = " " + join(tokenize(utterance)) + " ", needle = " " + key + " ";
  std::size_t n = 0;
  for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) ++n;
  return n;
}

Corpus synthetic(std::size_t count, std::uint64_t seed) {
  SyntheticSpec spec;
  spec.count = count;
  spec.vocab_size = 40;
  return generate_synthetic_corpus(spec, seed);
}

void expect_distribution(const IntentionScores& a) {
  double s = 0;
  for (double v : a) {
    EXPECT_GE(v, 0.0);
    s += v;
  }
  EXPECT_NEAR(s, 1.0, 1e-9);
}

}  // namespace

TEST(IntDic, PaperKeywordMapsToRequest) {
  std::vector<ConversationPair> ps;
  ps.push_back(speaker("1", "I ask for a cup of tea", Intention::request));
  ps.push_back(speaker("2", "Could I ask for the bill", Intention::request));
  ps.push_back(speaker("3", "I think the tea is cold", Intention::inform));
  ps.push_back(speaker("4", "Is the tea hot?", Intention::question));
  const auto d = build_dictionary(Corpus(ps));
  ASSERT_TRUE(d.entries().count("ask for"));
  EXPECT_EQ(argmax(d.entries().at("ask for")), index_of(Intention::request));
  // m = 0.1: (2 + 0.1) / (2 + 0.7)
  EXPECT_NEAR(d.entries().at("ask for")[0], 2.1 / 2.7, 1e-15);
  EXPECT_NEAR(d.entries().at("ask for")[1], 0.1 / 2.7, 1e-15);
}

TEST(IntDic, UniformNgramExcluded) {
  std::vector<ConversationPair> ps;
  for (std::size_t c = 0; c < kNumIntentions; ++c)
    ps.push_back(speaker(std::to_string(c), "common word " + std::string(kIntentionNames[c]) + "x",
                         label_at<Intention>(c)));
  const auto d = build_dictionary(Corpus(ps), {.min_count = 1});
  EXPECT_FALSE(d.entries().count("common"));
  EXPECT_FALSE(d.entries().count("common word"));
  EXPECT_TRUE(d.entries().count("requestx"));
}

TEST(IntDic, EmptyCorpusAndBadConfig) {
  EXPECT_THROW(build_dictionary(Corpus{}), DataError);
  EXPECT_THROW(build_dictionary(synthetic(10, 1), {.min_count = 0}), ConfigError);
  EXPECT_THROW(build_dictionary(synthetic(10, 1), {.smoothing_mass = 0.0}), ConfigError);
}

TEST(IntDic, ScoresMatchBruteForceOracle) {
  for (std::uint64_t seed : {1u, 2u, 3u, 4u}) {
    const auto corpus = synthetic(seed == 1 ? 50 : 100, seed);
    const DictConfig cfg{.min_count = 2, .max_entries = 100000, .smoothing_mass = 0.1, .max_ngram = 3};
    const auto d = build_dictionary(corpus, cfg);
    ASSERT_GT(d.size(), 0u);
    for (const auto& [key, scores] : d.entries()) {
      std::array<std::size_t, kNumIntentions> per{};
      std::size_t total = 0;
      for (const auto& p : corpus) {
        const auto k = occurrences(key, p.utterance_s);
        per[index_of(p.intention_s)] += k;
        total += k;
      }
      ASSERT_GE(total, cfg.min_count) << key;
      for (std::size_t c = 0; c < kNumIntentions; ++c)
        EXPECT_EQ(scores[c], (static_cast<double>(per[c]) + 0.1) / (static_cast<double>(total) + 0.7))
            << key;
    }
    // Every excluded n-gram fails the count or concentration threshold.
    std::map<std::string, std::array<std::size_t, kNumIntentions>> all;
    for (const auto& p : corpus)
      for (const auto& g : ngrams(tokenize(p.utterance_s), 3)) ++all[g][index_of(p.intention_s)];
    for (const auto& [g, per] : all) {
      if (d.entries().count(g)) continue;
      std::size_t total = 0, best = 0;
      for (auto v : per) total += v, best = std::max(best, v);
      EXPECT_TRUE(total < cfg.min_count || 7 * best <= total) << g;
    }
  }
}

TEST(IntDic, MaxEntriesKeepsMostConcentrated) {
  const auto corpus = synthetic(100, 5);
  const auto full = build_dictionary(corpus, {.max_entries = 100000});
  const auto top = build_dictionary(corpus, {.max_entries = 10});
  ASSERT_EQ(top.size(), 10u);
  double min_kept = 1.0;
  for (const auto& [k, s] : top.entries()) min_kept = std::min(min_kept, *std::max_element(s.begin(), s.end()));
  for (const auto& [k, s] : full.entries())
    if (!top.entries().count(k)) EXPECT_LE(*std::max_element(s.begin(), s.end()), min_kept) << k;
}

TEST(IntDic, PermutationInvariant) {
  const auto corpus = synthetic(150, 8);
  std::vector<ConversationPair> ps(corpus.begin(), corpus.end());
  Rng rng(1);
  for (int r = 0; r < 3; ++r) {
    shuffle(ps, rng);
    const auto a = build_dictionary(corpus), b = build_dictionary(Corpus(ps));
    EXPECT_EQ(a.entries(), b.entries());
  }
}

TEST(Lookup, SingleMatchNoMatchAndSymmetry) {
  std::map<std::string, IntentionScores> e;
  e["ask for"] = {0.7, 0.2, 0.02, 0.02, 0.02, 0.02, 0.02};
  e["how about"] = {0.2, 0.7, 0.02, 0.02, 0.02, 0.02, 0.02};
  const IntentionDictionary d(e, {}, "hand");
  EXPECT_EQ(d.lookup("I ask for it").alpha, e["ask for"]);
  for (double v : d.lookup("nothing here").alpha) EXPECT_DOUBLE_EQ(v, 1.0 / 7.0);
  const auto a = d.lookup("how about I ask for it").alpha;
  EXPECT_NEAR(a[0], 0.45, 1e-12);
  EXPECT_NEAR(a[1], 0.45, 1e-12);
  EXPECT_DOUBLE_EQ(a[0], a[1]);
  // Repeated occurrences count each time: (2 * 0.7 + 0.2) / 3.
  EXPECT_NEAR(d.lookup("ask for , ask for , how about").alpha[0], 1.6 / 3.0, 1e-12);
}

TEST(Lookup, RandomTextAlwaysDistribution) {
  const auto d = build_dictionary(synthetic(400, 3));
  Rng rng(99);
  const std::string alphabet = "abcdefghijklmnopqrstuvwxyz x?.,!'";
  std::vector<std::string> words;
  for (const auto& [k, _] : d.entries()) words.push_back(k);
  for (int t = 0; t < 1000; ++t) {
    std::string s;
    const auto len = uniform_index(rng, 40);
    for (std::size_t i = 0; i < len; ++i) {
      if (bernoulli(rng, 0.2)) s += " " + words[uniform_index(rng, words.size())] + " ";
      else s += alphabet[uniform_index(rng, alphabet.size())];
    }
    expect_distribution(d.lookup(s).alpha);
  }
}

// Appending one occurrence of keyword g moves alpha[c] toward v_g[c]:
// with S the current sum over k matches, (S_c + v_c)/(k + 1) - S_c/k has the
// sign of v_c - S_c/k. In particular alpha[c] never decreases when v_c is the
// largest score in both the entry and the current alpha.
TEST(Lookup, AddedEvidenceMovesTowardKeywordVector) {
  const auto d = build_dictionary(synthetic(400, 4));
  std::vector<std::pair<std::string, IntentionScores>> entries(d.entries().begin(), d.entries().end());
  // Keywords whose proper sub-n-grams are not entries, so appending one adds
  // exactly one match.
  std::vector<std::pair<std::string, IntentionScores>> atomic;
  for (const auto& [g, v] : entries) {
    bool alone = true;
    for (const auto& sub : ngrams(tokenize(g), 3))
      if (sub != g && d.entries().count(sub)) alone = false;
    if (alone) atomic.emplace_back(g, v);
  }
  ASSERT_GT(atomic.size(), 20u);
  Rng rng(5);
  std::size_t argmax_case = 0;
  for (int t = 0; t < 1000; ++t) {
    std::string u;
    const auto k = 1 + uniform_index(rng, 4);
    for (std::size_t i = 0; i < k; ++i) u += entries[uniform_index(rng, entries.size())].first + " | ";
    const auto& [g, v] = atomic[uniform_index(rng, atomic.size())];
    const auto before = d.lookup(u).alpha;
    const auto after = d.lookup(u + " | " + g).alpha;
    for (std::size_t c = 0; c < kNumIntentions; ++c) {
      const double delta = after[c] - before[c], toward = v[c] - before[c];
      if (std::abs(toward) < 1e-12) continue;
      EXPECT_GE(delta * toward, -1e-15) << g << " " << c;
      EXPECT_LE(std::abs(after[c] - v[c]), std::abs(before[c] - v[c]) + 1e-15);
    }
    const auto c = argmax(v);
    if (v[c] >= before[c]) {
      ++argmax_case;
      EXPECT_GE(after[c], before[c] - 1e-15);
    }
  }
  EXPECT_GT(argmax_case, 100u);
}

TEST(Persistence, RoundTripAndByteStable) {
  const auto d = build_dictionary(synthetic(300, 6), {.max_entries = 100});
  ASSERT_EQ(d.size(), 100u);
  std::stringstream a;
  save_dictionary(d, a);
  const auto back = load_dictionary(a);
  EXPECT_EQ(back, d);
  std::stringstream b, c;
  save_dictionary(d, b);
  save_dictionary(back, c);
  EXPECT_EQ(b.str(), c.str());
  EXPECT_EQ(back.fingerprint(), d.fingerprint());
}

TEST(Persistence, CorruptFilesRejected) {
  const auto d = build_dictionary(synthetic(100, 6));
  std::stringstream full;
  save_dictionary(d, full);
  const auto text = full.str();
  std::stringstream truncated(text.substr(0, text.size() / 2));
  EXPECT_THROW(load_dictionary(truncated), FormatError);

  auto j = to_json(d);
  j["version"] = 2;
  EXPECT_THROW(dictionary_from_json(j), FormatError);

  j = to_json(d);
  j["entries"]["half"] = {0.1, 0.1, 0.1, 0.1, 0.05, 0.05, 0.0};
  EXPECT_THROW(dictionary_from_json(j), InvariantError);

  j = to_json(d);
  j["entries"]["Upper Case"] = {1, 0, 0, 0, 0, 0, 0};
  EXPECT_THROW(dictionary_from_json(j), InvariantError);

  j = to_json(d);
  j["entries"]["short"] = {1.0};
  EXPECT_THROW(dictionary_from_json(j), FormatError);
}
