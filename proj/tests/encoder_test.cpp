#include <gtest/gtest.h>

#include <sstream>

#include "cogintac/encoder.hpp"
#include "gradcheck.hpp"

using namespace cogintac;

namespace {

Corpus tiny_corpus() {
  ConversationPair a{"1", "a b", "a", Intention::request, Intention::accept, Emotion::happy,
                     Satisfaction::satisfied};
  return Corpus({a});
}

EncoderConfig small_config(bool attention = false) {
  EncoderConfig c;
  c.embedding_dim = 5;
  c.hidden = 6;
  c.attention = attention;
  return c;
}

}  // namespace

TEST(Vocabulary, BuildsWithSpecialsAndFrequencyOrder) {
  const auto v = build_vocab(tiny_corpus(), 1);
  ASSERT_EQ(v.size(), 4);
  EXPECT_EQ(v.token(0), "<pad>");
  EXPECT_EQ(v.token(1), "<unk>");
  EXPECT_EQ(v.token(2), "a");  // frequency 3 vs 1
  EXPECT_EQ(v.token(3), "b");
  const auto v2 = build_vocab(tiny_corpus(), 2);
  ASSERT_EQ(v2.size(), 3);
  EXPECT_TRUE(v2.contains("a"));
  EXPECT_FALSE(v2.contains("b"));
  EXPECT_EQ(v2.index("b"), Vocabulary::kUnk);
}

TEST(Vocabulary, RebuildIsStable) {
  std::vector<ConversationPair> ps;
  for (int i = 0; i < 50; ++i)
    ps.push_back({std::to_string(i), "w" + std::to_string(i % 7) + " x y", "z q" + std::to_string(i % 3),
                  Intention::inform, Intention::inform, Emotion::neutral, Satisfaction::unsatisfied});
  Corpus c(ps);
  EXPECT_EQ(build_vocab(c, 1), build_vocab(c, 1));
}

TEST(RecurrentEncoder, LengthPreservingAndFirstStateRepresentation) {
  Rng rng(1);
  nn::ParameterSet set;
  auto enc = RecurrentEncoder::create(set, "enc", small_config(), 10, rng);
  const auto one = enc.encode_values({3});
  ASSERT_EQ(one.hidden_states.size(), 1u);
  EXPECT_EQ(one.representation, one.hidden_states[0]);
  const auto many = enc.encode_values({3, 4, 5, 6});
  EXPECT_EQ(many.hidden_states.size(), 4u);
  EXPECT_EQ(many.representation, many.hidden_states[0]);
  EXPECT_EQ(many.representation.size(), 6);
}

TEST(RecurrentEncoder, DeterministicAndSensitiveToFirstToken) {
  Rng rng(2);
  nn::ParameterSet set;
  auto enc = RecurrentEncoder::create(set, "enc", small_config(), 10, rng);
  const auto a = enc.encode_values({3, 4, 5});
  const auto b = enc.encode_values({3, 4, 5});
  EXPECT_EQ(a.representation, b.representation);
  const auto c = enc.encode_values({7, 4, 5});
  EXPECT_GT((a.representation - c.representation).norm(), 1e-6);
}

TEST(RecurrentEncoder, OutOfRangeTokenIsAnEncodingError) {
  Rng rng(2);
  nn::ParameterSet set;
  auto enc = RecurrentEncoder::create(set, "enc", small_config(), 10, rng);
  EXPECT_THROW(enc.encode_values({3, 10}), InputError);
  EXPECT_THROW(enc.encode_values({}), InputError);
}

TEST(Attention, SingleStateReturnsValueProjection) {
  Rng rng(3);
  nn::ParameterSet set;
  auto enc = RecurrentEncoder::create(set, "enc", small_config(true), 10, rng);
  nn::Tape t;
  const Vector h = Vector::LinSpaced(6, -1, 1);
  auto r = enc.attend(t, {nn::constant(t, h)});
  const Vector expected = set.get("enc.attn.value").value * h;
  EXPECT_LT((r.pooled.value() - expected).norm(), 1e-12);
  EXPECT_NEAR(r.weights[0](0), 1.0, 1e-12);
}

TEST(Attention, UniformLogitsGiveMeanOfValues) {
  Rng rng(4);
  nn::ParameterSet set;
  auto enc = RecurrentEncoder::create(set, "enc", small_config(true), 10, rng);
  set.get("enc.attn.query").value.setZero();  // all logits zero
  nn::Tape t;
  std::vector<Expr> hs;
  Vector mean = Vector::Zero(6);
  for (int i = 0; i < 4; ++i) {
    Vector h = Vector::Constant(6, 0.1 * i) + Vector::LinSpaced(6, 0, 1);
    hs.push_back(nn::constant(t, h));
    mean += set.get("enc.attn.value").value * h / 4.0;
  }
  auto r = enc.attend(t, hs);
  EXPECT_LT((r.pooled.value() - mean).norm(), 1e-12);
}

TEST(Attention, RowsAreDistributionsAndPaddingIsIgnored) {
  Rng rng(5);
  nn::ParameterSet set;
  auto enc = RecurrentEncoder::create(set, "enc", small_config(true), 10, rng);
  for (int trial = 0; trial < 50; ++trial) {
    nn::Tape t;
    std::vector<Expr> hs;
    for (int i = 0; i < 5; ++i) {
      Vector h(6);
      for (int j = 0; j < 6; ++j) h(j) = uniform(rng, -3, 3);
      hs.push_back(nn::constant(t, h));
    }
    const std::vector<bool> mask{true, true, true, false, false};
    auto r = enc.attend(t, hs, mask);
    for (const auto& w : r.weights) {
      EXPECT_NEAR(w.sum(), 1.0, 1e-9);
      EXPECT_GE(w.minCoeff(), 0.0);
    }
    hs[3] = nn::constant(t, Vector::Constant(6, 100.0));
    auto r2 = enc.attend(t, hs, mask);
    EXPECT_LT((r.pooled.value() - r2.pooled.value()).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(RecurrentEncoder, EncoderWithAttentionGradientCheck) {
  Rng rng(6);
  nn::ParameterSet set;
  EncoderConfig cfg;
  cfg.embedding_dim = 3;
  cfg.hidden = 4;
  cfg.attention = true;
  auto enc = RecurrentEncoder::create(set, "enc", cfg, 6, rng);
  for (auto* p : set.all())
    for (Index i = 0; i < p->value.size(); ++i) p->value.data()[i] = uniform(rng, -1, 1);
  const Vector target = Vector::LinSpaced(4, -0.5, 0.5);
  auto loss = [&](Tape& t) {
    auto e = enc.encode(t, {2, 3, 5});
    auto d = nn::sub(e.representation, nn::constant(t, target));
    return nn::dot(d, d);
  };
  auto r = oracle::gradient_check(set, loss);
  EXPECT_LT(r.max_relative_error, 1e-4) << r.worst_parameter;
}

TEST(PretrainedVectors, LoadsMatchingRowsAndRejectsBadLines) {
  Rng rng(1);
  nn::ParameterSet set;
  const auto vocab = build_vocab(tiny_corpus(), 1);
  auto& table = set.add("emb", vocab.size(), 3, nn::Init::small_uniform, rng);
  std::istringstream good("a 1 2 3\nmissing 4 5 6\nb 7 8 9\n");
  EXPECT_EQ(load_pretrained_embeddings(good, vocab, table), 2u);
  EXPECT_EQ(table.value(vocab.index("a"), 1), 2.0);
  EXPECT_EQ(table.value(vocab.index("b"), 2), 9.0);
  std::istringstream bad("a 1 2\n");
  EXPECT_THROW(load_pretrained_embeddings(bad, vocab, table), FormatError);
}

TEST(ContextualEncoder, RegistryAndStubPlugins) {
  EXPECT_THROW(EncoderRegistry::instance().create("no-such-plugin"), ConfigError);
  const auto a = encode_external("constant", "hello there");
  const auto b = encode_external("constant", "hello there");
  EXPECT_EQ(a.representation, b.representation);
  EXPECT_EQ(a.representation.size(), 16);
  const auto h1 = encode_external("hashed-bow", "could you please");
  const auto h2 = encode_external("hashed-bow", "could you please");
  EXPECT_EQ(h1.representation, h2.representation);
  EXPECT_EQ(h1.hidden_states.size(), 3u);
}
