#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <istream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cogintac/corpus.hpp"
#include "cogintac/nn/layers.hpp"
#include "cogintac/text.hpp"

namespace cogintac {

using nn::Expr;
using nn::Index;
using nn::Matrix;
using nn::Tape;
using nn::Vector;

// ---------------------------------------------------------------------------
// Vocabulary

class Vocabulary {
 public:
  static constexpr Index kPad = 0;
  static constexpr Index kUnk = 1;

  Vocabulary() : tokens_{"<pad>", "<unk>"} { rebuild_index(); }
  explicit Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    if (tokens_.size() < 2 || tokens_[0] != "<pad>" || tokens_[1] != "<unk>")
      throw FormatError("vocabulary must start with <pad>, <unk>");
    rebuild_index();
  }

  Index size() const { return static_cast<Index>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::string& token(Index i) const { return tokens_.at(static_cast<std::size_t>(i)); }
  bool contains(const std::string& t) const { return index_.count(t) > 0; }

  Index index(const std::string& t) const {
    auto it = index_.find(t);
    return it == index_.end() ? kUnk : it->second;
  }

  std::vector<Index> encode(std::string_view text) const {
    std::vector<Index> ids;
    for (const auto& t : tokenize(text)) ids.push_back(index(t));
    return ids;
  }

  bool operator==(const Vocabulary& o) const { return tokens_ == o.tokens_; }

 private:
  void rebuild_index() {
    index_.clear();
    for (std::size_t i = 0; i < tokens_.size(); ++i)
      if (!index_.emplace(tokens_[i], static_cast<Index>(i)).second)
        throw FormatError("duplicate vocabulary token '" + tokens_[i] + "'");
  }

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, Index> index_;
};

/// Tokens of both utterances with frequency >= min_freq, ordered by
/// frequency (descending) then lexicographically, after the two specials.
inline Vocabulary build_vocab(const Corpus& corpus, std::size_t min_freq = 1) {
  if (min_freq < 1) throw ConfigError("min_freq must be >= 1");
  std::map<std::string, std::size_t> freq;
  for (const auto& p : corpus) {
    for (auto& t : tokenize(p.utterance_s)) ++freq[std::move(t)];
    for (auto& t : tokenize(p.utterance_r)) ++freq[std::move(t)];
  }
  std::vector<std::pair<std::string, std::size_t>> items;
  for (auto& [t, n] : freq)
    if (n >= min_freq && t != "<pad>" && t != "<unk>") items.emplace_back(t, n);
  std::stable_sort(items.begin(), items.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens{"<pad>", "<unk>"};
  for (auto& [t, n] : items) tokens.push_back(t);
  return Vocabulary(std::move(tokens));
}

// ---------------------------------------------------------------------------
// Recurrent encoder

struct EncoderConfig {
  Index embedding_dim = 300;
  /// Output size h. Bidirectional encoders use h/2 per direction.
  Index hidden = 128;
  int layers = 2;
  bool bidirectional = true;
  bool attention = false;

  void validate() const {
    if (embedding_dim < 1 || hidden < 1 || layers < 1) throw ConfigError("bad encoder sizes");
    if (bidirectional && hidden % 2 != 0)
      throw ConfigError("bidirectional encoder needs an even hidden size");
  }
};

/// Hidden-state sequence plus the utterance representation.
struct EncodedUtterance {
  std::vector<Vector> hidden_states;
  Vector representation;
};

/// Same, as tape nodes for training.
struct EncodedExpr {
  std::vector<Expr> hidden_states;
  Expr representation;
};

struct AttentionResult {
  Expr pooled;
  /// weights[i] is the attention distribution of query i over the valid keys.
  std::vector<Vector> weights;
};

/// Stacked (bi)directional GRU over word embeddings. The representation is
/// the first hidden state; with a bidirectional stack that state holds the
/// backward pass over the whole utterance. With `attention` enabled the
/// representation is instead the mean-pooled self-attention output.
class RecurrentEncoder {
 public:
  RecurrentEncoder() = default;

  static RecurrentEncoder create(nn::ParameterSet& set, const std::string& prefix,
                                 const EncoderConfig& cfg, Index vocab_size, Rng& rng) {
    cfg.validate();
    RecurrentEncoder e;
    e.cfg_ = cfg;
    e.embedding_ = &set.add(prefix + ".embedding", vocab_size, cfg.embedding_dim,
                            nn::Init::small_uniform, rng);
    const Index dir_hidden = cfg.bidirectional ? cfg.hidden / 2 : cfg.hidden;
    Index in = cfg.embedding_dim;
    for (int l = 0; l < cfg.layers; ++l) {
      const auto name = prefix + ".gru" + std::to_string(l);
      e.forward_.push_back(nn::GruLayer::create(set, name + ".fwd", in, dir_hidden, rng));
      if (cfg.bidirectional)
        e.backward_.push_back(nn::GruLayer::create(set, name + ".bwd", in, dir_hidden, rng));
      in = cfg.hidden;
    }
    if (cfg.attention) {
      e.query_ = &set.add(prefix + ".attn.query", cfg.hidden, cfg.hidden, nn::Init::xavier, rng);
      e.key_ = &set.add(prefix + ".attn.key", cfg.hidden, cfg.hidden, nn::Init::xavier, rng);
      e.value_ = &set.add(prefix + ".attn.value", cfg.hidden, cfg.hidden, nn::Init::xavier, rng);
    }
    return e;
  }

  const EncoderConfig& config() const { return cfg_; }
  Index dimension() const { return cfg_.hidden; }
  Index vocab_size() const { return embedding_->rows(); }
  nn::Parameter& embedding() const { return *embedding_; }

  EncodedExpr encode(Tape& tape, const std::vector<Index>& tokens) const {
    if (tokens.empty()) throw InputError("cannot encode an empty token sequence");
    std::vector<Expr> xs;
    xs.reserve(tokens.size());
    for (Index id : tokens) {
      if (id < 0 || id >= vocab_size())
        throw InputError("token index " + std::to_string(id) + " out of range");
      xs.push_back(nn::lookup(tape, *embedding_, id));
    }
    for (std::size_t l = 0; l < forward_.size(); ++l) {
      auto f = forward_[l].run(tape, xs, false);
      if (cfg_.bidirectional) {
        auto b = backward_[l].run(tape, xs, true);
        for (std::size_t t = 0; t < xs.size(); ++t) xs[t] = nn::concat({f[t], b[t]});
      } else {
        xs = std::move(f);
      }
    }
    EncodedExpr out{xs, xs.front()};
    if (cfg_.attention) out.representation = attend(tape, xs).pooled;
    return out;
  }

  /// Scaled dot-product self-attention followed by mean pooling over the
  /// positions where `mask` is true (all positions when `mask` is empty).
  AttentionResult attend(Tape& tape, const std::vector<Expr>& hidden,
                         const std::vector<bool>& mask = {}) const {
    if (!query_) throw ConfigError("encoder was built without attention");
    return self_attention(tape, *query_, *key_, *value_, hidden, mask);
  }

  static AttentionResult self_attention(Tape&, nn::Parameter& wq, nn::Parameter& wk,
                                        nn::Parameter& wv, const std::vector<Expr>& hidden,
                                        const std::vector<bool>& mask) {
    if (!mask.empty() && mask.size() != hidden.size())
      throw DimensionError("attention mask length mismatch");
    std::vector<Expr> q, k, v;
    for (std::size_t i = 0; i < hidden.size(); ++i) {
      if (!mask.empty() && !mask[i]) continue;
      q.push_back(nn::matvec(wq, hidden[i]));
      k.push_back(nn::matvec(wk, hidden[i]));
      v.push_back(nn::matvec(wv, hidden[i]));
    }
    if (q.empty()) throw InputError("attention over an empty sequence");
    const double s = 1.0 / std::sqrt(static_cast<double>(wk.rows()));
    AttentionResult r;
    std::vector<Expr> outputs;
    for (auto qi : q) {
      auto w = nn::softmax(nn::dots(qi, k, s));
      r.weights.push_back(w.value());
      outputs.push_back(nn::weighted_sum(w, v));
    }
    r.pooled = nn::mean(outputs);
    return r;
  }

  /// Tape-free inference.
  EncodedUtterance encode_values(const std::vector<Index>& tokens) const {
    Tape tape;
    auto e = encode(tape, tokens);
    EncodedUtterance out;
    for (auto h : e.hidden_states) out.hidden_states.push_back(h.value());
    out.representation = e.representation.value();
    return out;
  }

 private:
  EncoderConfig cfg_;
  nn::Parameter* embedding_ = nullptr;
  std::vector<nn::GruLayer> forward_, backward_;
  nn::Parameter* query_ = nullptr;
  nn::Parameter* key_ = nullptr;
  nn::Parameter* value_ = nullptr;
};

/// Loads whitespace-separated "token v1 ... vD" lines into matching rows of
/// the embedding table. Returns the number of vocabulary rows overwritten.
inline std::size_t load_pretrained_embeddings(std::istream& in, const Vocabulary& vocab,
                                              nn::Parameter& table) {
  std::string line;
  std::size_t line_no = 0, loaded = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string token;
    if (!(ls >> token)) continue;
    std::vector<double> values;
    double v;
    while (ls >> v) values.push_back(v);
    if (!ls.eof()) throw FormatError("word vectors line " + std::to_string(line_no) +
                                     ": non-numeric value");
    if (static_cast<Index>(values.size()) != table.cols())
      throw FormatError("word vectors line " + std::to_string(line_no) + ": expected " +
                        std::to_string(table.cols()) + " values, got " +
                        std::to_string(values.size()));
    if (!vocab.contains(token)) continue;
    const Index row = vocab.index(token);
    for (Index j = 0; j < table.cols(); ++j) table.value(row, j) = values[static_cast<std::size_t>(j)];
    ++loaded;
  }
  return loaded;
}

// ---------------------------------------------------------------------------
// External contextual encoders

/// Adapter for an external (frozen) contextual encoder. Implementations own
/// their tokenization and report a fixed output dimension.
class ContextualEncoder {
 public:
  virtual ~ContextualEncoder() = default;
  virtual std::string name() const = 0;
  virtual Index dimension() const = 0;
  virtual EncodedUtterance encode(std::string_view utterance) const = 0;
};

/// Returns the same vector for every token; for wiring tests.
class ConstantEncoder final : public ContextualEncoder {
 public:
  explicit ConstantEncoder(Index dim, double value = 0.5) : dim_(dim), value_(value) {}
  std::string name() const override { return "constant"; }
  Index dimension() const override { return dim_; }
  EncodedUtterance encode(std::string_view utterance) const override {
    EncodedUtterance out;
    const auto n = std::max<std::size_t>(1, tokenize(utterance).size());
    out.hidden_states.assign(n, Vector::Constant(dim_, value_));
    out.representation = Vector::Constant(dim_, value_);
    return out;
  }

 private:
  Index dim_;
  double value_;
};

/// Deterministic hashed bag-of-words: each token maps to a pseudo-random
/// unit-scale vector seeded by its fingerprint; the representation is the
/// token mean.
class HashedBagEncoder final : public ContextualEncoder {
 public:
  explicit HashedBagEncoder(Index dim) : dim_(dim) {}
  std::string name() const override { return "hashed-bow"; }
  Index dimension() const override { return dim_; }
  EncodedUtterance encode(std::string_view utterance) const override {
    EncodedUtterance out;
    Vector sum = Vector::Zero(dim_);
    for (const auto& t : tokenize(utterance)) {
      Rng rng(Fingerprint().update(t).value());
      Vector v(dim_);
      for (Index i = 0; i < dim_; ++i) v(i) = normal(rng) / std::sqrt(static_cast<double>(dim_));
      out.hidden_states.push_back(v);
      sum += v;
    }
    if (out.hidden_states.empty()) out.hidden_states.push_back(Vector::Zero(dim_));
    out.representation = sum / static_cast<double>(out.hidden_states.size());
    return out;
  }

 private:
  Index dim_;
};

/// Name -> factory table for contextual encoders. The factory receives the
/// plugin cache directory (may be empty).
class EncoderRegistry {
 public:
  using Factory = std::function<std::shared_ptr<const ContextualEncoder>(const std::string&)>;

  static EncoderRegistry& instance() {
    static EncoderRegistry r = [] {
      EncoderRegistry reg;
      reg.add("constant", [](const std::string&) { return std::make_shared<ConstantEncoder>(16); });
      reg.add("hashed-bow",
              [](const std::string&) { return std::make_shared<HashedBagEncoder>(64); });
      return reg;
    }();
    return r;
  }

  void add(const std::string& name, Factory f) { factories_[name] = std::move(f); }
  bool contains(const std::string& name) const { return factories_.count(name) > 0; }

  std::shared_ptr<const ContextualEncoder> create(const std::string& name,
                                                  const std::string& cache_dir = {}) const {
    auto it = factories_.find(name);
    if (it == factories_.end())
      throw ConfigError("no contextual encoder registered under '" + name + "'");
    return it->second(cache_dir);
  }

 private:
  std::map<std::string, Factory> factories_;
};

inline EncodedUtterance encode_external(const std::string& name, std::string_view utterance,
                                        const EncoderRegistry& registry = EncoderRegistry::instance()) {
  return registry.create(name)->encode(utterance);
}

// ---------------------------------------------------------------------------
// Backend used by the task models

/// Text -> representation node, via the trainable recurrent encoder or a
/// frozen contextual plugin.
class UtteranceEncoder {
 public:
  UtteranceEncoder() = default;

  static UtteranceEncoder recurrent(nn::ParameterSet& set, const std::string& prefix,
                                    const EncoderConfig& cfg, Vocabulary vocab, Rng& rng) {
    UtteranceEncoder u;
    u.vocab_ = std::move(vocab);
    u.recurrent_ = RecurrentEncoder::create(set, prefix, cfg, u.vocab_.size(), rng);
    u.has_recurrent_ = true;
    return u;
  }

  static UtteranceEncoder external(std::shared_ptr<const ContextualEncoder> plugin) {
    if (!plugin) throw ConfigError("null contextual encoder");
    UtteranceEncoder u;
    u.plugin_ = std::move(plugin);
    return u;
  }

  Index dimension() const { return has_recurrent_ ? recurrent_.dimension() : plugin_->dimension(); }
  bool is_recurrent() const { return has_recurrent_; }
  const Vocabulary& vocab() const { return vocab_; }
  const RecurrentEncoder& recurrent_encoder() const { return recurrent_; }
  const ContextualEncoder* plugin() const { return plugin_.get(); }

  Expr represent(Tape& tape, std::string_view text) const {
    if (has_recurrent_) {
      auto ids = vocab_.encode(text);
      if (ids.empty()) throw InputError("utterance has no tokens");
      return recurrent_.encode(tape, ids).representation;
    }
    if (tokenize(text).empty()) throw InputError("utterance has no tokens");
    auto enc = plugin_->encode(text);
    if (enc.representation.size() != plugin_->dimension())
      throw DimensionError("plugin '" + plugin_->name() + "' returned dimension " +
                           std::to_string(enc.representation.size()) + ", declared " +
                           std::to_string(plugin_->dimension()));
    return nn::constant(tape, std::move(enc.representation));
  }

 private:
  Vocabulary vocab_;
  RecurrentEncoder recurrent_;
  bool has_recurrent_ = false;
  std::shared_ptr<const ContextualEncoder> plugin_;
};

}  // namespace cogintac
