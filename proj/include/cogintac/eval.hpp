#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cogintac/error.hpp"
#include "cogintac/text.hpp"

namespace cogintac::eval {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Classification

struct ClassMetrics {
  double precision = 0, recall = 0, f1 = 0;
  std::size_t support = 0;  // gold count
  std::size_t predicted = 0;
};

struct ClassificationResult {
  std::vector<std::string> classes;
  std::vector<ClassMetrics> per_class;
  /// confusion[gold][predicted]
  std::vector<std::vector<std::size_t>> confusion;
  double macro_precision = 0, macro_recall = 0, macro_f1 = 0;
  double micro_precision = 0, micro_recall = 0, micro_f1 = 0;
  double weighted_precision = 0, weighted_recall = 0, weighted_f1 = 0;
  double accuracy = 0;
  std::size_t n = 0;
};

inline double f1_of(double p, double r) { return p + r > 0 ? 2 * p * r / (p + r) : 0.0; }

/// Per-class P/R/F1 with 0/0 := 0. Macro averages run over the classes that
/// occur in the gold labels.
inline ClassificationResult prf1(const std::vector<std::size_t>& preds,
                                 const std::vector<std::size_t>& golds,
                                 std::vector<std::string> classes) {
  if (preds.size() != golds.size())
    throw InputError("prf1: " + std::to_string(preds.size()) + " predictions vs " +
                     std::to_string(golds.size()) + " gold labels");
  if (preds.empty()) throw InputError("prf1: no items");
  const std::size_t k = classes.size();
  ClassificationResult r;
  r.classes = std::move(classes);
  r.n = preds.size();
  r.confusion.assign(k, std::vector<std::size_t>(k, 0));
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] >= k || golds[i] >= k) throw InputError("prf1: label index out of range");
    ++r.confusion[golds[i]][preds[i]];
  }
  r.per_class.resize(k);
  std::size_t correct = 0, present = 0;
  for (std::size_t c = 0; c < k; ++c) {
    auto& m = r.per_class[c];
    const std::size_t tp = r.confusion[c][c];
    for (std::size_t j = 0; j < k; ++j) {
      m.support += r.confusion[c][j];
      m.predicted += r.confusion[j][c];
    }
    correct += tp;
    m.precision = m.predicted ? static_cast<double>(tp) / m.predicted : 0.0;
    m.recall = m.support ? static_cast<double>(tp) / m.support : 0.0;
    m.f1 = f1_of(m.precision, m.recall);
    if (m.support > 0) {
      ++present;
      r.macro_precision += m.precision;
      r.macro_recall += m.recall;
      r.macro_f1 += m.f1;
      const double w = static_cast<double>(m.support) / static_cast<double>(r.n);
      r.weighted_precision += w * m.precision;
      r.weighted_recall += w * m.recall;
      r.weighted_f1 += w * m.f1;
    }
  }
  r.macro_precision /= static_cast<double>(present);
  r.macro_recall /= static_cast<double>(present);
  r.macro_f1 /= static_cast<double>(present);
  r.accuracy = static_cast<double>(correct) / static_cast<double>(r.n);
  r.micro_precision = r.micro_recall = r.micro_f1 = r.accuracy;
  return r;
}

inline json to_json(const ClassificationResult& r) {
  json per = json::object();
  for (std::size_t c = 0; c < r.classes.size(); ++c) {
    const auto& m = r.per_class[c];
    per[r.classes[c]] = {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1},
                         {"support", m.support}};
  }
  return json{{"n", r.n},
              {"accuracy", r.accuracy},
              {"macro", {{"precision", r.macro_precision}, {"recall", r.macro_recall},
                         {"f1", r.macro_f1}}},
              {"micro", {{"precision", r.micro_precision}, {"recall", r.micro_recall},
                         {"f1", r.micro_f1}}},
              {"weighted", {{"precision", r.weighted_precision}, {"recall", r.weighted_recall},
                            {"f1", r.weighted_f1}}},
              {"per_class", per},
              {"confusion", r.confusion},
              {"classes", r.classes}};
}

// ---------------------------------------------------------------------------
// Generation metrics

using Tokens = std::vector<std::string>;

struct GenerationScores {
  double bleu1 = 0, bleu2 = 0, bleu4 = 0;
  double rouge1 = 0, rouge2 = 0, rougeL = 0;
};

inline std::map<Tokens, std::size_t> ngram_counts(const Tokens& toks, std::size_t n) {
  std::map<Tokens, std::size_t> out;
  for (std::size_t i = 0; i + n <= toks.size(); ++i)
    ++out[Tokens(toks.begin() + static_cast<std::ptrdiff_t>(i),
                 toks.begin() + static_cast<std::ptrdiff_t>(i + n))];
  return out;
}

struct BleuConfig {
  /// Replaces a zero clipped count for orders >= 2.
  double epsilon = 0.1;
};

struct BleuScores {
  double bleu1 = 0, bleu2 = 0, bleu4 = 0;
  std::array<double, 4> precisions{};
  double brevity_penalty = 0;
};

/// Corpus BLEU with one reference per candidate: clipped n-gram counts and
/// lengths are summed over the corpus, uniform weights, brevity penalty
/// exp(1 - r/c) when c <= r. A zero clipped count at order n >= 2 is replaced
/// by epsilon; zero unigram overlap gives 0.
inline BleuScores bleu(const std::vector<Tokens>& candidates, const std::vector<Tokens>& references,
                       const BleuConfig& cfg = {}) {
  if (candidates.size() != references.size()) throw InputError("bleu: misaligned lists");
  std::array<double, 4> matched{}, total{};
  double cand_len = 0, ref_len = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (references[i].empty()) throw InputError("bleu: empty reference at index " + std::to_string(i));
    cand_len += static_cast<double>(candidates[i].size());
    ref_len += static_cast<double>(references[i].size());
    for (std::size_t n = 1; n <= 4; ++n) {
      const auto c = ngram_counts(candidates[i], n);
      const auto r = ngram_counts(references[i], n);
      for (const auto& [g, cnt] : c) {
        total[n - 1] += static_cast<double>(cnt);
        auto it = r.find(g);
        if (it != r.end()) matched[n - 1] += static_cast<double>(std::min(cnt, it->second));
      }
    }
  }
  BleuScores s;
  for (std::size_t n = 0; n < 4; ++n) {
    double m = matched[n];
    if (n > 0 && m == 0) m = cfg.epsilon;
    s.precisions[n] = total[n] > 0 ? m / total[n] : (n > 0 ? cfg.epsilon : 0.0);
  }
  s.brevity_penalty = cand_len == 0 ? 0.0 : (cand_len > ref_len ? 1.0 : std::exp(1.0 - ref_len / cand_len));
  auto score = [&](std::size_t order) {
    if (s.precisions[0] == 0.0 || s.brevity_penalty == 0.0) return 0.0;
    double lsum = 0;
    for (std::size_t n = 0; n < order; ++n) lsum += std::log(s.precisions[n]);
    return s.brevity_penalty * std::exp(lsum / static_cast<double>(order));
  };
  s.bleu1 = score(1);
  s.bleu2 = score(2);
  s.bleu4 = score(4);
  return s;
}

inline std::size_t lcs_length(const Tokens& a, const Tokens& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

struct RougeScores {
  double rouge1 = 0, rouge2 = 0, rougeL = 0;
};

inline double rouge_n_pair(const Tokens& cand, const Tokens& ref, std::size_t n) {
  const auto c = ngram_counts(cand, n);
  const auto r = ngram_counts(ref, n);
  double overlap = 0, cn = 0, rn = 0;
  for (const auto& [g, cnt] : c) {
    cn += static_cast<double>(cnt);
    auto it = r.find(g);
    if (it != r.end()) overlap += static_cast<double>(std::min(cnt, it->second));
  }
  for (const auto& [g, cnt] : r) rn += static_cast<double>(cnt);
  if (cn == 0 || rn == 0) return 0.0;
  return f1_of(overlap / cn, overlap / rn);
}

inline double rouge_l_pair(const Tokens& cand, const Tokens& ref) {
  if (cand.empty() || ref.empty()) return 0.0;
  const double l = static_cast<double>(lcs_length(cand, ref));
  return f1_of(l / static_cast<double>(cand.size()), l / static_cast<double>(ref.size()));
}

/// ROUGE-1/2 n-gram F1 and ROUGE-L LCS F-measure, averaged over pairs.
inline RougeScores rouge(const std::vector<Tokens>& candidates, const std::vector<Tokens>& references) {
  if (candidates.size() != references.size()) throw InputError("rouge: misaligned lists");
  RougeScores s;
  if (candidates.empty()) return s;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (references[i].empty()) throw InputError("rouge: empty reference at index " + std::to_string(i));
    s.rouge1 += rouge_n_pair(candidates[i], references[i], 1);
    s.rouge2 += rouge_n_pair(candidates[i], references[i], 2);
    s.rougeL += rouge_l_pair(candidates[i], references[i]);
  }
  const double n = static_cast<double>(candidates.size());
  s.rouge1 /= n;
  s.rouge2 /= n;
  s.rougeL /= n;
  return s;
}

inline GenerationScores generation_scores(const std::vector<std::string>& candidates,
                                          const std::vector<std::string>& references) {
  std::vector<Tokens> c, r;
  for (const auto& s : candidates) c.push_back(tokenize(s));
  for (const auto& s : references) r.push_back(tokenize(s));
  const auto b = bleu(c, r);
  const auto g = rouge(c, r);
  return {b.bleu1, b.bleu2, b.bleu4, g.rouge1, g.rouge2, g.rougeL};
}

inline json to_json(const GenerationScores& s) {
  return json{{"bleu1", s.bleu1},   {"bleu2", s.bleu2},   {"bleu4", s.bleu4},
              {"rouge1", s.rouge1}, {"rouge2", s.rouge2}, {"rougeL", s.rougeL}};
}

// ---------------------------------------------------------------------------
// Human evaluation

inline constexpr std::array<const char*, 4> kHumanCriteria = {"coherent", "consistent",
                                                              "intention", "emotion"};

struct HumanEvalRecord {
  std::string id;
  std::string rater;
  std::array<int, 4> scores{};  // coherent, consistent, intention, emotion; each 1..3
  std::string system = "default";
};

struct HumanEvalSummary {
  struct SystemMeans {
    std::array<double, 4> means{};
    std::size_t records = 0;
  };
  std::map<std::string, SystemMeans> systems;
  /// Mean over rater pairs of the exact-match rate on shared (item, criterion)
  /// cells; empty when no two raters share an item.
  std::optional<double> agreement;
  std::map<std::string, double> pairwise;  // "a|b" -> exact-match rate
};

inline void validate(const HumanEvalRecord& r) {
  for (std::size_t c = 0; c < 4; ++c)
    if (r.scores[c] < 1 || r.scores[c] > 3)
      throw DataError("human eval record '" + r.id + "' (rater " + r.rater + "): " +
                      kHumanCriteria[c] + " score " + std::to_string(r.scores[c]) +
                      " outside 1..3");
}

/// CSV with header id,rater,coherent,consistent,intention,emotion and an
/// optional trailing system column.
inline std::vector<HumanEvalRecord> parse_human_eval_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("human eval CSV is empty");
  auto split = [](const std::string& l) {
    std::vector<std::string> f;
    std::string cur;
    for (char ch : l) {
      if (ch == ',') f.push_back(cur), cur.clear();
      else if (ch != '\r') cur.push_back(ch);
    }
    f.push_back(cur);
    return f;
  };
  const auto header = split(line);
  const std::vector<std::string> expected = {"id", "rater", "coherent", "consistent", "intention",
                                             "emotion"};
  const bool has_system = header.size() == 7 && header[6] == "system";
  if ((header.size() != 6 && !has_system) ||
      !std::equal(expected.begin(), expected.end(), header.begin()))
    throw FormatError("human eval CSV header must be id,rater,coherent,consistent,intention,emotion");
  std::vector<HumanEvalRecord> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto f = split(line);
    if (f.size() != header.size())
      throw ParseError(line_no, "expected " + std::to_string(header.size()) + " fields");
    HumanEvalRecord r;
    r.id = f[0];
    r.rater = f[1];
    for (std::size_t c = 0; c < 4; ++c) {
      try {
        std::size_t pos = 0;
        r.scores[c] = std::stoi(f[2 + c], &pos);
        if (pos != f[2 + c].size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw ParseError(line_no, std::string("non-integer ") + kHumanCriteria[c] + " score");
      }
    }
    if (has_system) r.system = f[6];
    validate(r);
    out.push_back(std::move(r));
  }
  return out;
}

inline HumanEvalSummary aggregate_human_eval(const std::vector<HumanEvalRecord>& records) {
  if (records.empty()) throw InputError("no human evaluation records");
  HumanEvalSummary s;
  // (system, id) -> rater -> scores
  std::map<std::pair<std::string, std::string>, std::map<std::string, std::array<int, 4>>> items;
  for (const auto& r : records) {
    validate(r);
    auto& sys = s.systems[r.system];
    for (std::size_t c = 0; c < 4; ++c) sys.means[c] += r.scores[c];
    ++sys.records;
    items[{r.system, r.id}][r.rater] = r.scores;
  }
  for (auto& [name, sys] : s.systems)
    for (auto& m : sys.means) m /= static_cast<double>(sys.records);

  std::map<std::pair<std::string, std::string>, std::pair<std::size_t, std::size_t>> pair_counts;
  for (const auto& [key, by_rater] : items)
    for (auto a = by_rater.begin(); a != by_rater.end(); ++a)
      for (auto b = std::next(a); b != by_rater.end(); ++b) {
        auto& pc = pair_counts[{a->first, b->first}];
        for (std::size_t c = 0; c < 4; ++c) {
          pc.second += 1;
          if (a->second[c] == b->second[c]) pc.first += 1;
        }
      }
  if (!pair_counts.empty()) {
    double total = 0;
    for (const auto& [raters, pc] : pair_counts) {
      const double rate = static_cast<double>(pc.first) / static_cast<double>(pc.second);
      s.pairwise[raters.first + "|" + raters.second] = rate;
      total += rate;
    }
    s.agreement = total / static_cast<double>(pair_counts.size());
  }
  return s;
}

inline json to_json(const HumanEvalSummary& s) {
  json systems = json::object();
  for (const auto& [name, sys] : s.systems) {
    json m = json::object();
    for (std::size_t c = 0; c < 4; ++c) m[kHumanCriteria[c]] = sys.means[c];
    systems[name] = {{"means", m}, {"records", sys.records}};
  }
  return json{{"systems", systems},
              {"agreement", s.agreement ? json(*s.agreement) : json(nullptr)},
              {"pairwise_agreement", s.pairwise},
              {"scale", "1-low to 3-high"}};
}

// ---------------------------------------------------------------------------
// Reports

struct ReportColumn {
  std::string name;
  std::string unit;  // e.g. "0-1", "1-3"
};

/// Rows keyed by system or ablation name; a missing cell renders as "-".
struct ReportTable {
  std::string title;
  std::vector<ReportColumn> columns;
  std::vector<std::pair<std::string, std::vector<std::optional<double>>>> rows;

  void add_row(std::string name, const std::map<std::string, double>& values) {
    std::vector<std::optional<double>> cells;
    for (const auto& c : columns) {
      auto it = values.find(c.name);
      cells.push_back(it == values.end() ? std::nullopt : std::optional<double>(it->second));
    }
    rows.emplace_back(std::move(name), std::move(cells));
  }
};

inline std::string format_cell(const std::optional<double>& v) {
  if (!v) return "-";
  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << *v;
  return os.str();
}

inline std::string render_text(const ReportTable& t) {
  std::vector<std::string> header{"system"};
  for (const auto& c : t.columns) header.push_back(c.unit.empty() ? c.name : c.name + " [" + c.unit + "]");
  std::vector<std::vector<std::string>> cells{header};
  for (const auto& [name, vals] : t.rows) {
    std::vector<std::string> row{name};
    for (const auto& v : vals) row.push_back(format_cell(v));
    cells.push_back(std::move(row));
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& row : cells)
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  std::ostringstream os;
  if (!t.title.empty()) os << t.title << "\n";
  for (std::size_t r = 0; r < cells.size(); ++r) {
    for (std::size_t i = 0; i < cells[r].size(); ++i) {
      if (i == 0) os << std::left << std::setw(static_cast<int>(width[i])) << cells[r][i];
      else os << "  " << std::right << std::setw(static_cast<int>(width[i])) << cells[r][i];
    }
    os << "\n";
    if (r == 0) {
      std::size_t total = 0;
      for (auto w : width) total += w + 2;
      os << std::string(total - 2, '-') << "\n";
    }
  }
  return os.str();
}

inline json to_json(const ReportTable& t) {
  json cols = json::array();
  for (const auto& c : t.columns) cols.push_back({{"name", c.name}, {"unit", c.unit}});
  json rows = json::array();
  for (const auto& [name, vals] : t.rows) {
    json v = json::object();
    for (std::size_t i = 0; i < vals.size(); ++i)
      v[t.columns[i].name] = vals[i] ? json(*vals[i]) : json(nullptr);
    rows.push_back({{"system", name}, {"values", v}});
  }
  return json{{"title", t.title}, {"columns", cols}, {"rows", rows}};
}

}  // namespace cogintac::eval
