#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "cogintac/run.hpp"
#include "cogintac/synthetic.hpp"

using namespace cogintac;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("cogintac_run_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

RunConfig small_config(const fs::path& dir, Task task) {
  SyntheticSpec s;
  s.count = 160;
  const auto c = generate_synthetic_corpus(s, 11);
  std::ofstream out(dir / "c.jsonl");
  write_corpus(out, c);
  RunConfig cfg;
  cfg.task = task;
  cfg.corpus = (dir / "c.jsonl").string();
  cfg.out = (dir / "run").string();
  cfg.seed = 3;
  cfg.hidden = 8;
  cfg.embedding_dim = 12;
  cfg.grid = {{0.01}, {16}, {1}};
  return cfg;
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

json without_clock(json m) {
  m.erase("wall_clock_seconds");
  return m;
}

}  // namespace

TEST(Grid, ExpandsInFixedOrder) {
  const auto pts = expand(HyperGrid{});
  ASSERT_EQ(pts.size(), 16u);
  EXPECT_DOUBLE_EQ(pts.front().learning_rate, 0.01);
  EXPECT_EQ(pts.front().batch_size, 16u);
  EXPECT_EQ(pts.front().epochs, 3u);
  EXPECT_EQ(pts[1].epochs, 20u);
  EXPECT_EQ(pts[2].batch_size, 32u);
  EXPECT_DOUBLE_EQ(pts.back().learning_rate, 0.4);
}

TEST(Grid, LogSpacedRange) {
  const auto v = log_spaced(0.01, 0.4, 4);
  ASSERT_EQ(v.size(), 4u);
  EXPECT_DOUBLE_EQ(v.front(), 0.01);
  EXPECT_NEAR(v.back(), 0.4, 1e-15);
  EXPECT_NEAR(v[1] / v[0], v[2] / v[1], 1e-12);
  EXPECT_THROW(log_spaced(0, 1, 3), ConfigError);
}

TEST(Ablation, RowLabels) {
  std::vector<std::string> labels;
  for (const auto& f : table_one_rows()) labels.push_back(ablation_label(f));
  EXPECT_EQ(labels, (std::vector<std::string>{"Baseline", "+IntDic", "+Fusion Mechanism", "+Multi-task", "+All"}));
  std::set<std::string> unique(labels.begin(), labels.end());
  EXPECT_EQ(unique.size(), 5u);
}

TEST(RunConfig, JsonRoundTrip) {
  RunConfig c;
  c.task = Task::generation;
  c.corpus = "x.jsonl";
  c.encoder = "recurrent+attention";
  c.grid = {{0.1, 0.2}, {32}, {5}};
  c.ablation.fusion = false;
  c.decode.strategy = DecodeStrategy::beam;
  const auto back = run_config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  EXPECT_TRUE(back.encoder_config().attention);
}

TEST(RunConfig, Rejections) {
  EXPECT_THROW(run_config_from_json({{"tsak", "emotion"}}), ConfigError);
  EXPECT_THROW(run_config_from_json({{"task", "poetry"}}), ConfigError);
  EXPECT_THROW(run_config_from_json({{"grid", {{"learning_rates", {0.1}}, {"learning_rate_range", {{"min", 0.1}, {"max", 1}}}}}}),
               ConfigError);
  RunConfig c;
  c.corpus = "x";
  c.grid.epochs = {};
  EXPECT_THROW(c.validate(), ConfigError);
  c.grid.epochs = {0};
  EXPECT_THROW(c.validate(), ConfigError);
  c.grid.epochs = {3};
  c.grid.learning_rates = {};
  EXPECT_THROW(c.validate(), ConfigError);
  RunConfig none;
  EXPECT_THROW(none.validate(), ConfigError);
  const auto r = run_config_from_json({{"grid", {{"learning_rate_range", {{"min", 0.01}, {"max", 0.4}, {"points", 3}}}}}});
  EXPECT_EQ(r.grid.learning_rates.size(), 3u);
}

TEST(Search, FailedPointsAreRecorded) {
  RunConfig cfg;
  cfg.grid = {{0.1, 0.2, 0.3}, {16}, {1}};
  auto g = detail::search(cfg, true, [](const GridPoint& p) {
    if (p.learning_rate == 0.2) throw TrainingError("diverged at epoch 1, step 1");
    TrainHistory h;
    h.best_metric = p.learning_rate;
    h.best_epoch = 1;
    return std::pair{h, json{{"lr", p.learning_rate}}};
  });
  ASSERT_EQ(g.points.size(), 3u);
  EXPECT_EQ(g.points[1]["status"], "failed");
  EXPECT_EQ(*g.best, 2u);
  EXPECT_EQ(g.best_checkpoint["lr"], 0.3);
}

TEST(Search, LowerIsBetterForLoss) {
  RunConfig cfg;
  cfg.grid = {{0.1, 0.2, 0.3}, {16}, {1}};
  auto g = detail::search(cfg, false, [](const GridPoint& p) {
    TrainHistory h;
    h.best_metric = std::abs(p.learning_rate - 0.2);
    return std::pair{h, json::object()};
  });
  EXPECT_EQ(*g.best, 1u);
}

TEST(Search, AllFailedIsAnError) {
  RunConfig cfg;
  cfg.grid = {{0.1, 0.2}, {16}, {1}};
  EXPECT_THROW(detail::search(cfg, true,
                              [](const GridPoint&) -> std::pair<TrainHistory, json> {
                                throw TrainingError("diverged");
                              }),
               TrainingError);
}

TEST(Run, TwoByTwoGridListsFourPoints) {
  const auto dir = scratch("grid");
  auto cfg = small_config(dir, Task::abduction);
  cfg.grid = {{0.01, 0.04}, {16, 32}, {1}};
  const auto m = run_grid_search(cfg);
  ASSERT_EQ(m["grid"].size(), 4u);
  for (const auto& p : m["grid"]) {
    EXPECT_EQ(p["status"], "ok");
    EXPECT_TRUE(p.contains("val_metric"));
  }
  EXPECT_TRUE(m["fingerprints"].contains("dictionary"));
}

TEST(Run, SinglePointEqualsDirectTraining) {
  const auto dir = scratch("single");
  const auto cfg = small_config(dir, Task::abduction);
  const auto m = run_grid_search(cfg);
  const auto d = prepare_data(cfg);
  AbductionConfig ac;
  ac.encoder = cfg.encoder_config();
  ac.seed = cfg.seed;
  auto model = AbductionModel::create(ac, d.vocab);
  const auto h = train_abduction(model, d.train, d.val, &d.dict, {.epochs = 1, .batch_size = 16, .learning_rate = 0.01, .seed = 3});
  EXPECT_EQ(m["best"]["val_macro_f1"].get<double>(), h.best_metric);
  EXPECT_EQ(read_json(fs::path(cfg.out) / "model.json"), checkpoint_json(model));
}

TEST(Run, ManifestReferencesEveryArtifact) {
  const auto dir = scratch("artifacts");
  auto cfg = small_config(dir, Task::generation);
  cfg.generator_options = {{"hidden", 8}, {"embedding_dim", 4}};
  cfg.decode.max_length = 8;
  const auto m = run_grid_search(cfg);
  std::set<std::string> listed, on_disk;
  for (const auto& a : m["artifacts"]) listed.insert(a["path"].get<std::string>());
  for (const auto& e : fs::directory_iterator(cfg.out)) on_disk.insert(e.path().filename().string());
  EXPECT_EQ(listed, on_disk);
  for (const auto& a : m["artifacts"]) {
    if (a["fingerprint"].is_null()) continue;
    std::ifstream in(fs::path(cfg.out) / a["path"].get<std::string>(), std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    EXPECT_EQ(Fingerprint().update(ss.str()).hex(), a["fingerprint"]);
  }
  EXPECT_TRUE(on_disk.count("generator_context_only.json"));
  EXPECT_TRUE(on_disk.count("generations.jsonl"));
}

TEST(Run, RepeatIsIdentical) {
  const auto dir = scratch("repeat");
  const auto cfg = small_config(dir, Task::emotion);
  const auto a = run_grid_search(cfg);
  std::ifstream p1(fs::path(cfg.out) / "predictions.jsonl");
  std::stringstream s1;
  s1 << p1.rdbuf();
  const auto b = run_grid_search(cfg);
  std::ifstream p2(fs::path(cfg.out) / "predictions.jsonl");
  std::stringstream s2;
  s2 << p2.rdbuf();
  EXPECT_EQ(without_clock(a), without_clock(b));
  EXPECT_EQ(s1.str(), s2.str());
}

TEST(Run, AblateIntdicChangesOnlyFlagAndMetrics) {
  const auto dir = scratch("ablate");
  auto cfg = small_config(dir, Task::abduction);
  const auto with = without_clock(run_grid_search(cfg));
  cfg.ablation.intdic = false;
  const auto without = without_clock(run_grid_search(cfg));
  EXPECT_EQ(with["fingerprints"], without["fingerprints"]);
  EXPECT_EQ(with["config"]["grid"], without["config"]["grid"]);
  EXPECT_NE(with["config"]["ablation"], without["config"]["ablation"]);
  EXPECT_EQ(with["ablation_label"], "+IntDic");
  EXPECT_EQ(without["ablation_label"], "Baseline");
}

TEST(Run, AblationSuiteHasFiveRows) {
  const auto dir = scratch("suite");
  const auto cfg = small_config(dir, Task::emotion);
  const auto m = run_ablation_suite(cfg, 2);
  ASSERT_EQ(m["rows"].size(), 5u);
  EXPECT_EQ(m["seeds"], 2);
  const auto report = read_json(fs::path(cfg.out) / "report.json");
  const auto& rows = report["table"]["rows"];
  EXPECT_EQ(rows[0]["system"], "Baseline");
  EXPECT_TRUE(rows[0]["values"]["satisfaction_f1"].is_null());
  EXPECT_FALSE(rows[4]["values"]["satisfaction_f1"].is_null());
  EXPECT_EQ(rows[0]["values"]["intention_f1"], rows[2]["values"]["intention_f1"]);
  std::ifstream txt(fs::path(cfg.out) / "report.txt");
  std::string first;
  std::getline(txt, first);
  EXPECT_NE(first.find("2 seeds"), std::string::npos);
}
