#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cogintac/run.hpp"
#include "cogintac/synthetic.hpp"

namespace fs = std::filesystem;
using namespace cogintac;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json_file(const std::string& path) {
  const auto text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError("'" + path + "' is not valid JSON: " + e.what());
  }
}

void write_file(const std::string& path, const std::string& contents) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << contents;
}

void print_issue(const char* kind, const RecordIssue& i) {
  std::cerr << kind << ": line " << i.line;
  if (!i.id.empty()) std::cerr << " [" << i.id << "]";
  if (!i.field.empty()) std::cerr << " " << i.field;
  std::cerr << ": " << i.message << "\n";
}

IntentionDictionary read_dictionary(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open dictionary '" + path + "'");
  return load_dictionary(in);
}

// ---------------------------------------------------------------------------

struct IngestArgs {
  std::string file, out;
  std::uint64_t seed = 7;
  bool strict = false;
};

int cmd_ingest(const IngestArgs& a) {
  std::ifstream in(a.file);
  if (!in) throw InputError("cannot open corpus file '" + a.file + "'");
  Corpus corpus;
  if (a.strict) {
    corpus = load_corpus(in);
  } else {
    auto r = parse_corpus(in);
    for (const auto& w : r.warnings) print_issue("warning", w);
    for (const auto& e : r.errors) print_issue("rejected", e);
    std::cout << "accepted " << r.corpus.size() << ", rejected " << r.errors.size() << ", warnings "
              << r.warnings.size() << "\n";
    corpus = std::move(r.corpus);
  }
  std::cout << "fingerprint " << corpus_fingerprint(corpus) << "\n";
  if (!a.out.empty()) {
    const auto s = split_corpus(corpus, a.seed);
    fs::create_directories(a.out);
    for (const auto& [name, part] : {std::pair{"train", &s.train}, {"val", &s.val}, {"test", &s.test}}) {
      std::ofstream out(fs::path(a.out) / (std::string(name) + ".jsonl"));
      write_corpus(out, *part);
      std::cout << name << " " << part->size() << " " << corpus_fingerprint(*part) << "\n";
    }
  }
  return 0;
}

int cmd_stats(const std::string& file, bool as_json) {
  std::ifstream in(file);
  if (!in) throw InputError("cannot open corpus file '" + file + "'");
  auto r = parse_corpus(in);
  for (const auto& e : r.errors) print_issue("rejected", e);
  const auto s = corpus_stats(r.corpus);
  if (as_json) std::cout << to_json(s).dump(1) << "\n";
  else std::cout << render_stats_table(s);
  return 0;
}

int cmd_build_dict(const std::string& train, const std::string& out, const DictConfig& cfg) {
  const auto corpus = read_corpus_file(train);
  const auto d = build_dictionary(corpus, cfg);
  std::ostringstream os;
  save_dictionary(d, os);
  write_file(out, os.str());
  std::cout << "entries " << d.size() << "\nfingerprint " << d.fingerprint() << "\n";
  return 0;
}

struct TrainArgs {
  std::string config, task, corpus, train, val, test, out, encoder, generator;
  std::optional<std::uint64_t> seed;
  std::vector<double> lrs;
  std::vector<std::size_t> batch_sizes, epochs;
  std::vector<std::string> ablate;
  std::optional<Index> hidden, embedding_dim;
  bool suite = false, predicted = false;
  std::size_t seeds = 1;
};

RunConfig resolve_config(const TrainArgs& a) {
  RunConfig c = a.config.empty() ? RunConfig{} : run_config_from_json(read_json_file(a.config));
  if (!a.task.empty()) c.task = parse_task(a.task);
  if (!a.corpus.empty()) {
    c.corpus = a.corpus;
    c.train = c.val = c.test = "";
  }
  if (!a.train.empty()) c.train = a.train;
  if (!a.val.empty()) c.val = a.val;
  if (!a.test.empty()) c.test = a.test;
  if (!a.train.empty() || !a.val.empty() || !a.test.empty()) c.corpus = "";
  if (!a.out.empty()) c.out = a.out;
  if (!a.encoder.empty()) c.encoder = a.encoder;
  if (!a.generator.empty()) c.generator = a.generator;
  if (a.seed) c.seed = *a.seed;
  if (!a.lrs.empty()) c.grid.learning_rates = a.lrs;
  if (!a.batch_sizes.empty()) c.grid.batch_sizes = a.batch_sizes;
  if (!a.epochs.empty()) c.grid.epochs = a.epochs;
  if (a.hidden) c.hidden = *a.hidden;
  if (a.embedding_dim) c.embedding_dim = *a.embedding_dim;
  if (a.predicted) c.predicted_emotion = true;
  for (const auto& x : a.ablate) {
    if (x == "intdic") c.ablation.intdic = false;
    else if (x == "fusion") c.ablation.fusion = false;
    else if (x == "multitask") c.ablation.multitask = false;
    else if (x == "full_conditioning") c.ablation.full_conditioning = false;
    else throw ConfigError("unknown ablation '" + x + "' (intdic, fusion, multitask, full_conditioning)");
  }
  c.validate();
  return c;
}

int cmd_train(const TrainArgs& a) {
  const auto cfg = resolve_config(a);
  const auto m = a.suite ? run_ablation_suite(cfg, a.seeds) : run_grid_search(cfg);
  std::cout << read_file((fs::path(cfg.out) / "report.txt").string());
  std::cout << "run written to " << cfg.out << "\n";
  (void)m;
  return 0;
}

struct EvaluateArgs {
  std::string model, dict, corpus, human, generations;
};

int cmd_evaluate(const EvaluateArgs& a) {
  if (!a.human.empty()) {
    std::ifstream in(a.human);
    if (!in) throw InputError("cannot open '" + a.human + "'");
    const auto s = eval::aggregate_human_eval(eval::parse_human_eval_csv(in));
    std::cout << eval::to_json(s).dump(1) << "\n";
    return 0;
  }
  if (a.corpus.empty()) throw ConfigError("evaluate needs --corpus (or --human)");
  const auto corpus = read_corpus_file(a.corpus);
  if (!a.generations.empty()) {
    std::ifstream in(a.generations);
    if (!in) throw InputError("cannot open '" + a.generations + "'");
    std::map<std::string, std::string> refs;
    for (const auto& p : corpus) refs[p.id] = p.utterance_r;
    std::map<std::string, std::pair<std::vector<std::string>, std::vector<std::string>>> by_mode;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
      ++n;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      json j;
      try {
        j = json::parse(line);
      } catch (const json::parse_error& e) {
        throw ParseError(n, e.what());
      }
      const auto id = j.value("id", std::string());
      auto it = refs.find(id);
      if (it == refs.end()) throw DataError("generation id '" + id + "' not in corpus");
      auto& slot = by_mode[j.value("mode", std::string("full"))];
      slot.first.push_back(j.value("response", std::string()));
      slot.second.push_back(it->second);
    }
    json out = json::object();
    for (const auto& [mode, cr] : by_mode) out[mode] = eval::to_json(eval::generation_scores(cr.first, cr.second));
    std::cout << out.dump(1) << "\n";
    return 0;
  }
  if (a.model.empty()) throw ConfigError("evaluate needs --model, --generations or --human");
  const auto ck = read_json_file(a.model);
  std::optional<IntentionDictionary> dict;
  if (!a.dict.empty()) dict = read_dictionary(a.dict);
  const auto kind = ck.value("kind", std::string());
  const IntentionDictionary* dp = dict ? &*dict : nullptr;
  if (kind == "abduction") {
    const auto m = abduction_from_checkpoint(ck);
    const auto ev = evaluate_abduction(m, corpus, dp);
    std::cout << json{{"intention", eval::to_json(ev.metrics)}}.dump(1) << "\n";
  } else if (kind == "emotion") {
    const auto m = emotion_from_checkpoint(ck);
    const auto ev = evaluate_emotion(m, corpus, dp);
    std::cout << json{{"emotion", eval::to_json(ev.emotion)},
                      {"satisfaction", eval::to_json(ev.satisfaction)},
                      {"consistency", ev.consistency}}
                     .dump(1)
              << "\n";
  } else {
    throw FormatError("'" + a.model + "' is not an abduction or emotion checkpoint");
  }
  return 0;
}

struct GenerateArgs {
  std::string run, corpus, generator = "echo", out, mode = "both", strategy = "greedy";
  std::size_t max_length = 64, beam_width = 4;
  double temperature = 1.0;
  std::uint64_t seed = 7;
  bool predicted = false;
};

int cmd_generate(const GenerateArgs& a) {
  const auto corpus = read_corpus_file(a.corpus);
  DecodeConfig dc;
  dc.max_length = a.max_length;
  dc.strategy = parse_strategy(a.strategy);
  dc.beam_width = a.beam_width;
  dc.temperature = a.temperature;
  dc.seed = a.seed;
  std::optional<EmotionModel> emotion;
  std::optional<IntentionInference> inference;
  std::optional<IntentionDictionary> dict;
  std::unique_ptr<Generator> full, context;
  if (!a.run.empty()) {
    const fs::path dir(a.run);
    auto opt = [&](const char* name) { return fs::exists(dir / name) ? (dir / name).string() : std::string(); };
    if (auto p = opt("dictionary.json"); !p.empty()) dict = read_dictionary(p);
    if (auto p = opt("emotion_model.json"); !p.empty()) emotion.emplace(emotion_from_checkpoint(read_json_file(p)));
    if (auto p = opt("inference.json"); !p.empty()) inference.emplace(inference_from_checkpoint(read_json_file(p)));
    const auto gf = opt("generator_full.json"), gc = opt("generator_context_only.json");
    if (gf.empty() || gc.empty()) throw InputError("run directory '" + a.run + "' has no generator checkpoints");
    full = generator_from_checkpoint(read_json_file(gf));
    context = generator_from_checkpoint(read_json_file(gc));
  } else {
    full = GeneratorRegistry::instance().create(a.generator);
    context = GeneratorRegistry::instance().create(a.generator);
  }
  GenerationPipeline pipe;
  pipe.emotion = emotion ? &*emotion : nullptr;
  pipe.inference = inference ? &*inference : nullptr;
  pipe.dict = dict ? &*dict : nullptr;
  pipe.use_predicted_emotion = a.predicted;

  std::vector<GenerationRecord> records;
  if (a.mode == "both") {
    records = generate_paired(*full, *context, pipe, corpus, dc);
  } else if (a.mode == "full" || a.mode == "context_only") {
    const auto mode = a.mode == "full" ? ConditioningMode::full : ConditioningMode::context_only;
    auto& plugin = mode == ConditioningMode::full ? *full : *context;
    for (const auto& p : corpus) {
      const auto in = prepare_input(plugin, make_input(pipe, p, mode, dc));
      records.push_back({p.id, in.conditioning_text, mode, generate(plugin, in)});
    }
  } else {
    throw ConfigError("unknown mode '" + a.mode + "' (full, context_only, both)");
  }
  std::string text;
  for (const auto& r : records) text += to_json(r).dump() + "\n";
  if (a.out.empty()) std::cout << text;
  else write_file(a.out, text);
  return 0;
}

struct ExplainArgs {
  std::string emotion, satisfaction, model, dict, speaker, listener;
};

int cmd_explain(const ExplainArgs& a) {
  if (!a.model.empty()) {
    if (a.speaker.empty() || a.listener.empty()) throw ConfigError("explain --model needs --speaker and --listener");
    const auto m = emotion_from_checkpoint(read_json_file(a.model));
    std::optional<IntentionDictionary> dict;
    if (!a.dict.empty()) dict = read_dictionary(a.dict);
    const auto p = m.predict(a.speaker, a.listener, dict ? &*dict : nullptr);
    std::cout << prediction_record("input", p).dump(1) << "\n";
    return 0;
  }
  if (a.emotion.empty() || a.satisfaction.empty())
    throw ConfigError("explain needs --emotion and --satisfaction, or --model");
  std::cout << explain(parse_label<Emotion>(a.emotion, "emotion"),
                       parse_label<Satisfaction>(a.satisfaction, "satisfaction"))
            << "\n";
  return 0;
}

struct SynthArgs {
  std::size_t count = 2000;
  std::uint64_t seed = 7;
  std::optional<double> injection;
  std::string spec, out;
};

int cmd_synth(const SynthArgs& a) {
  SyntheticSpec s = a.spec.empty() ? SyntheticSpec{} : synthetic_spec_from_json(read_json_file(a.spec));
  s.count = a.count;
  if (a.injection) s.injection_rate = *a.injection;
  s.validate();
  const auto c = generate_synthetic_corpus(s, a.seed);
  std::ostringstream os;
  write_corpus(os, c);
  if (a.out.empty()) std::cout << os.str();
  else write_file(a.out, os.str());
  if (!a.out.empty()) std::cout << "pairs " << c.size() << "\nfingerprint " << corpus_fingerprint(c) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CogIntAc interaction-chain toolkit"};
  app.require_subcommand(1);

  IngestArgs ingest;
  auto* c_ingest = app.add_subcommand("ingest", "Validate a JSON-lines corpus and optionally split it");
  c_ingest->add_option("file", ingest.file, "Corpus file")->required();
  c_ingest->add_option("--out", ingest.out, "Write train/val/test.jsonl here");
  c_ingest->add_option("--seed", ingest.seed, "Split seed");
  c_ingest->add_flag("--strict", ingest.strict, "Fail on the first rejected record");

  std::string stats_file;
  bool stats_json = false;
  auto* c_stats = app.add_subcommand("stats", "Label distributions and utterance lengths");
  c_stats->add_option("file", stats_file, "Corpus file")->required();
  c_stats->add_flag("--json", stats_json, "Emit JSON");

  std::string dict_train, dict_out;
  DictConfig dict_cfg;
  auto* c_dict = app.add_subcommand("build-dict", "Build the intention dictionary from a training split");
  c_dict->add_option("train", dict_train, "Training corpus")->required();
  c_dict->add_option("--out", dict_out, "Output JSON")->required();
  c_dict->add_option("--min-count", dict_cfg.min_count);
  c_dict->add_option("--max-entries", dict_cfg.max_entries);
  c_dict->add_option("--smoothing", dict_cfg.smoothing_mass);
  c_dict->add_option("--max-ngram", dict_cfg.max_ngram);

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "Grid-search training for one task");
  c_train->add_option("--config", train.config, "Run config JSON");
  c_train->add_option("--task", train.task, "abduction, emotion or generation");
  c_train->add_option("--corpus", train.corpus, "Single corpus split 80/10/10");
  c_train->add_option("--train", train.train);
  c_train->add_option("--val", train.val);
  c_train->add_option("--test", train.test);
  c_train->add_option("--out", train.out, "Run directory");
  c_train->add_option("--seed", train.seed);
  c_train->add_option("--lr", train.lrs, "Learning rates")->expected(1, -1);
  c_train->add_option("--batch-size", train.batch_sizes)->expected(1, -1);
  c_train->add_option("--epochs", train.epochs)->expected(1, -1);
  c_train->add_option("--ablate", train.ablate, "Disable a component")->expected(1, -1);
  c_train->add_option("--encoder", train.encoder, "recurrent, recurrent+attention or a plug-in name");
  c_train->add_option("--generator", train.generator);
  c_train->add_option("--hidden", train.hidden);
  c_train->add_option("--embedding-dim", train.embedding_dim);
  c_train->add_flag("--predicted-emotion", train.predicted);
  c_train->add_flag("--ablation-suite", train.suite, "Run the five ablation rows");
  c_train->add_option("--seeds", train.seeds, "Seeds averaged by --ablation-suite");

  EvaluateArgs evaluate;
  auto* c_eval = app.add_subcommand("evaluate", "Score a checkpoint, generations or human ratings");
  c_eval->add_option("--model", evaluate.model);
  c_eval->add_option("--dict", evaluate.dict);
  c_eval->add_option("--corpus", evaluate.corpus);
  c_eval->add_option("--generations", evaluate.generations);
  c_eval->add_option("--human", evaluate.human, "Ratings CSV");

  GenerateArgs generate_args;
  auto* c_gen = app.add_subcommand("generate", "Generate listener responses");
  c_gen->add_option("--corpus", generate_args.corpus)->required();
  c_gen->add_option("--run", generate_args.run, "Generation run directory");
  c_gen->add_option("--generator", generate_args.generator, "Registered plug-in when no --run");
  c_gen->add_option("--out", generate_args.out);
  c_gen->add_option("--mode", generate_args.mode, "full, context_only or both");
  c_gen->add_option("--strategy", generate_args.strategy, "greedy, beam or sample");
  c_gen->add_option("--max-length", generate_args.max_length);
  c_gen->add_option("--beam-width", generate_args.beam_width);
  c_gen->add_option("--temperature", generate_args.temperature);
  c_gen->add_option("--seed", generate_args.seed);
  c_gen->add_flag("--predicted-emotion", generate_args.predicted);

  ExplainArgs explain_args;
  auto* c_explain = app.add_subcommand("explain", "Render the emotion explanation");
  c_explain->add_option("--emotion", explain_args.emotion);
  c_explain->add_option("--satisfaction", explain_args.satisfaction);
  c_explain->add_option("--model", explain_args.model, "Emotion checkpoint");
  c_explain->add_option("--dict", explain_args.dict);
  c_explain->add_option("--speaker", explain_args.speaker);
  c_explain->add_option("--listener", explain_args.listener);

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Write a synthetic corpus");
  c_synth->add_option("--count", synth.count);
  c_synth->add_option("--seed", synth.seed);
  c_synth->add_option("--injection-rate", synth.injection);
  c_synth->add_option("--spec", synth.spec, "Generator spec JSON");
  c_synth->add_option("--out", synth.out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(ErrorCategory::usage);
  }

  try {
    if (*c_ingest) return cmd_ingest(ingest);
    if (*c_stats) return cmd_stats(stats_file, stats_json);
    if (*c_dict) return cmd_build_dict(dict_train, dict_out, dict_cfg);
    if (*c_train) return cmd_train(train);
    if (*c_eval) return cmd_evaluate(evaluate);
    if (*c_gen) return cmd_generate(generate_args);
    if (*c_explain) return cmd_explain(explain_args);
    if (*c_synth) return cmd_synth(synth);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return static_cast<int>(ErrorCategory::usage);
}
