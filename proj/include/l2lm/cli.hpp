#pragma once

// Single entry point: l2lm <corpus|tokenizer|synth|train|eval> <...>.
// Exit codes: 0 ok, 1 usage, 2 data, 3 runtime.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "l2lm/http_client.hpp"
#include "l2lm/l2lm.hpp"

namespace l2lm
{

enum ExitCode : int
{
  kExitOk = 0,
  kExitUsage = 1,
  kExitData = 2,
  kExitRuntime = 3,
};

// Written before any long-running work starts.
struct RunManifest
{
  std::string subcommand;
  json config = json::object();
  json inputs = json::object(); // path -> content hash
  std::uint64_t seed = 0;
  std::vector<std::string> artifacts;

  void add_input(std::string const &path) { inputs[path] = hash_file(path); }

  json to_json() const
  {
    return json{{"subcommand", subcommand}, {"config", config},       {"inputs", inputs},
                {"seed", seed},             {"artifacts", artifacts}, {"tool_version", kVersion}};
  }

  void write(std::string const &path) const
  {
    if (!path.empty())
      write_file(path, to_json().dump(2) + "\n");
  }
};

namespace cli
{
inline std::string manifest_path(std::string const &explicit_path, std::string const &primary_output)
{
  if (!explicit_path.empty())
    return explicit_path;
  return primary_output.empty() ? std::string() : primary_output + ".run.json";
}

inline SourceKind kind_or_default(std::string const &s)
{
  return s.empty() ? SourceKind::unconstrained : parse_source_kind(s);
}

inline std::vector<Document> load_corpus_file(std::string const &path, std::string const &kind, std::string const &format)
{
  ManifestEntry e;
  e.name = std::filesystem::path(path).stem().string();
  e.path = path;
  e.kind = kind_or_default(kind);
  e.format = format;
  if (e.format.empty() && e.kind == SourceKind::unconstrained && ends_with(path, ".jsonl"))
    e.format = "documents";
  return load_source(e);
}

inline std::string with_suffix(std::string const &path, std::string const &tag)
{
  std::filesystem::path p(path);
  return (p.parent_path() / (p.stem().string() + "." + tag + p.extension().string())).string();
}

inline std::vector<std::size_t> parse_size_list(std::string const &s)
{
  std::vector<std::size_t> out;
  for (auto const &part : split(s, ','))
  {
    auto t = std::string(trim(part));
    if (t.empty() || t.find_first_not_of("0123456789") != std::string::npos)
      throw UsageError(cat("expected a comma-separated list of positive integers, got '", s, "'"));
    out.push_back(std::stoull(t));
  }
  return out;
}

inline std::unique_ptr<CompletionClient> make_client(bool live, std::string const &canned_dir)
{
  if (live)
    return std::make_unique<HttpCompletionClient>(HttpCompletionClient::from_environment());
  if (!canned_dir.empty())
    return std::make_unique<MockCompletionClient>(canned_dir);
  return std::make_unique<MockCompletionClient>();
}

// ---------------------------------------------------------------- corpus

struct CorpusStatsArgs
{
  std::vector<std::string> inputs;
  std::string kind, format, run_manifest;
  bool as_json = false;
};

inline int corpus_stats(CorpusStatsArgs const &a)
{
  RunManifest m;
  m.subcommand = "corpus stats";
  m.config = {{"kind", a.kind}, {"format", a.format}};
  json per_source = json::array();
  std::size_t grand = 0;
  for (auto const &path : a.inputs)
  {
    auto docs = load_corpus_file(path, a.kind, a.format);
    m.add_input(path);
    std::size_t const words = total_words(docs);
    grand += words;
    per_source.push_back({{"source", path}, {"documents", docs.size()}, {"words", words}});
  }
  m.write(a.run_manifest);
  if (a.as_json)
    std::cout << json{{"sources", per_source}, {"total_words", grand}}.dump(2) << "\n";
  else
  {
    for (auto const &s : per_source)
      std::cout << s["source"].get<std::string>() << "\t" << s["documents"] << " documents\t" << s["words"]
                << " words\n";
    std::cout << "total\t" << grand << " words\n";
  }
  return kExitOk;
}

struct CorpusMixArgs
{
  std::string manifest, out, run_manifest;
};

inline int corpus_mix(CorpusMixArgs const &a)
{
  auto manifest = load_manifest(a.manifest);
  RunManifest m;
  m.subcommand = "corpus mix";
  m.config = {{"manifest", to_json(manifest)}};
  m.seed = manifest.seed;
  m.add_input(a.manifest);
  std::vector<std::vector<Document>> sources;
  for (auto const &e : manifest.entries)
  {
    sources.push_back(load_source(e));
    m.add_input(e.path);
  }
  m.artifacts = {a.out};
  auto const mpath = manifest_path(a.run_manifest, a.out);
  m.write(mpath);

  auto mix = mix_corpora(manifest, sources);
  write_file(a.out, serialize_documents(mix.documents));
  json words = json::object();
  for (std::size_t e = 0; e < manifest.entries.size(); ++e)
  {
    words[manifest.entries[e].name] = mix.words_per_entry[e];
    std::cout << manifest.entries[e].name << "\t" << mix.words_per_entry[e] << " / " << manifest.entries[e].budget
              << " words\n";
  }
  std::cout << "total\t" << mix.total() << " / " << manifest.total_budget << " words\n";
  auto record = m.to_json();
  record["result"] = {{"words_per_entry", words}, {"total_words", mix.total()}, {"warnings", mix.warnings},
                      {"documents", mix.documents.size()}, {"output_hash", hash_file(a.out)}};
  write_file(mpath, record.dump(2) + "\n");
  return kExitOk;
}

struct FlattenArgs
{
  std::string in, out, prefix = "triplet", run_manifest;
};

inline int corpus_flatten(FlattenArgs const &a)
{
  auto triplets = load_triplets(a.in);
  RunManifest m;
  m.subcommand = "corpus flatten-triplets";
  m.config = {{"prefix", a.prefix}};
  m.add_input(a.in);
  m.artifacts = {a.out};
  m.write(manifest_path(a.run_manifest, a.out));
  auto docs = flatten_triplets(triplets, a.prefix);
  write_file(a.out, serialize_documents(docs));
  std::cout << triplets.size() << " triplets -> " << docs.size() << " documents, " << total_words(docs) << " words\n";
  return kExitOk;
}

// ---------------------------------------------------------------- tokenizer

struct TokenizerTrainArgs
{
  std::vector<std::string> corpus;
  std::string kind, format, out, run_manifest;
  std::size_t vocab_size = 2000;
  std::uint64_t seed = 0;
};

inline int tokenizer_train(TokenizerTrainArgs const &a)
{
  RunManifest m;
  m.subcommand = "tokenizer train";
  m.config = {{"vocab_size", a.vocab_size}, {"kind", a.kind}, {"format", a.format}};
  m.seed = a.seed;
  std::vector<Document> docs;
  for (auto const &path : a.corpus)
  {
    auto part = load_corpus_file(path, a.kind, a.format);
    docs.insert(docs.end(), part.begin(), part.end());
    m.add_input(path);
  }
  m.artifacts = {a.out};
  m.write(manifest_path(a.run_manifest, a.out));
  auto tok = train_subwords(docs, a.vocab_size, a.seed);
  tok.save(a.out);
  std::cout << "tokenizer: " << tok.size() << " pieces, " << tok.merges().size() << " merges -> " << a.out << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- synth

struct SynthRenderArgs
{
  int figure = 1;
  std::string notion, alternate, topic, sentence, word, pos, definition, run_manifest;
  bool sentential = false;
  std::size_t count = 500;
};

inline int synth_render(SynthRenderArgs const &a)
{
  auto need = [](std::string const &v, char const *flag) {
    if (v.empty())
      throw UsageError(cat("--", flag, " is required for this figure"));
  };
  std::string text;
  if (a.figure == 1)
  {
    need(a.notion, "notion");
    need(a.topic, "topic");
    NotionSpec spec{a.notion, a.alternate.empty() ? std::nullopt : std::optional<std::string>(a.alternate), false};
    text = render_generation_prompt(spec, a.topic, a.count);
  }
  else if (a.figure == 2)
  {
    need(a.notion, "notion");
    need(a.sentence, "sentence");
    text = render_tagging_prompt(a.sentence, NotionSpec{a.notion, std::nullopt, a.sentential});
  }
  else if (a.figure == 3)
  {
    need(a.word, "word");
    need(a.pos, "pos");
    need(a.definition, "definition");
    text = render_wiktionary_example_prompt(WiktionaryEntry{a.word, a.pos, a.definition, {}});
  }
  else
    throw UsageError(cat("--figure must be 1, 2 or 3, got ", a.figure));
  RunManifest m;
  m.subcommand = "synth render";
  m.config = {{"figure", a.figure},   {"notion", a.notion}, {"alternate", a.alternate}, {"topic", a.topic},
              {"sentence", a.sentence}, {"sentential", a.sentential}, {"word", a.word}, {"pos", a.pos},
              {"definition", a.definition}, {"count", a.count}};
  m.write(a.run_manifest);
  std::cout << text << "\n";
  return kExitOk;
}

struct SynthGenerateArgs
{
  bool mock = false, live = false;
  std::string canned_dir, notions, topics, out, run_manifest;
  GenerationOptions opt;
};

inline int synth_generate(SynthGenerateArgs a)
{
  if (a.mock == a.live)
    throw UsageError("choose exactly one of --mock or --live");
  auto notions = a.notions.empty() ? default_notions() : parse_notions(read_file(a.notions), a.notions);
  TopicList topics;
  if (!a.topics.empty())
  {
    topics.topics.clear();
    for (auto &line : split(read_file(a.topics), '\n'))
      if (!trim(line).empty())
        topics.topics.emplace_back(trim(line));
  }
  if (a.opt.tag_notions > notions.size())
  {
    log_info(cat("tag-notions ", a.opt.tag_notions, " clamped to the ", notions.size(), " available notions"));
    a.opt.tag_notions = notions.size();
  }
  auto client = make_client(a.live, a.canned_dir);

  RunManifest m;
  m.subcommand = "synth generate";
  m.config = {{"client", a.live ? "live" : "mock"}, {"canned_dir", a.canned_dir}, {"options", to_json(a.opt)},
              {"topics", topics.topics}};
  json nj = json::array();
  for (auto const &n : notions)
    nj.push_back(to_json(n));
  m.config["notions"] = nj;
  m.seed = a.opt.seed;
  if (!a.notions.empty())
    m.add_input(a.notions);
  if (!a.topics.empty())
    m.add_input(a.topics);
  m.artifacts = {a.out};
  m.write(manifest_path(a.run_manifest, a.out));

  auto ds = generate_notion_dataset(*client, notions, topics, a.opt);
  write_file(a.out, serialize_grammar_examples(ds.examples));
  std::cout << ds.examples.size() << " sentences (" << ds.generation_calls << " generation calls, " << ds.tagging_calls
            << " tagging calls, " << ds.skipped_responses << " skipped responses) -> " << a.out << "\n";
  return kExitOk;
}

struct SynthWiktionaryArgs
{
  bool mock = false, live = false;
  std::string canned_dir, in, out, run_manifest;
};

inline int synth_wiktionary(SynthWiktionaryArgs const &a)
{
  if (a.mock == a.live)
    throw UsageError("choose exactly one of --mock or --live");
  auto entries = parse_wiktionary_csv(a.in);
  auto client = make_client(a.live, a.canned_dir);
  RunManifest m;
  m.subcommand = "synth wiktionary";
  m.config = {{"client", a.live ? "live" : "mock"}, {"canned_dir", a.canned_dir}};
  m.add_input(a.in);
  m.artifacts = {a.out};
  m.write(manifest_path(a.run_manifest, a.out));
  auto filled = fill_wiktionary_examples(*client, entries);
  write_file(a.out, serialize_wiktionary_csv(entries));
  std::cout << "filled " << filled << " of " << entries.size() << " entries -> " << a.out << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- train

struct TrainArgs
{
  bool mlm = false;
  std::string mlm_wikt, mlm_gram; // auxiliary data paths
  std::vector<std::string> corpus;
  std::string kind, format, tokenizer, out, log, run_manifest;
  std::string batch_sizes;
  bool init_only = false;
  std::size_t log_every = 0;
  ModelConfig model;
  TrainingConfig train;
};

inline int train(TrainArgs a)
{
  int const selected = int(a.mlm) + int(!a.mlm_wikt.empty()) + int(!a.mlm_gram.empty());
  if (selected != 1 && !a.init_only)
    throw UsageError("choose exactly one objective: --mlm, --mlm-wikt <csv> or --mlm-gram <jsonl>");
  AuxObjective objective = !a.mlm_wikt.empty()   ? AuxObjective::definition
                           : !a.mlm_gram.empty() ? AuxObjective::grammar
                                                 : AuxObjective::none;
  if (objective == AuxObjective::none)
    a.model.decoder_layers = 0;
  else if (a.model.decoder_layers == 0)
    throw UsageError("--decoder-layers must be positive for multi-objective training");

  auto tok = SubwordModel::load(a.tokenizer);
  a.model.vocab_size = tok.size();
  a.model.max_positions = std::max(a.model.max_positions, a.train.context_size);
  a.model.seed = a.train.seed;
  a.model.validate();
  a.train.validate();

  std::vector<std::size_t> batch_sizes{a.train.batch_size};
  if (!a.batch_sizes.empty())
    batch_sizes = parse_size_list(a.batch_sizes);

  RunManifest m;
  m.subcommand = "train";
  m.config = {{"objective", to_string(objective)}, {"model", to_json(a.model)}, {"training", to_json(a.train)},
              {"batch_sizes", batch_sizes},        {"init_only", a.init_only}, {"kind", a.kind},
              {"format", a.format}};
  m.seed = a.train.seed;
  m.add_input(a.tokenizer);

  if (a.init_only)
  {
    m.artifacts = {a.out};
    m.write(manifest_path(a.run_manifest, a.out));
    save_checkpoint(init_params<float>(a.model), a.out);
    std::cout << "untrained checkpoint -> " << a.out << "\n";
    return kExitOk;
  }

  std::vector<Document> docs;
  for (auto const &path : a.corpus)
  {
    auto part = load_corpus_file(path, a.kind, a.format);
    docs.insert(docs.end(), part.begin(), part.end());
    m.add_input(path);
  }
  if (docs.empty())
    throw DataError("training corpus is empty");
  auto examples = pack_examples(tok, docs, a.train.context_size);
  m.config["corpus_hash"] = examples_hash(examples);

  AuxBatch aux;
  if (objective == AuxObjective::definition)
  {
    aux = build_definition_batch(parse_wiktionary_csv(a.mlm_wikt), tok, a.model.max_positions);
    m.add_input(a.mlm_wikt);
  }
  else if (objective == AuxObjective::grammar)
  {
    aux = build_grammar_batch(load_grammar_examples(a.mlm_gram), tok, a.model.max_positions);
    m.add_input(a.mlm_gram);
  }
  m.config["aux_items"] = aux.items.size();

  std::vector<std::pair<std::string, std::string>> outputs; // checkpoint, log
  for (auto bs : batch_sizes)
  {
    bool const tagged = batch_sizes.size() > 1;
    auto ck = tagged ? with_suffix(a.out, cat("bs", bs)) : a.out;
    auto lg = a.log.empty() ? ck + ".log.jsonl" : (tagged ? with_suffix(a.log, cat("bs", bs)) : a.log);
    outputs.emplace_back(ck, lg);
    m.artifacts.push_back(ck);
    m.artifacts.push_back(lg);
  }
  m.write(manifest_path(a.run_manifest, a.out));

  for (std::size_t i = 0; i < batch_sizes.size(); ++i)
  {
    auto cfg = a.train;
    cfg.batch_size = batch_sizes[i];
    auto progress = [&](StepRecord const &r) {
      if (a.log_every && r.step % a.log_every == 0)
        std::clog << "step " << r.step << " lr " << r.lr << " loss " << r.total_loss << "\n";
    };
    auto res = objective == AuxObjective::none
                   ? train_mlm(examples, a.model, cfg, progress)
                   : train_multi_objective(examples, aux.items, objective, a.model, cfg, progress);
    save_checkpoint(res.params, outputs[i].first);
    write_file(outputs[i].second, res.log.to_jsonl());
    write_file(outputs[i].first + ".manifest.json", res.log.manifest.dump(2) + "\n");
    auto const &last = res.log.steps.back();
    std::cout << "batch " << cfg.batch_size << ": " << res.log.steps.size() << " steps, final loss "
              << last.total_loss << " -> " << outputs[i].first << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------- eval

struct EvalArgs
{
  std::string checkpoint, tokenizer, pairs, blimp, toy, report, run_manifest;
  std::size_t n = 200;
  std::uint64_t seed = 0;
};

inline int eval(EvalArgs const &a)
{
  int const sources = int(!a.pairs.empty()) + int(!a.blimp.empty()) + int(!a.toy.empty());
  if (sources != 1)
    throw UsageError("choose exactly one of --pairs, --blimp or --toy");
  auto params = load_checkpoint<float>(a.checkpoint);
  auto tok = SubwordModel::load(a.tokenizer);
  if (tok.size() != params.config.vocab_size)
    throw DataError(cat("tokenizer has ", tok.size(), " pieces but the checkpoint expects ", params.config.vocab_size));
  std::vector<MinimalPair> pairs;
  std::string corpus_id;
  RunManifest m;
  m.subcommand = "eval";
  m.seed = a.seed;
  m.add_input(a.checkpoint);
  m.add_input(a.tokenizer);
  if (!a.pairs.empty())
  {
    pairs = load_pairs(a.pairs);
    m.add_input(a.pairs);
    corpus_id = hash_file(a.pairs);
  }
  else if (!a.blimp.empty())
  {
    pairs = load_blimp(a.blimp);
    m.add_input(a.blimp);
    corpus_id = hash_file(a.blimp);
  }
  else
  {
    pairs = generate_toy_minimal_pairs(parse_toy_kind(a.toy), a.n, a.seed);
    corpus_id = cat("toy:", a.toy, ":", a.n, ":", a.seed);
  }
  m.config = {{"pairs", a.pairs}, {"blimp", a.blimp}, {"toy", a.toy}, {"n", a.n}, {"pair_count", pairs.size()}};
  if (!a.report.empty())
    m.artifacts = {a.report};
  m.write(manifest_path(a.run_manifest, a.report));

  auto report = evaluate_suite(params, tok, pairs, hash_file(a.checkpoint), corpus_id);
  std::cout << report_table(report);
  if (!a.report.empty())
    write_file(a.report, to_json(report).dump(2) + "\n");
  return kExitOk;
}
} // namespace cli

// ---------------------------------------------------------------- wiring

inline int run_cli(int argc, char const *const *argv)
{
  CLI::App app{"Linguistic-knowledge language-model pipeline", "l2lm"};
  app.set_config("--config", "", "TOML/INI file with option values; command-line flags take precedence");
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  app.set_config("--config", "", "TOML/INI file of option values; command-line flags win");
  app.fallthrough();

  // corpus
  auto *corpus = app.add_subcommand("corpus", "Corpus statistics, mixing and triplet flattening");
  corpus->require_subcommand(1);
  cli::CorpusStatsArgs stats;
  auto *c_stats = corpus->add_subcommand("stats", "Word counts per source file");
  c_stats->add_option("inputs", stats.inputs, "Corpus files")->required();
  c_stats->add_option("--kind", stats.kind, "Source kind for all inputs");
  c_stats->add_option("--format", stats.format, "Input format (documents, triplets, text-lines, ...)");
  c_stats->add_flag("--json", stats.as_json, "Print JSON");
  c_stats->add_option("--run-manifest", stats.run_manifest, "Write the run manifest here");

  cli::CorpusMixArgs mix;
  auto *c_mix = corpus->add_subcommand("mix", "Apply a corpus manifest with word budgets");
  c_mix->add_option("--manifest", mix.manifest, "Corpus manifest (JSON)")->required();
  c_mix->add_option("--out", mix.out, "Mixed documents (JSONL)")->required();
  c_mix->add_option("--run-manifest", mix.run_manifest, "Run manifest path (default <out>.run.json)");

  cli::FlattenArgs flat;
  auto *c_flat = corpus->add_subcommand("flatten-triplets", "Triplets to documents");
  c_flat->add_option("--in", flat.in, "Triplets (JSONL)")->required();
  c_flat->add_option("--out", flat.out, "Documents (JSONL)")->required();
  c_flat->add_option("--prefix", flat.prefix, "Document id prefix");
  c_flat->add_option("--run-manifest", flat.run_manifest, "Run manifest path (default <out>.run.json)");

  // tokenizer
  auto *tokenizer = app.add_subcommand("tokenizer", "Subword tokenizer");
  tokenizer->require_subcommand(1);
  cli::TokenizerTrainArgs tk;
  auto *t_train = tokenizer->add_subcommand("train", "Train a BPE vocabulary");
  t_train->add_option("--corpus", tk.corpus, "Corpus files")->required();
  t_train->add_option("--kind", tk.kind, "Source kind for all inputs");
  t_train->add_option("--format", tk.format, "Input format");
  t_train->add_option("--vocab-size", tk.vocab_size, "Vocabulary size including special tokens");
  t_train->add_option("--seed", tk.seed, "Recorded with the model");
  t_train->add_option("--out", tk.out, "Tokenizer JSON")->required();
  t_train->add_option("--run-manifest", tk.run_manifest, "Run manifest path (default <out>.run.json)");

  // synth
  auto *synth = app.add_subcommand("synth", "Prompt rendering and synthetic data generation");
  synth->require_subcommand(1);
  cli::SynthRenderArgs rn;
  auto *s_render = synth->add_subcommand("render", "Print a prompt");
  s_render->add_option("--figure", rn.figure, "1: generation, 2: tagging, 3: dictionary examples")->required();
  s_render->add_option("--notion", rn.notion);
  s_render->add_option("--alternate", rn.alternate);
  s_render->add_option("--topic", rn.topic);
  s_render->add_option("--count", rn.count, "Sentences requested");
  s_render->add_option("--sentence", rn.sentence);
  s_render->add_flag("--sentential", rn.sentential, "Yes/no form of the tagging prompt");
  s_render->add_option("--word", rn.word);
  s_render->add_option("--pos", rn.pos);
  s_render->add_option("--definition", rn.definition);
  s_render->add_option("--run-manifest", rn.run_manifest, "Write the run manifest here");

  cli::SynthGenerateArgs gen;
  auto *s_gen = synth->add_subcommand("generate", "Generate and tag a grammatical-notion dataset");
  s_gen->add_flag("--mock", gen.mock, "Offline deterministic client");
  s_gen->add_flag("--live", gen.live, std::string("Chat-completions endpoint; needs ") + kApiKeyEnv);
  s_gen->add_option("--canned-dir", gen.canned_dir, "Canned mock responses (<hash>.txt)");
  s_gen->add_option("--notions", gen.notions, "Notion list (JSONL); default: built-in list");
  s_gen->add_option("--topics", gen.topics, "Topic list (one per line); default: built-in list");
  s_gen->add_option("--per-notion", gen.opt.per_notion, "Sentences per notion");
  s_gen->add_option("--tag-count", gen.opt.tag_count, "Sentences tagged per notion");
  s_gen->add_option("--tag-notions", gen.opt.tag_notions, "Notions in the tag set");
  s_gen->add_option("--chunk-size", gen.opt.chunk_size, "Sentences requested per call");
  s_gen->add_option("--max-in-flight", gen.opt.max_in_flight, "Concurrent requests");
  s_gen->add_option("--seed", gen.opt.seed, "Topic rotation seed");
  s_gen->add_option("--out", gen.out, "Grammar examples (JSONL)")->required();
  s_gen->add_option("--run-manifest", gen.run_manifest, "Run manifest path (default <out>.run.json)");

  cli::SynthWiktionaryArgs wk;
  auto *s_wk = synth->add_subcommand("wiktionary", "Generate examples for dictionary entries that lack them");
  s_wk->add_flag("--mock", wk.mock, "Offline deterministic client");
  s_wk->add_flag("--live", wk.live, std::string("Chat-completions endpoint; needs ") + kApiKeyEnv);
  s_wk->add_option("--canned-dir", wk.canned_dir, "Canned mock responses (<hash>.txt)");
  s_wk->add_option("--in", wk.in, "Dictionary CSV")->required();
  s_wk->add_option("--out", wk.out, "Filled dictionary CSV")->required();
  s_wk->add_option("--run-manifest", wk.run_manifest, "Run manifest path (default <out>.run.json)");

  // train
  cli::TrainArgs tr;
  auto *train = app.add_subcommand("train", "Pretrain an encoder (MLM, optionally with an auxiliary objective)");
  train->add_flag("--mlm", tr.mlm, "Masked language modelling only");
  train->add_option("--mlm-wikt", tr.mlm_wikt, "MLM + definition generation from this dictionary CSV");
  train->add_option("--mlm-gram", tr.mlm_gram, "MLM + notion answering from these grammar examples (JSONL)");
  train->add_option("--corpus", tr.corpus, "Corpus files");
  train->add_option("--kind", tr.kind, "Source kind for corpus files");
  train->add_option("--format", tr.format, "Corpus format");
  train->add_option("--tokenizer", tr.tokenizer, "Tokenizer JSON")->required();
  train->add_option("--out", tr.out, "Checkpoint path")->required();
  train->add_option("--log", tr.log, "Training log (JSONL; default <out>.log.jsonl)");
  train->add_flag("--init-only", tr.init_only, "Write the untrained initial checkpoint and stop");
  train->add_option("--log-every", tr.log_every, "Progress line every N steps (0: quiet)");
  train->add_option("--layers", tr.model.n_layers, "Encoder layers");
  train->add_option("--heads", tr.model.n_heads, "Attention heads");
  train->add_option("--d-model", tr.model.d_model, "Hidden size");
  train->add_option("--d-ff", tr.model.d_ff, "Feed-forward size");
  train->add_option("--max-positions", tr.model.max_positions, "Position table size");
  tr.model.decoder_layers = 1;
  train->add_option("--decoder-layers", tr.model.decoder_layers, "Decoder layers (multi-objective only)");
  train->add_option("--dropout", tr.model.dropout, "Dropout rate");
  train->add_option("--lr", tr.train.learning_rate, "Peak learning rate");
  train->add_option("--weight-decay", tr.train.weight_decay, "Decoupled weight decay");
  train->add_option("--warmup", tr.train.warmup_steps, "Warmup steps");
  train->add_option("--beta1", tr.train.beta1, "AdamW beta1");
  train->add_option("--beta2", tr.train.beta2, "AdamW beta2");
  train->add_option("--eps", tr.train.eps, "AdamW epsilon");
  train->add_option("--batch-size", tr.train.batch_size, "Batch size");
  train->add_option("--batch-sizes", tr.batch_sizes, "Train once per batch size, e.g. 64,256");
  train->add_option("--epochs", tr.train.epochs, "Epochs");
  train->add_option("--context-size", tr.train.context_size, "Tokens per packed example");
  train->add_option("--seed", tr.train.seed, "Run seed");
  train->add_option("--aux-weight", tr.train.aux_weight, "Auxiliary loss weight");
  train->add_option("--aux-batch-size", tr.train.aux_batch_size, "Auxiliary items per step (0: batch size)");
  train->add_option("--mask-prob", tr.train.masking.mask_prob, "MLM selection probability");
  train->add_option("--checkpoint-interval", tr.train.checkpoint_interval, "Save every N steps (0: off)");
  train->add_option("--checkpoint-dir", tr.train.checkpoint_dir, "Directory for intermediate checkpoints");
  train->add_option("--run-manifest", tr.run_manifest, "Run manifest path (default <out>.run.json)");

  // eval
  cli::EvalArgs ev;
  auto *eval = app.add_subcommand("eval", "Minimal-pair evaluation by pseudo-log-likelihood");
  eval->add_option("--checkpoint", ev.checkpoint, "Checkpoint")->required();
  eval->add_option("--tokenizer", ev.tokenizer, "Tokenizer JSON")->required();
  eval->add_option("--pairs", ev.pairs, "Pairs (JSONL: good, bad, phenomenon)");
  eval->add_option("--blimp", ev.blimp, "BLiMP-format pairs (JSONL: sentence_good, sentence_bad, UID)");
  eval->add_option("--toy", ev.toy, "Generated pairs: subject-verb or determiner-noun");
  eval->add_option("--n", ev.n, "Number of generated pairs");
  eval->add_option("--seed", ev.seed, "Generator seed");
  eval->add_option("--report", ev.report, "Report file (JSON)");
  eval->add_option("--run-manifest", ev.run_manifest, "Run manifest path (default <report>.run.json)");

  try
  {
    app.parse(argc, argv);
  }
  catch (CLI::ParseError const &e)
  {
    int const code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try
  {
    if (c_stats->parsed())
      return cli::corpus_stats(stats);
    if (c_mix->parsed())
      return cli::corpus_mix(mix);
    if (c_flat->parsed())
      return cli::corpus_flatten(flat);
    if (t_train->parsed())
      return cli::tokenizer_train(tk);
    if (s_render->parsed())
      return cli::synth_render(rn);
    if (s_gen->parsed())
      return cli::synth_generate(gen);
    if (s_wk->parsed())
      return cli::synth_wiktionary(wk);
    if (train->parsed())
      return cli::train(tr);
    if (eval->parsed())
      return cli::eval(ev);
  }
  catch (UsageError const &e)
  {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  catch (DataError const &e)
  {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  catch (std::exception const &e)
  {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  std::cerr << "error: no command\n";
  return kExitUsage;
}

} // namespace l2lm
