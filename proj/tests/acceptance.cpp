// Desk-scale acceptance run: one PASS/FAIL line per criterion, exit 1 if any fail.
#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>

#include "support.hpp"

using namespace l2lm;

namespace
{
struct Outcome
{
  bool pass;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Outcome gradients()
{
  auto t0 = Clock::now();
  double worst = 0;
  std::string where;
  for (std::uint64_t seed = 1; seed <= 5; ++seed)
  {
    auto r = testkit::gradient_check(seed);
    if (r.max_rel_error > worst)
      worst = r.max_rel_error, where = r.worst_tensor;
  }
  double const secs = seconds_since(t0);
  return {worst < 1e-4 && secs < 60, cat("5 configs, max rel err ", worst, " (", where, "), ", secs, "s")};
}

Outcome mlm_learning()
{
  auto t0 = Clock::now();
  auto docs = flatten_triplets(testkit::synthetic_triplets(167, 1)); // 501 sentences
  docs.resize(500);
  auto tok = train_subwords(docs, 2000, 1);
  auto examples = pack_examples(tok, docs, 64);
  ModelConfig mc; // 4 layers, d=128
  mc.vocab_size = tok.size();
  TrainingConfig tc;
  tc.batch_size = 1;
  tc.learning_rate = 1e-3;
  tc.warmup_steps = 100;
  tc.epochs = 50;
  tc.seed = 1;
  auto r = train_mlm(examples, mc, tc);
  auto const n = r.log.steps.size();
  double const last_epoch = r.log.mean(n - r.steps_per_epoch, n, &StepRecord::mlm_loss);
  double const target = 0.5 * std::log(2000.0);
  double const secs = seconds_since(t0);
  return {last_epoch < target && secs < 600,
          cat("final-epoch MLM loss ", last_epoch, " vs ", target, ", ", n, " steps, ", secs, "s")};
}

constexpr std::uint64_t kAgreementSeed = 7;

Outcome grammatical_preference()
{
  auto sentences = generate_agreement_sentences(5000, kAgreementSeed);
  std::set<std::string> seen(sentences.begin(), sentences.end());
  auto pairs = generate_toy_minimal_pairs(ToyKind::subject_verb, 500, kAgreementSeed + 1, seen);
  auto docs = testkit::as_documents(sentences);
  auto tok = train_subwords(docs, 289, 1); // the most this corpus supports: every word is one piece
  auto examples = pack_examples(tok, docs, 64);
  ModelConfig mc;
  mc.n_layers = 2;
  mc.n_heads = 4;
  mc.d_model = 64;
  mc.d_ff = 128;
  mc.dropout = 0.0;
  mc.vocab_size = tok.size();
  mc.seed = 1;
  // Loss sits near the unigram entropy for ~2000 steps before context use
  // kicks in, so this needs many more epochs than the default.
  TrainingConfig tc;
  tc.batch_size = 8;
  tc.learning_rate = 2e-3;
  tc.warmup_steps = 50;
  tc.epochs = 150;
  tc.seed = 1;
  auto untrained = evaluate_suite(init_params<float>(mc), tok, pairs).macro_average();
  auto trained = evaluate_suite(train_mlm(examples, mc, tc).params, tok, pairs).macro_average();
  return {trained >= 0.80 && untrained >= 0.45 && untrained <= 0.55,
          cat("trained ", trained, ", untrained ", untrained, " on 500 held-out pairs")};
}

Outcome masking_statistics()
{
  std::size_t const V = 100006; // random replacements almost never equal the original
  auto rng = make_rng(3, RngPurpose::masking);
  std::size_t eligible = 0, selected = 0, masked = 0, random = 0, kept = 0;
  TrainingExample ex;
  for (int b = 0; b < 1000; ++b)
  {
    ex.ids.clear();
    for (int i = 0; i < 1000; ++i)
      ex.ids.push_back(static_cast<TokenId>(kNumSpecialTokens + (b * 1000 + i) % 50000));
    auto item = apply_mlm_masking(ex, MaskingConfig{}, V, rng);
    for (std::size_t i = 0; i < ex.ids.size(); ++i)
    {
      ++eligible;
      if (item.labels[i] == kIgnoreLabel)
        continue;
      ++selected;
      if (item.input[i] == kMask)
        ++masked;
      else if (item.input[i] == ex.ids[i])
        ++kept;
      else
        ++random;
    }
  }
  double const rate = double(selected) / double(eligible);
  double const fm = double(masked) / double(selected), fr = double(random) / double(selected),
               fk = double(kept) / double(selected);
  bool const ok = std::abs(rate - 0.15) <= 0.002 && std::abs(fm - 0.8) <= 0.01 && std::abs(fr - 0.1) <= 0.01 &&
                  std::abs(fk - 0.1) <= 0.01;
  return {ok, cat(eligible, " positions, rate ", rate, ", split ", fm, "/", fr, "/", fk)};
}

Outcome schedule()
{
  TrainingConfig cfg; // peak 2e-4, warmup 4000
  std::size_t const total = 100000;
  double worst = 0;
  auto check = [&](std::size_t step, double expected) { worst = std::max(worst, std::abs(lr_at(step, cfg, total) - expected)); };
  check(0, 0.0);
  check(4000, 2e-4);
  check(total, 0.0);
  for (std::size_t s = 0; s <= total; s += 37)
  {
    double const expected = s < 4000 ? 2e-4 * (double(s) / 4000.0) : 2e-4 * (1.0 - double(s - 4000) / double(total - 4000));
    check(s, expected);
  }
  return {worst <= 1e-12, cat("max abs deviation ", worst)};
}

Outcome strip_identity()
{
  auto cfg = testkit::tiny_config(21, 2);
  auto full = init_params<float>(cfg);
  auto stripped = strip_decoder(full);
  auto rng = make_rng(21, RngPurpose::toy_pairs);
  std::size_t identical = 0;
  for (int i = 0; i < 100; ++i)
  {
    std::vector<TokenId> ids;
    std::size_t const len = 1 + uniform_below(rng, cfg.max_positions);
    for (std::size_t t = 0; t < len; ++t)
      ids.push_back(testkit::random_token(rng, cfg.vocab_size));
    auto a = mlm_logits(full, encoder_forward(full, ids));
    auto b = mlm_logits(stripped, encoder_forward(stripped, ids));
    identical += a.size() == b.size() && std::memcmp(a.data(), b.data(), sizeof(float) * a.size()) == 0;
  }
  return {identical == 100 && !stripped.has_decoder(), cat(identical, "/100 inputs bit-identical")};
}

Outcome pll_oracle()
{
  auto cfg = testkit::tiny_config(31, 0);
  auto p = init_params<double>(cfg);
  auto rng = make_rng(31, RngPurpose::toy_pairs);
  for_each_tensor(
      [&](std::string const &, TensorKind, Matrix<double> &t) {
        for (Eigen::Index i = 0; i < t.size(); ++i)
          t.data()[i] += uniform01(rng) - 0.5;
      },
      p);
  double worst = 0;
  for (int i = 0; i < 100; ++i)
  {
    std::vector<TokenId> ids;
    std::size_t const len = 1 + uniform_below(rng, 20);
    for (std::size_t t = 0; t < len; ++t)
      ids.push_back(testkit::random_token(rng, cfg.vocab_size));
    worst = std::max(worst, std::abs(pseudo_log_likelihood(p, ids) - testkit::brute_force_pll(p, ids)));
  }
  auto u = init_params<double>(cfg);
  u.mlm_head.W.setZero();
  u.mlm_head.b.setZero();
  double uworst = 0;
  for (std::size_t L = 1; L <= 30; ++L)
  {
    std::vector<TokenId> ids(L, 7);
    uworst = std::max(uworst, std::abs(pseudo_log_likelihood(u, ids) - double(L) * std::log(1.0 / double(cfg.vocab_size))));
  }
  return {worst <= 1e-5 && uworst <= 1e-9, cat("brute-force max diff ", worst, ", uniform max diff ", uworst)};
}

Outcome lambda_zero()
{
  auto docs = testkit::as_documents(testkit::synthetic_sentences(60, 8));
  auto tok = train_subwords(docs, 120, 0);
  auto examples = pack_examples(tok, docs, 32);
  ModelConfig mc;
  mc.n_layers = 1;
  mc.n_heads = 2;
  mc.d_model = 16;
  mc.d_ff = 32;
  mc.vocab_size = tok.size();
  mc.decoder_layers = 1;
  TrainingConfig tc;
  tc.batch_size = 4;
  tc.epochs = 3;
  tc.warmup_steps = 2;
  tc.context_size = 32;
  tc.learning_rate = 1e-3;
  tc.seed = 5;
  tc.aux_weight = 0.0;
  std::vector<WiktionaryEntry> dict{{"cat", "noun", "a small animal", {"The cat sat."}},
                                    {"run", "verb", "to move fast", {"They run."}}};
  auto aux = build_definition_batch(dict, tok, 32).items;
  auto multi = train_multi_objective(examples, aux, AuxObjective::definition, mc, tc);
  auto pure = train_mlm(examples, mc, tc);
  bool const same = serialize_checkpoint(multi.params) == serialize_checkpoint(pure.params);
  return {same, cat(same ? "identical" : "different", " encoder checkpoints after ", pure.log.steps.size(), " steps")};
}

Outcome budget_safety()
{
  auto rng = make_rng(41, RngPurpose::toy_pairs);
  std::size_t violations = 0, words = 0;
  // Shortfall warnings are expected here; keep them off the console.
  std::ostringstream sink;
  auto *saved = std::clog.rdbuf(sink.rdbuf());
  for (int trial = 0; trial < 1000; ++trial)
  {
    CorpusManifest m;
    m.seed = trial;
    std::size_t const n_entries = 1 + uniform_below(rng, 4);
    std::vector<std::vector<Document>> sources;
    std::size_t sum = 0;
    for (std::size_t e = 0; e < n_entries; ++e)
    {
      std::size_t const budget = uniform_below(rng, 400);
      m.entries.push_back({cat("s", e), "", SourceKind::unconstrained, budget, ""});
      sum += budget;
      std::vector<Document> docs;
      std::size_t const nd = uniform_below(rng, 40);
      for (std::size_t d = 0; d < nd; ++d)
      {
        std::string text;
        std::size_t const nw = 1 + uniform_below(rng, 30);
        for (std::size_t w = 0; w < nw; ++w)
          text += (w ? " w" : "w") + std::to_string(w);
        docs.push_back(Document::make(cat("s", e, "_", d), SourceKind::unconstrained, text));
      }
      sources.push_back(std::move(docs));
    }
    m.total_budget = sum + uniform_below(rng, 100);
    auto res = mix_corpora(m, sources);
    std::vector<std::size_t> actual(n_entries, 0);
    for (auto const &d : res.documents)
      actual[std::stoul(d.id.substr(1, d.id.find('_') - 1))] += d.word_count;
    std::size_t total = 0;
    for (std::size_t e = 0; e < n_entries; ++e)
    {
      violations += actual[e] > m.entries[e].budget || actual[e] != res.words_per_entry[e];
      total += actual[e];
    }
    violations += total > m.total_budget;
    words += total;
  }
  std::clog.rdbuf(saved);
  return {violations == 0, cat("1000 manifests, ", violations, " violations, ", words, " words mixed")};
}

Outcome template_fidelity()
{
  std::string const dir = L2LM_GOLDEN_DIR;
  std::size_t mismatches = 0;
  auto compare = [&](std::string const &file, std::string const &rendered) {
    mismatches += read_file(dir + "/" + file) != rendered;
  };
  compare("figure1.txt", render_generation_prompt(NotionSpec{"<notion>", "<alternate notion>", false}, "<topic>"));
  compare("figure2.txt", render_tagging_prompt("<sentence>", NotionSpec{"<notion>", std::nullopt, false}));
  compare("figure2_sentential.txt", render_tagging_prompt("<sentence>", NotionSpec{"<notion>", std::nullopt, true}));
  compare("figure3.txt", render_wiktionary_example_prompt(WiktionaryEntry{"<word>", "<part of speech>", "<definition>", {}}));

  auto rng = make_rng(51, RngPurpose::toy_pairs);
  std::size_t failures = 0;
  for (int trial = 0; trial < 1000; ++trial)
  {
    std::vector<std::string> items;
    std::size_t const n = 1 + uniform_below(rng, 12);
    for (std::size_t i = 0; i < n; ++i)
    {
      std::string s;
      std::size_t const words = 1 + uniform_below(rng, 8);
      for (std::size_t w = 0; w < words; ++w)
        s += (w ? " " : "") + std::string(1 + uniform_below(rng, 7), static_cast<char>('a' + uniform_below(rng, 26)));
      items.push_back(s + ".");
    }
    failures += parse_numbered_list(render_numbered_list(items), n) != items;
  }
  return {mismatches == 0 && failures == 0,
          cat(4 - mismatches, "/4 golden files match, ", 1000 - failures, "/1000 lists round-trip")};
}

std::string pipeline_report(std::filesystem::path const &dir)
{
  std::string a, b;
  for (auto const &s : testkit::synthetic_sentences(80, 61))
    a += s + "\n";
  for (auto const &s : generate_agreement_sentences(80, 61))
    b += s + "\n";
  write_file((dir / "a.txt").string(), a);
  write_file((dir / "b.txt").string(), b);
  json manifest{{"total_budget", 1200},
                {"seed", 61},
                {"entries",
                 {{{"path", "a.txt"}, {"kind", "unconstrained"}, {"budget", 600}},
                  {{"path", "b.txt"}, {"kind", "unconstrained"}, {"budget", 600}}}}};
  auto mixed = mix_corpora(manifest_from_json(manifest, dir.string())).documents;
  write_file((dir / "mixed.jsonl").string(), serialize_documents(mixed));
  auto tok = train_subwords(mixed, 150, 61);
  tok.save((dir / "tok.json").string());
  ModelConfig mc;
  mc.n_layers = 1;
  mc.n_heads = 2;
  mc.d_model = 16;
  mc.d_ff = 32;
  mc.vocab_size = tok.size();
  TrainingConfig tc;
  tc.batch_size = 4;
  tc.epochs = 2;
  tc.warmup_steps = 2;
  tc.context_size = 32;
  tc.learning_rate = 1e-3;
  tc.seed = 61;
  auto trained = train_mlm(pack_examples(tok, mixed, 32), mc, tc);
  save_checkpoint(trained.params, (dir / "m.ckpt").string());
  auto params = load_checkpoint<float>((dir / "m.ckpt").string());
  auto report = evaluate_suite(params, SubwordModel::load((dir / "tok.json").string()),
                               generate_toy_minimal_pairs(ToyKind::subject_verb, 50, 62),
                               hash_file((dir / "m.ckpt").string()), "toy:subject-verb:50:62");
  write_file((dir / "report.json").string(), to_json(report).dump(2) + "\n");
  return read_file((dir / "report.json").string());
}

Outcome end_to_end()
{
  auto r1 = pipeline_report(testkit::temp_dir("accept_e2e_1"));
  auto r2 = pipeline_report(testkit::temp_dir("accept_e2e_2"));
  return {r1 == r2, cat(r1 == r2 ? "identical" : "different", " report files (", r1.size(), " bytes)")};
}
} // namespace

int main()
{
  std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient correctness", gradients},
      {"MLM learning", mlm_learning},
      {"grammatical preference", grammatical_preference},
      {"masking statistics", masking_statistics},
      {"schedule exactness", schedule},
      {"decoder-strip identity", strip_identity},
      {"PLL oracle equivalence", pll_oracle},
      {"lambda=0 reduction", lambda_zero},
      {"corpus budget safety", budget_safety},
      {"template fidelity", template_fidelity},
      {"end-to-end determinism", end_to_end},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i)
  {
    Outcome o;
    try
    {
      o = criteria[i].second();
    }
    catch (std::exception const &e)
    {
      o = {false, cat("exception: ", e.what())};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << (i + 1) << " " << criteria[i].first << ": " << o.detail
              << std::endl;
  }
  return failed ? 1 : 0;
}
