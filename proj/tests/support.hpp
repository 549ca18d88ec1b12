#pragma once

// Fixtures and independent oracles shared by the unit tests and the
// acceptance binary.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "l2lm/l2lm.hpp"

namespace l2lm::testkit
{

inline std::filesystem::path temp_dir(std::string const &name)
{
  auto dir = std::filesystem::temp_directory_path() / ("l2lm_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline ModelConfig tiny_config(std::uint64_t seed, std::size_t decoder_layers = 1)
{
  ModelConfig c;
  c.n_layers = 1;
  c.n_heads = 2;
  c.d_model = 8;
  c.d_ff = 16;
  c.vocab_size = 11;
  c.max_positions = 64;
  c.decoder_layers = decoder_layers;
  c.dropout = 0.0;
  c.seed = seed;
  return c;
}

inline TokenId random_token(Rng &rng, std::size_t vocab)
{
  return static_cast<TokenId>(kNumSpecialTokens + uniform_below(rng, vocab - kNumSpecialTokens));
}

// Random MLM + auxiliary objective over a tiny vocabulary, with a PAD tail on
// one MLM item and both memory modes on the auxiliary side.
inline Objective random_objective(ModelConfig const &c, std::uint64_t seed)
{
  auto rng = make_rng(seed, RngPurpose::toy_pairs, 99);
  Objective obj;
  for (std::size_t n = 0; n < 2; ++n)
  {
    MlmItem item;
    std::size_t const len = 4 + uniform_below(rng, 4);
    for (std::size_t t = 0; t < len; ++t)
    {
      item.input.push_back(random_token(rng, c.vocab_size));
      item.labels.push_back(kIgnoreLabel);
    }
    if (n == 1)
      item.input.insert(item.input.end(), {kPad, kPad}), item.labels.insert(item.labels.end(), {kIgnoreLabel, kIgnoreLabel});
    for (std::size_t t = 0; t < len; t += 2)
    {
      item.labels[t] = item.input[t];
      item.input[t] = kMask;
    }
    obj.mlm.push_back(item);
  }
  if (c.decoder_layers > 0)
  {
    for (std::size_t n = 0; n < 2; ++n)
    {
      AuxItem a;
      std::size_t const len = 3 + uniform_below(rng, 3);
      for (std::size_t t = 0; t < len; ++t)
        a.encoder_input.push_back(random_token(rng, c.vocab_size));
      if (n == 0)
      {
        a.encoder_input.insert(a.encoder_input.begin() + 1, kMark);
        a.memory_index = 2;
      }
      for (std::size_t t = 0; t < 3; ++t)
        a.target.push_back(random_token(rng, c.vocab_size));
      a.target.push_back(kSep);
      obj.aux.push_back(a);
    }
    obj.aux_weight = 0.7;
  }
  return obj;
}

struct GradCheckResult
{
  double max_rel_error = 0.0;
  std::string worst_tensor;
  std::size_t coordinates = 0;
};

// Central finite differences on every coordinate of every tensor.
inline GradCheckResult gradient_check(std::uint64_t seed, double h = 1e-5)
{
  auto const c = tiny_config(seed);
  auto params = init_params<double>(c);
  // Non-trivial layer norms and biases, so their gradients are exercised.
  auto rng = make_rng(seed, RngPurpose::init, 7);
  for_each_tensor(
      [&](std::string const &, TensorKind kind, Matrix<double> &t) {
        if (kind != TensorKind::weight)
          for (Eigen::Index i = 0; i < t.size(); ++i)
            t.data()[i] += 0.2 * (uniform01(rng) - 0.5);
        else
          t *= 10.0;
      },
      params);
  auto const obj = random_objective(c, seed);
  auto grads = zeros_like(params);
  loss_and_gradients(params, obj, grads);

  GradCheckResult res;
  auto probe = params;
  std::vector<Matrix<double> *> analytic;
  for_each_tensor([&](std::string const &, TensorKind, Matrix<double> &g) { analytic.push_back(&g); }, grads);
  std::size_t k = 0;
  for_each_tensor(
      [&](std::string const &name, TensorKind, Matrix<double> &t) {
        auto const &g = *analytic[k++];
        for (Eigen::Index i = 0; i < t.size(); ++i)
        {
          double const orig = t.data()[i];
          t.data()[i] = orig + h;
          double const up = objective_loss(probe, obj).total;
          t.data()[i] = orig - h;
          double const down = objective_loss(probe, obj).total;
          t.data()[i] = orig;
          double const numeric = (up - down) / (2 * h);
          double const a = g.data()[i];
          double const rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
          ++res.coordinates;
          if (rel > res.max_rel_error)
          {
            res.max_rel_error = rel;
            res.worst_tensor = name;
          }
        }
      },
      probe);
  return res;
}

// Naive PLL: full logits for every masked copy, log-softmax written out
// by hand in long double.
template<typename S>
double brute_force_pll(ParameterSet<S> const &p, std::vector<TokenId> const &ids)
{
  long double total = 0;
  for (std::size_t i = 0; i < ids.size(); ++i)
  {
    auto masked = ids;
    masked[i] = kMask;
    auto logits = mlm_logits(p, encoder_forward(p, masked));
    long double z = 0;
    for (Eigen::Index v = 0; v < logits.cols(); ++v)
      z += std::exp(static_cast<long double>(logits(static_cast<Eigen::Index>(i), v)));
    total += static_cast<long double>(logits(static_cast<Eigen::Index>(i), ids[i])) - std::log(z);
  }
  return static_cast<double>(total);
}

// English-like clauses over a large invented lexicon (stems built from
// syllables plus regular suffixes), rich enough to support a 2000-piece BPE
// vocabulary from a few hundred sentences.
class SyntheticGrammar
{
public:
  struct Clause
  {
    std::string subject, verb_stem, object, pp, adverb;
  };

  explicit SyntheticGrammar(std::uint64_t seed)
      : lex_rng_(make_rng(seed, RngPurpose::synthesis, 2)), rng_(make_rng(seed, RngPurpose::synthesis, 1))
  {
    nouns_ = lexicon(700);
    verbs_ = lexicon(350);
    adjectives_ = lexicon(250);
    adverbs_ = lexicon(60);
  }

  Clause clause()
  {
    Clause c;
    c.subject = noun_phrase();
    c.verb_stem = zipf(verbs_);
    c.object = noun_phrase();
    if (uniform_below(rng_, 2))
      c.pp = pick(kPreps) + " " + noun_phrase();
    if (uniform_below(rng_, 3) == 0)
      c.adverb = zipf(adverbs_) + "ly";
    return c;
  }

  std::string noun_phrase()
  {
    std::string np = pick(kDets);
    if (uniform_below(rng_, 2))
      np += " " + zipf(adjectives_) + (uniform_below(rng_, 3) == 0 ? "ous" : "");
    return np + " " + zipf(nouns_) + (uniform_below(rng_, 3) == 0 ? "s" : "");
  }

  std::string active(Clause const &c)
  {
    return sentence(c.subject + " " + c.verb_stem + pick(kVerbSuffix) + " " + c.object + tail(c));
  }

  std::string passive(Clause const &c)
  {
    return sentence(c.object + " was " + c.verb_stem + "ed by " + c.subject + tail(c));
  }

private:
  static inline const std::vector<std::string> kOnsets = {"b",  "d",  "f",  "g",  "k",  "l",  "m",  "n",
                                                          "p",  "r",  "s",  "t",  "v",  "z",  "br", "cl",
                                                          "dr", "gr", "pl", "st", "tr", "sh", "ch", "th"};
  static inline const std::vector<std::string> kNuclei = {"a", "e", "i", "o", "u", "ai", "ea", "oo", "ou", "y"};
  static inline const std::vector<std::string> kCodas = {"", "", "n", "r", "l", "m", "st", "nd", "ck", "x"};
  static inline const std::vector<std::string> kDets = {"the", "a", "every", "this", "that", "some", "our", "their"};
  static inline const std::vector<std::string> kPreps = {"near", "under", "beside", "with",
                                                         "behind", "across", "for", "into"};
  static inline const std::vector<std::string> kVerbSuffix = {"ed", "s", "es", "ing"};

  std::vector<std::string> lexicon(std::size_t count)
  {
    std::vector<std::string> v;
    for (std::size_t k = 0; k < count; ++k)
    {
      std::string w;
      std::size_t const syl = 1 + uniform_below(lex_rng_, 3);
      for (std::size_t j = 0; j < syl; ++j)
        w += kOnsets[uniform_below(lex_rng_, kOnsets.size())] + kNuclei[uniform_below(lex_rng_, kNuclei.size())];
      v.push_back(w + kCodas[uniform_below(lex_rng_, kCodas.size())]);
    }
    return v;
  }

  // Roughly Zipfian: squaring a uniform draw favours low indices.
  std::string const &zipf(std::vector<std::string> const &v)
  {
    double const u = uniform01(rng_);
    return v[static_cast<std::size_t>(u * u * static_cast<double>(v.size()))];
  }

  std::string const &pick(std::vector<std::string> const &v) { return v[uniform_below(rng_, v.size())]; }

  static std::string tail(Clause const &c)
  {
    std::string t;
    if (!c.pp.empty())
      t += " " + c.pp;
    if (!c.adverb.empty())
      t += " " + c.adverb;
    return t;
  }

  std::string sentence(std::string s)
  {
    s += uniform_below(rng_, 5) == 0 ? "!" : ".";
    s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    return s;
  }

  Rng lex_rng_, rng_;
  std::vector<std::string> nouns_, verbs_, adjectives_, adverbs_;
};

inline std::vector<std::string> synthetic_sentences(std::size_t n, std::uint64_t seed)
{
  SyntheticGrammar g(seed);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i)
    out.push_back(g.active(g.clause()));
  return out;
}

// Anchor, passive paraphrase, and a hard negative that swaps the subject.
inline std::vector<TripletExample> synthetic_triplets(std::size_t n, std::uint64_t seed)
{
  SyntheticGrammar g(seed);
  std::vector<TripletExample> out;
  for (std::size_t i = 0; i < n; ++i)
  {
    auto c = g.clause();
    auto neg = c;
    while (neg.subject == c.subject)
      neg.subject = g.noun_phrase();
    out.push_back({g.active(c), g.passive(c), g.active(neg)});
  }
  return out;
}

inline std::vector<Document> as_documents(std::vector<std::string> const &lines, SourceKind kind = SourceKind::unconstrained)
{
  std::vector<Document> docs;
  for (std::size_t i = 0; i < lines.size(); ++i)
    docs.push_back(Document::make(cat("doc", i), kind, lines[i]));
  return docs;
}

} // namespace l2lm::testkit
