#pragma once

// Minimal-pair evaluation with MLM pseudo-log-likelihood, and a closed
// template grammar that produces agreement minimal pairs.

#include <cmath>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "l2lm/model/network.hpp"

namespace l2lm
{

struct MinimalPair
{
  std::string good;
  std::string bad;
  std::string phenomenon;

  void validate() const
  {
    if (good.empty() || bad.empty())
      throw DataError("minimal pair has an empty sentence");
    if (good == bad)
      throw DataError(cat("minimal pair has identical sentences: '", good, "'"));
  }

  bool operator==(MinimalPair const &) const = default;
};

inline json to_json(MinimalPair const &p)
{
  return json{{"good", p.good}, {"bad", p.bad}, {"phenomenon", p.phenomenon}};
}

inline std::string serialize_pairs(std::vector<MinimalPair> const &pairs)
{
  std::string out;
  for (auto const &p : pairs)
    out += to_json(p).dump() + "\n";
  return out;
}

inline std::vector<MinimalPair> parse_pairs(std::string const &content, std::string const &origin)
{
  std::vector<MinimalPair> out;
  detail::for_each_jsonl(content, origin, [&](std::size_t line, json const &j) {
    MinimalPair p{detail::required_string(j, "good", origin, line), detail::required_string(j, "bad", origin, line),
                  j.value("phenomenon", std::string("default"))};
    p.validate();
    out.push_back(std::move(p));
  });
  return out;
}

inline std::vector<MinimalPair> load_pairs(std::string const &path)
{
  return parse_pairs(read_file(path), path);
}

// BLiMP files: sentence_good, sentence_bad, and UID as the phenomenon.
inline std::vector<MinimalPair> parse_blimp(std::string const &content, std::string const &origin)
{
  std::vector<MinimalPair> out;
  detail::for_each_jsonl(content, origin, [&](std::size_t line, json const &j) {
    MinimalPair p{detail::required_string(j, "sentence_good", origin, line),
                  detail::required_string(j, "sentence_bad", origin, line), j.value("UID", std::string("blimp"))};
    p.validate();
    out.push_back(std::move(p));
  });
  return out;
}

inline std::vector<MinimalPair> load_blimp(std::string const &path)
{
  return parse_blimp(read_file(path), path);
}

// ---------------------------------------------------------------- scoring

// Sum over positions of log p(original token | sentence with only that
// position masked). No length normalization.
template<typename S>
double pseudo_log_likelihood(ParameterSet<S> const &p, std::vector<TokenId> const &ids)
{
  if (ids.empty())
    throw DataError("cannot score an empty token sequence");
  if (ids.size() > p.config.max_positions)
    throw DataError(cat("sentence of ", ids.size(), " tokens exceeds max_positions ", p.config.max_positions));
  double total = 0.0;
  auto masked = ids;
  for (std::size_t i = 0; i < ids.size(); ++i)
  {
    masked[i] = kMask;
    auto const enc = encoder_forward(p, masked);
    masked[i] = ids[i];
    Matrix<S> logits = p.mlm_head.b;
    logits.noalias() += enc.hidden.row(static_cast<Eigen::Index>(i)) * p.mlm_head.W;
    double const m = static_cast<double>(logits.maxCoeff());
    double z = 0.0;
    for (Eigen::Index v = 0; v < logits.cols(); ++v)
      z += std::exp(static_cast<double>(logits(0, v)) - m);
    total += static_cast<double>(logits(0, ids[i])) - m - std::log(z);
  }
  return total;
}

template<typename S>
double pseudo_log_likelihood(ParameterSet<S> const &p, SubwordModel const &tok, std::string const &sentence)
{
  return pseudo_log_likelihood(p, tok.encode(sentence));
}

// Exact ties count as incorrect.
template<typename S>
bool score_pair(ParameterSet<S> const &p, SubwordModel const &tok, MinimalPair const &pair)
{
  return pseudo_log_likelihood(p, tok, pair.good) > pseudo_log_likelihood(p, tok, pair.bad);
}

struct PhenomenonScore
{
  std::string phenomenon;
  std::size_t correct = 0;
  std::size_t total = 0;

  double accuracy() const { return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0; }
  bool operator==(PhenomenonScore const &) const = default;
};

struct EvalReport
{
  std::vector<PhenomenonScore> phenomena; // sorted by name
  std::size_t pair_count = 0;
  std::string model_id;
  std::string corpus_id;

  double macro_average() const
  {
    if (phenomena.empty())
      return 0.0;
    double s = 0;
    for (auto const &p : phenomena)
      s += p.accuracy();
    return s / static_cast<double>(phenomena.size());
  }

  double accuracy(std::string const &phenomenon) const
  {
    for (auto const &p : phenomena)
      if (p.phenomenon == phenomenon)
        return p.accuracy();
    throw UsageError(cat("no phenomenon '", phenomenon, "' in report"));
  }

  bool operator==(EvalReport const &) const = default;
};

inline json to_json(EvalReport const &r)
{
  json ph = json::array();
  for (auto const &p : r.phenomena)
    ph.push_back({{"phenomenon", p.phenomenon}, {"correct", p.correct}, {"total", p.total}, {"accuracy", p.accuracy()}});
  return json{{"phenomena", ph},
              {"macro_average", r.macro_average()},
              {"pair_count", r.pair_count},
              {"model_id", r.model_id},
              {"corpus_id", r.corpus_id}};
}

inline EvalReport report_from_json(json const &j)
{
  try
  {
    EvalReport r;
    for (auto const &p : j.at("phenomena"))
      r.phenomena.push_back(
          {p.at("phenomenon").get<std::string>(), p.at("correct").get<std::size_t>(), p.at("total").get<std::size_t>()});
    r.pair_count = j.at("pair_count").get<std::size_t>();
    r.model_id = j.value("model_id", "");
    r.corpus_id = j.value("corpus_id", "");
    return r;
  }
  catch (json::exception const &e)
  {
    throw DataError(cat("malformed evaluation report: ", e.what()));
  }
}

inline std::string report_table(EvalReport const &r)
{
  std::size_t w = 10;
  for (auto const &p : r.phenomena)
    w = std::max(w, p.phenomenon.size());
  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(w)) << "phenomenon" << "  correct  total  accuracy\n";
  os << std::fixed << std::setprecision(4);
  for (auto const &p : r.phenomena)
    os << std::left << std::setw(static_cast<int>(w)) << p.phenomenon << "  " << std::right << std::setw(7) << p.correct
       << "  " << std::setw(5) << p.total << "  " << std::setw(8) << p.accuracy() << "\n";
  os << std::left << std::setw(static_cast<int>(w)) << "macro" << "  " << std::right << std::setw(7) << "" << "  "
     << std::setw(5) << r.pair_count << "  " << std::setw(8) << r.macro_average() << "\n";
  return os.str();
}

template<typename S>
EvalReport evaluate_suite(ParameterSet<S> const &p, SubwordModel const &tok, std::vector<MinimalPair> const &pairs,
                          std::string model_id = {}, std::string corpus_id = {})
{
  if (pairs.empty())
    throw UsageError("evaluate_suite: no pairs");
  std::map<std::string, PhenomenonScore> by_name;
  for (auto const &pair : pairs)
  {
    pair.validate();
    auto &s = by_name[pair.phenomenon];
    s.phenomenon = pair.phenomenon;
    ++s.total;
    s.correct += score_pair(p, tok, pair);
  }
  EvalReport r;
  for (auto &[name, s] : by_name)
    r.phenomena.push_back(s);
  r.pair_count = pairs.size();
  r.model_id = std::move(model_id);
  r.corpus_id = std::move(corpus_id);
  return r;
}

// ---------------------------------------------------------------- toy grammar

enum class ToyKind
{
  subject_verb,
  determiner_noun,
};

inline std::string to_string(ToyKind k)
{
  return k == ToyKind::subject_verb ? "subject-verb" : "determiner-noun";
}

inline ToyKind parse_toy_kind(std::string const &s)
{
  if (s == "subject-verb")
    return ToyKind::subject_verb;
  if (s == "determiner-noun")
    return ToyKind::determiner_noun;
  throw UsageError(cat("unknown toy pair kind '", s, "' (expected subject-verb or determiner-noun)"));
}

namespace toy
{
struct Inflected
{
  char const *sg;
  char const *pl;
};

inline constexpr Inflected kNouns[] = {
    {"cat", "cats"},       {"dog", "dogs"},         {"bird", "birds"},       {"farmer", "farmers"},
    {"teacher", "teachers"}, {"child", "children"}, {"doctor", "doctors"},   {"horse", "horses"},
    {"student", "students"}, {"king", "kings"},     {"girl", "girls"},       {"boy", "boys"},
    {"baker", "bakers"},   {"pilot", "pilots"},     {"singer", "singers"},   {"woman", "women"},
    {"man", "men"},        {"mouse", "mice"},       {"sailor", "sailors"},   {"painter", "painters"}};

// (singular, plural) present tense.
inline constexpr Inflected kVerbs[] = {
    {"sleeps", "sleep"},   {"runs", "run"},       {"sings", "sing"},     {"laughs", "laugh"},
    {"waits", "wait"},     {"smiles", "smile"},   {"walks", "walk"},     {"works", "work"},
    {"dances", "dance"},   {"jumps", "jump"},     {"swims", "swim"},     {"reads", "read"},
    {"cries", "cry"},      {"eats", "eat"},       {"talks", "talk"},     {"listens", "listen"},
    {"travels", "travel"}, {"wins", "win"},       {"falls", "fall"},     {"returns", "return"}};

inline constexpr char const *kAdjectives[] = {"old", "young", "happy", "tired", "small",
                                              "tall", "quiet", "brave", "clever", "busy"};
inline constexpr char const *kAdverbs[] = {"quickly", "slowly", "today", "often", "again",
                                           "outside", "loudly", "here", "now", "together"};

inline constexpr char const *kSingularDets[] = {"this", "that", "a", "every", "each"};
inline constexpr char const *kPluralDets[] = {"these", "those", "many", "several", "some"};

template<typename T, std::size_t N>
T const &pick(T const (&arr)[N], Rng &rng)
{
  return arr[uniform_below(rng, N)];
}

struct Parts
{
  std::string det, adj, noun, verb, adv;

  std::string join() const
  {
    std::string s = det;
    for (auto const *w : {&adj, &noun, &verb, &adv})
      if (!w->empty())
        s += " " + *w;
    return s;
  }
};

// "the [adj] noun verb [adv]" with number agreement.
inline Parts sample_subject_verb(Rng &rng, bool plural)
{
  Parts p;
  p.det = "the";
  if (uniform_below(rng, 2))
    p.adj = pick(kAdjectives, rng);
  auto const &n = pick(kNouns, rng);
  auto const &v = pick(kVerbs, rng);
  p.noun = plural ? n.pl : n.sg;
  p.verb = plural ? v.pl : v.sg;
  if (uniform_below(rng, 2))
    p.adv = pick(kAdverbs, rng);
  return p;
}

inline Parts sample_determiner_noun(Rng &rng, bool plural)
{
  auto p = sample_subject_verb(rng, plural);
  p.det = plural ? pick(kPluralDets, rng) : pick(kSingularDets, rng);
  return p;
}
} // namespace toy

// Grammatical sentences from the same template grammar (both agreement
// kinds), for training corpora.
inline std::vector<std::string> generate_agreement_sentences(std::size_t n, std::uint64_t seed)
{
  auto rng = make_rng(seed, RngPurpose::toy_pairs, 1);
  std::vector<std::string> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
  {
    bool const plural = uniform_below(rng, 2) == 1;
    auto p = uniform_below(rng, 2) ? toy::sample_subject_verb(rng, plural) : toy::sample_determiner_noun(rng, plural);
    out.push_back(p.join());
  }
  return out;
}

// Pairs alternate singular / plural subjects and differ in exactly one word:
// the verb (subject-verb) or the determiner (determiner-noun).
inline std::vector<MinimalPair> generate_toy_minimal_pairs(ToyKind kind, std::size_t n, std::uint64_t seed,
                                                           std::set<std::string> const &exclude_good = {})
{
  if (n == 0)
    throw UsageError("toy pair count must be at least 1");
  auto rng = make_rng(seed, RngPurpose::toy_pairs, 2 + static_cast<std::uint64_t>(kind));
  std::vector<MinimalPair> out;
  std::set<std::string> seen;
  std::size_t attempts = 0;
  std::size_t const max_attempts = 1000 * n + 100000;
  while (out.size() < n)
  {
    if (++attempts > max_attempts)
      throw UsageError(cat("cannot generate ", n, " unique ", to_string(kind), " pairs"));
    bool const plural = out.size() % 2 == 1;
    toy::Parts good, bad;
    if (kind == ToyKind::subject_verb)
    {
      good = toy::sample_subject_verb(rng, plural);
      bad = good;
      for (auto const &v : toy::kVerbs)
        if (good.verb == v.sg || good.verb == v.pl)
          bad.verb = plural ? v.sg : v.pl;
    }
    else
    {
      good = toy::sample_determiner_noun(rng, plural);
      bad = good;
      auto const idx = uniform_below(rng, std::size(toy::kSingularDets));
      bad.det = plural ? toy::kSingularDets[idx] : toy::kPluralDets[idx];
    }
    auto g = good.join();
    if (exclude_good.count(g) || !seen.insert(g).second)
      continue;
    out.push_back({std::move(g), bad.join(), to_string(kind)});
  }
  return out;
}

} // namespace l2lm
