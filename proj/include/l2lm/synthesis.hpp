#pragma once

// Prompt templates for LLM-built training data, their response parsers, and
// the notion-dataset orchestration loop over a pluggable completion client.

#include <algorithm>
#include <cctype>
#include <chrono>
#include <filesystem>
#include <functional>
#include <future>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "l2lm/common.hpp"
#include "l2lm/corpus.hpp"

namespace l2lm
{

struct NotionSpec
{
  std::string notion;
  std::optional<std::string> alternate;
  bool sentential = false; // clause-level notion, tagged with yes/no

  bool operator==(NotionSpec const &) const = default;
};

inline std::vector<std::string> default_topics()
{
  return {"accounting", "anthropology", "archaeology", "architecture", "art",
          "artificial intelligence", "astronomy", "biology", "botany", "business",
          "chemistry", "computer science", "cosmology", "criminology", "design",
          "economics", "education", "environmental science", "engineering", "geography",
          "geology", "government", "history", "humanities", "international relations",
          "journalism", "law", "literature", "linguistics", "math",
          "medicine", "music", "philosophy", "physics", "poetry",
          "politics", "psychology", "religion", "sports", "theater"};
}

struct TopicList
{
  std::vector<std::string> topics = default_topics();

  void validate() const
  {
    if (topics.empty())
      throw UsageError("topic list is empty");
    std::set<std::string> seen;
    for (auto const &t : topics)
      if (!seen.insert(t).second)
        throw UsageError(cat("duplicate topic '", t, "'"));
  }

  bool contains(std::string_view t) const { return std::find(topics.begin(), topics.end(), t) != topics.end(); }
};

// The tagged notions of the worked example sentence, with alternates where a
// clear opposite exists.
inline std::vector<NotionSpec> default_notions()
{
  using S = std::optional<std::string>;
  return {
      {"common noun", S{"proper noun"}, false},
      {"collective noun", {}, false},
      {"singular noun", S{"plural noun"}, false},
      {"plural noun", S{"singular noun"}, false},
      {"nominative case", S{"accusative case"}, false},
      {"simple past tense", S{"simple present tense"}, false},
      {"third person", S{"first person"}, false},
      {"plural verb", S{"singular verb"}, false},
      {"indicative mood", S{"subjunctive mood"}, false},
      {"non-gradable adjective", S{"gradable adjective"}, false},
      {"positive adjective", S{"comparative adjective"}, false},
      {"aspectual adverb", {}, false},
      {"comparative adverb", S{"superlative adverb"}, false},
      {"object pronoun", S{"subject pronoun"}, false},
      {"case preposition", {}, false},
      {"coordinating", S{"subordinating"}, false},
      {"indefinite determiner", S{"definite determiner"}, false},
      {"noun phrase", {}, false},
      {"adjectival modification", {}, false},
      {"verb phrase", {}, false},
      {"transitive verb phrase", S{"intransitive verb phrase"}, false},
      {"direct object", S{"indirect object"}, false},
      {"adjunct clause", {}, true},
      {"ellipsis gapping", {}, true},
      {"ellipsis pseudo-gapping", {}, true},
  };
}

inline json to_json(NotionSpec const &n)
{
  json j{{"notion", n.notion}, {"sentential", n.sentential}};
  if (n.alternate)
    j["alternate"] = *n.alternate;
  return j;
}

inline std::vector<NotionSpec> parse_notions(std::string_view content, std::string_view origin = "<notions>")
{
  std::vector<NotionSpec> out;
  try
  {
    for (auto const &j : json::parse(content))
    {
      NotionSpec n;
      n.notion = j.at("notion").get<std::string>();
      if (j.contains("alternate") && j["alternate"].is_string())
        n.alternate = j["alternate"].get<std::string>();
      n.sentential = j.value("sentential", false);
      if (n.notion.empty())
        throw DataError(cat(origin, ": empty notion name"));
      out.push_back(std::move(n));
    }
  }
  catch (json::exception const &e)
  {
    throw DataError(cat(origin, ": ", e.what()));
  }
  return out;
}

// ---------------------------------------------------------------- templates

inline std::string render_generation_prompt(NotionSpec const &spec, std::string_view topic, std::size_t count = 500)
{
  std::string contains = spec.notion;
  if (spec.alternate)
    contains += cat(" (as opposed to ", *spec.alternate, ")");
  return cat("You are an expert in grammar. Write ", count, " detailed sentences containing ", contains,
             ". Make sure to write ", count,
             " detailed sentences that are all different from each other. Try to make the sentences sufficiently "
             "different, for example, don't start every sentence with \"the\", make both short and long sentences, "
             "and write about the topic of ",
             topic, ". Don't write anything else.");
}

inline std::string render_tagging_prompt(std::string_view sentence, NotionSpec const &spec)
{
  if (trim(sentence).empty())
    throw UsageError("tagging prompt needs a non-empty sentence");
  std::string prompt = cat("Consider the sentence: ", sentence, "\nDoes the sentence contain the notion of ",
                           spec.notion, "? ");
  if (spec.sentential)
    prompt += "Answer with yes or no. Only write 'yes' or 'no', nothing else.";
  else
    prompt += "If so, write which word or words correspond to the notion. If not, write \"N/A\". Only write the "
              "word or words that correspond, or N/A otherwise.";
  return prompt;
}

// Only for entries that have no example sentences yet.
inline std::string render_wiktionary_example_prompt(WiktionaryEntry const &entry)
{
  if (!entry.examples.empty())
    throw UsageError(cat("entry '", entry.word, "' already has ", entry.examples.size(), " examples"));
  return cat("Give 3 examples of the word ", entry.word, " as a(n) ", entry.pos, ", where it means ",
             entry.definition,
             ". List the 3 examples in a numbered list, they should be full sentences. Don't say anything else. "
             "The format should look like:\n1. Example 1\n2. Example 2\n3. Example 3");
}

// ---------------------------------------------------------------- response parsing

// Items "k. text" (or "k) text") for k = 1..expected; other lines are ignored.
inline std::vector<std::string> parse_numbered_list(std::string_view response, std::size_t expected)
{
  if (expected < 1)
    throw UsageError("parse_numbered_list: expected must be at least 1");
  std::vector<std::optional<std::string>> items(expected);
  std::size_t found = 0;
  for (auto const &raw : split(response, '\n'))
  {
    auto line = trim(raw);
    std::size_t i = 0;
    while (i < line.size() && line[i] >= '0' && line[i] <= '9')
      ++i;
    if (i == 0 || i > 9 || i >= line.size() || (line[i] != '.' && line[i] != ')'))
      continue;
    auto index = std::stoull(std::string(line.substr(0, i)));
    auto text = trim(line.substr(i + 1));
    if (index < 1 || index > expected)
      continue;
    auto &slot = items[index - 1];
    if (slot)
      throw DataError(cat("numbered list repeats item ", index));
    slot = std::string(text);
    ++found;
  }
  if (found < expected)
    throw DataError(cat("numbered list has ", found, " of ", expected, " expected items"));
  std::vector<std::string> out;
  for (auto &s : items)
    out.push_back(std::move(*s));
  return out;
}

inline std::string render_numbered_list(std::vector<std::string> const &items)
{
  std::string out;
  for (std::size_t k = 0; k < items.size(); ++k)
    out += cat(k ? "\n" : "", k + 1, ". ", items[k]);
  return out;
}

inline TagValue parse_tag_response(std::string_view response, NotionSpec const &spec)
{
  auto r = trim(response);
  if (spec.sentential)
  {
    auto s = to_lower(r);
    while (!s.empty() && (s.back() == '.' || s.back() == '!'))
      s.pop_back();
    if (s == "yes")
      return TagValue::yes();
    if (s == "no")
      return TagValue::no();
    throw DataError(cat("expected yes or no for sentential notion '", spec.notion, "', got '", r, "'"));
  }
  if (r.empty() || iequals(r, "N/A") || iequals(r, "N/A."))
    return TagValue::absent();
  std::vector<std::string> words;
  for (auto const &part : split(r, ','))
  {
    auto w = trim(part);
    if (!w.empty())
      words.emplace_back(w);
  }
  if (words.empty())
    return TagValue::absent();
  return TagValue::of_words(std::move(words));
}

// ---------------------------------------------------------------- completion clients

class CompletionClient
{
public:
  virtual ~CompletionClient() = default;
  // May throw on transport failure; callers apply the retry policy.
  virtual std::string complete(std::string const &prompt) = 0;
};

class FunctionClient : public CompletionClient
{
public:
  explicit FunctionClient(std::function<std::string(std::string const &)> fn) : fn_(std::move(fn)) {}
  std::string complete(std::string const &prompt) override { return fn_(prompt); }

private:
  std::function<std::string(std::string const &)> fn_;
};

inline std::string prompt_key(std::string_view prompt)
{
  return hex64(fnv1a64(prompt));
}

// Offline stand-in for a live model. A canned response file <dir>/<prompt_key>.txt
// wins when present; otherwise a response is synthesized from the prompt hash,
// in the shape each template asks for.
class MockCompletionClient : public CompletionClient
{
public:
  MockCompletionClient() = default;
  explicit MockCompletionClient(std::filesystem::path canned_dir) : dir_(std::move(canned_dir)) {}

  std::string complete(std::string const &prompt) override
  {
    if (!dir_.empty())
    {
      auto file = dir_ / (prompt_key(prompt) + ".txt");
      if (std::filesystem::exists(file))
        return read_file(file.string());
    }
    return synthesize(prompt);
  }

  static std::string synthesize(std::string_view prompt)
  {
    auto h = fnv1a64(prompt);
    if (auto p = prompt.find("detailed sentences containing "); prompt.starts_with("You are an expert") &&
                                                                   p != std::string_view::npos)
    {
      auto count_at = prompt.find("Write ") + 6;
      auto count = std::stoull(std::string(prompt.substr(count_at, prompt.find(' ', count_at) - count_at)));
      auto notion_at = p + 30;
      auto notion_end = prompt.find_first_of("(.", notion_at);
      auto notion = trim(prompt.substr(notion_at, notion_end - notion_at));
      auto topic_at = prompt.find("topic of ") + 9;
      auto topic = prompt.substr(topic_at, prompt.find(". Don't", topic_at) - topic_at);
      static constexpr char const *openers[] = {"Researchers", "Students", "Every expert", "Many teachers",
                                                "Some critics", "Our group"};
      std::vector<std::string> items;
      for (std::size_t k = 0; k < count; ++k)
      {
        auto hk = splitmix64(h + k);
        items.push_back(cat(openers[hk % 6], " in ", topic, " discussed ", notion, " in case ", (hk >> 8) % 100000,
                            "."));
      }
      return render_numbered_list(items);
    }
    if (prompt.starts_with("Consider the sentence: "))
    {
      if (prompt.find("Answer with yes or no.") != std::string_view::npos)
        return (h & 1) ? "Yes" : "No";
      auto sent_end = prompt.find('\n');
      auto words = split_whitespace(prompt.substr(23, sent_end - 23));
      if (words.empty() || h % 3 == 0)
        return "N/A";
      std::string out;
      std::size_t n = 1 + (h >> 4) % 2;
      for (std::size_t k = 0; k < n; ++k)
      {
        auto w = words[(h >> (8 + 8 * k)) % words.size()];
        while (!w.empty() && !std::isalnum(static_cast<unsigned char>(w.back())))
          w.remove_suffix(1);
        out += cat(k ? ", " : "", w.empty() ? "it" : w);
      }
      return out;
    }
    if (prompt.starts_with("Give 3 examples of the word "))
    {
      auto word_at = std::size_t{28};
      auto word = prompt.substr(word_at, prompt.find(" as a(n) ") - word_at);
      return cat("1. The word ", word, " appears in this first sentence.\n2. People often use ", word,
                 " when they speak.\n3. She wrote ", word, " in her notebook yesterday.");
    }
    return cat("mock response ", hex64(h));
  }

private:
  std::filesystem::path dir_;
};

// ---------------------------------------------------------------- orchestration

struct RetryPolicy
{
  int attempts = 3;
  std::chrono::milliseconds initial_backoff{500};
};

inline std::string complete_with_retry(CompletionClient &client, std::string const &prompt, RetryPolicy const &retry)
{
  auto delay = retry.initial_backoff;
  for (int attempt = 1;; ++attempt)
  {
    try
    {
      return client.complete(prompt);
    }
    catch (std::exception const &e)
    {
      if (attempt >= retry.attempts)
        throw RuntimeError(cat("completion failed after ", attempt, " attempts: ", e.what()));
      log_warning(cat("completion attempt ", attempt, " failed: ", e.what()));
      if (delay.count() > 0)
        std::this_thread::sleep_for(delay);
      delay *= 2;
    }
  }
}

struct GenerationOptions
{
  std::size_t per_notion = 500;
  std::size_t tag_count = 100;
  std::size_t tag_notions = 50;
  std::size_t chunk_size = 25; // sentences requested per generation call
  std::uint64_t seed = 0;
  RetryPolicy retry;
  std::size_t max_in_flight = 1;
  // Generation for one notion gives up after this many unparseable responses.
  std::size_t max_parse_failures = 10;
};

inline json to_json(GenerationOptions const &o)
{
  return json{{"per_notion", o.per_notion},
              {"tag_count", o.tag_count},
              {"tag_notions", o.tag_notions},
              {"chunk_size", o.chunk_size},
              {"seed", o.seed},
              {"retry_attempts", o.retry.attempts},
              {"retry_initial_backoff_ms", o.retry.initial_backoff.count()},
              {"max_in_flight", o.max_in_flight}};
}

struct NotionDataset
{
  std::vector<GrammarExample> examples;
  std::size_t generation_calls = 0;
  std::size_t tagging_calls = 0;
  std::size_t skipped_responses = 0;
};

namespace detail
{
// Runs tasks[i]() for all i with at most `cap` in flight; results by index.
template<typename R>
std::vector<R> run_bounded(std::vector<std::function<R()>> const &tasks, std::size_t cap)
{
  std::vector<R> results(tasks.size());
  if (cap <= 1)
  {
    for (std::size_t i = 0; i < tasks.size(); ++i)
      results[i] = tasks[i]();
    return results;
  }
  for (std::size_t start = 0; start < tasks.size(); start += cap)
  {
    std::vector<std::future<R>> wave;
    for (std::size_t i = start; i < std::min(tasks.size(), start + cap); ++i)
      wave.push_back(std::async(std::launch::async, tasks[i]));
    for (std::size_t k = 0; k < wave.size(); ++k)
      results[start + k] = wave[k].get();
  }
  return results;
}

struct NotionSentences
{
  std::vector<std::pair<std::string, std::string>> sentences; // (sentence, topic)
  std::size_t calls = 0;
  std::size_t skipped = 0;
};
} // namespace detail

// For each notion, cycle through topics (starting offset drawn from the seed)
// requesting chunk_size sentences per call until per_notion are collected.
// Then the first tag_count sentences of each of the first tag_notions notions
// are tagged against every notion in that tag set.
inline NotionDataset generate_notion_dataset(CompletionClient &client, std::vector<NotionSpec> const &notions,
                                             TopicList const &topics, GenerationOptions const &opt)
{
  if (opt.tag_count > opt.per_notion)
    throw UsageError(cat("tag_count ", opt.tag_count, " exceeds per_notion ", opt.per_notion));
  if (opt.tag_notions > notions.size())
    throw UsageError(cat("tag_notions ", opt.tag_notions, " exceeds the ", notions.size(), " available notions"));
  if (opt.chunk_size == 0)
    throw UsageError("chunk_size must be positive");
  topics.validate();

  NotionDataset out;
  if (opt.per_notion == 0)
    return out;

  std::vector<std::function<detail::NotionSentences()>> gen_tasks;
  for (std::size_t n = 0; n < notions.size(); ++n)
  {
    gen_tasks.push_back([&, n]() {
      detail::NotionSentences res;
      auto rng = make_rng(opt.seed, RngPurpose::synthesis, n);
      auto const start = static_cast<std::size_t>(uniform_below(rng, topics.topics.size()));
      for (std::size_t call = 0; res.sentences.size() < opt.per_notion; ++call)
      {
        auto const &topic = topics.topics[(start + call) % topics.topics.size()];
        auto const want = std::min(opt.chunk_size, opt.per_notion - res.sentences.size());
        auto response = complete_with_retry(client, render_generation_prompt(notions[n], topic, want), opt.retry);
        ++res.calls;
        try
        {
          for (auto &s : parse_numbered_list(response, want))
            res.sentences.emplace_back(std::move(s), topic);
        }
        catch (DataError const &e)
        {
          ++res.skipped;
          log_warning(cat("notion '", notions[n].notion, "', topic '", topic, "': skipped response: ", e.what()));
          if (res.skipped > opt.max_parse_failures)
            throw RuntimeError(cat("notion '", notions[n].notion, "': too many unparseable responses"));
        }
      }
      return res;
    });
  }
  auto generated = detail::run_bounded(gen_tasks, opt.max_in_flight);

  std::vector<std::size_t> offsets;
  for (std::size_t n = 0; n < notions.size(); ++n)
  {
    offsets.push_back(out.examples.size());
    out.generation_calls += generated[n].calls;
    out.skipped_responses += generated[n].skipped;
    for (auto const &[sentence, topic] : generated[n].sentences)
    {
      GrammarExample g;
      g.sentence = sentence;
      g.topic = topic;
      g.source_notion = notions[n].notion;
      out.examples.push_back(std::move(g));
    }
  }

  struct Tagged
  {
    std::vector<GrammarTag> tags;
    std::size_t calls = 0;
    std::size_t skipped = 0;
  };
  std::vector<std::function<Tagged()>> tag_tasks;
  std::vector<std::size_t> tag_targets;
  for (std::size_t n = 0; n < opt.tag_notions; ++n)
    for (std::size_t k = 0; k < opt.tag_count && k < generated[n].sentences.size(); ++k)
    {
      auto const idx = offsets[n] + k;
      tag_targets.push_back(idx);
      tag_tasks.push_back([&, idx]() {
        Tagged t;
        for (std::size_t m = 0; m < opt.tag_notions; ++m)
        {
          auto response =
              complete_with_retry(client, render_tagging_prompt(out.examples[idx].sentence, notions[m]), opt.retry);
          ++t.calls;
          try
          {
            t.tags.push_back({notions[m].notion, parse_tag_response(response, notions[m])});
          }
          catch (DataError const &e)
          {
            ++t.skipped;
            log_warning(cat("tagging '", notions[m].notion, "': skipped response: ", e.what()));
          }
        }
        return t;
      });
    }
  auto tagged = detail::run_bounded(tag_tasks, opt.max_in_flight);
  for (std::size_t i = 0; i < tag_targets.size(); ++i)
  {
    out.examples[tag_targets[i]].tags = std::move(tagged[i].tags);
    out.tagging_calls += tagged[i].calls;
    out.skipped_responses += tagged[i].skipped;
  }
  for (auto const &g : out.examples)
    g.validate();
  return out;
}

// Fills entries that have no examples with three generated sentences.
// Unparseable responses leave the entry unchanged.
inline std::size_t fill_wiktionary_examples(CompletionClient &client, std::vector<WiktionaryEntry> &entries,
                                            RetryPolicy const &retry = {})
{
  std::size_t filled = 0;
  for (auto &e : entries)
  {
    if (!e.examples.empty())
      continue;
    auto response = complete_with_retry(client, render_wiktionary_example_prompt(e), retry);
    try
    {
      e.examples = parse_numbered_list(response, 3);
      ++filled;
    }
    catch (DataError const &err)
    {
      log_warning(cat("examples for '", e.word, "': ", err.what()));
    }
  }
  return filled;
}

} // namespace l2lm
