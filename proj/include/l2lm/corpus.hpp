#pragma once

// Corpus ingestion and word-budgeted mixing.
//
// On-disk formats:
//   documents   JSONL  {"id":..., "source":..., "text":...}
//   triplets    JSONL  {"sent0":..., "sent1":..., "hard_neg":...}
//   grammar     JSONL  GrammarExample records (see to_json below)
//   wiktionary  CSV    word,pos,definition,example_1..example_13
//   manifest    JSON   {"total_budget":N, "seed":S, "entries":[{name,path,kind,budget[,format]}]}

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "l2lm/common.hpp"

namespace l2lm
{

using json = nlohmann::json;

inline std::size_t count_words(std::string_view text)
{
  std::size_t n = 0;
  bool in_word = false;
  for (char c : text)
  {
    bool const space = is_space(c);
    if (!space && !in_word)
      ++n;
    in_word = !space;
  }
  return n;
}

enum class SourceKind
{
  unconstrained,
  triplet,
  grammar_gen,
  grammar_book,
  wiktionary,
};

inline constexpr SourceKind kAllSourceKinds[] = {SourceKind::unconstrained, SourceKind::triplet,
                                                 SourceKind::grammar_gen, SourceKind::grammar_book,
                                                 SourceKind::wiktionary};

inline std::string to_string(SourceKind k)
{
  switch (k)
  {
  case SourceKind::unconstrained:
    return "unconstrained";
  case SourceKind::triplet:
    return "triplet";
  case SourceKind::grammar_gen:
    return "grammar_gen";
  case SourceKind::grammar_book:
    return "grammar_book";
  case SourceKind::wiktionary:
    return "wiktionary";
  }
  return "unknown";
}

inline SourceKind parse_source_kind(std::string_view s)
{
  for (auto k : kAllSourceKinds)
    if (to_string(k) == s)
      return k;
  throw DataError(cat("unknown source kind '", s, "'"));
}

struct Document
{
  std::string id;
  SourceKind source = SourceKind::unconstrained;
  std::string text;
  std::size_t word_count = 0;

  static Document make(std::string id, SourceKind source, std::string text)
  {
    if (text.empty())
      throw DataError(cat("document '", id, "' has empty text"));
    Document d{std::move(id), source, std::move(text), 0};
    d.word_count = count_words(d.text);
    return d;
  }

  bool operator==(Document const &) const = default;
};

inline std::size_t total_words(std::vector<Document> const &docs)
{
  std::size_t n = 0;
  for (auto const &d : docs)
    n += d.word_count;
  return n;
}

// ---------------------------------------------------------------- documents

inline json to_json(Document const &d)
{
  return json{{"id", d.id}, {"source", to_string(d.source)}, {"text", d.text}};
}

inline std::string serialize_documents(std::vector<Document> const &docs)
{
  std::string out;
  for (auto const &d : docs)
  {
    out += to_json(d).dump();
    out += '\n';
  }
  return out;
}

namespace detail
{
// Calls fn(line_number, parsed_object) for each non-blank JSONL line.
template<typename Fn>
void for_each_jsonl(std::string_view content, std::string_view origin, Fn &&fn)
{
  std::size_t line_no = 0;
  for (auto const &raw : split(content, '\n'))
  {
    ++line_no;
    auto line = trim(raw);
    if (line.empty())
      continue;
    json j;
    try
    {
      j = json::parse(line);
    }
    catch (json::parse_error const &e)
    {
      throw DataError(cat(origin, ":", line_no, ": malformed record: ", e.what()));
    }
    if (!j.is_object())
      throw DataError(cat(origin, ":", line_no, ": malformed record: expected an object"));
    fn(line_no, j);
  }
}

inline std::string required_string(json const &j, char const *field, std::string_view origin, std::size_t line)
{
  auto it = j.find(field);
  if (it == j.end())
    throw DataError(cat(origin, ":", line, ": missing field '", field, "'"));
  if (!it->is_string())
    throw DataError(cat(origin, ":", line, ": field '", field, "' is not a string"));
  return it->get<std::string>();
}
} // namespace detail

inline std::vector<Document> parse_documents(std::string_view content, std::string_view origin = "<documents>")
{
  std::vector<Document> docs;
  detail::for_each_jsonl(content, origin, [&](std::size_t line, json const &j) {
    auto text = detail::required_string(j, "text", origin, line);
    auto id = j.contains("id") && j["id"].is_string() ? j["id"].get<std::string>() : cat("doc-", docs.size());
    auto kind = j.contains("source") ? parse_source_kind(detail::required_string(j, "source", origin, line))
                                     : SourceKind::unconstrained;
    if (text.empty())
      throw DataError(cat(origin, ":", line, ": empty text"));
    docs.push_back(Document::make(std::move(id), kind, std::move(text)));
  });
  return docs;
}

inline std::vector<Document> load_documents(std::string const &path)
{
  return parse_documents(read_file(path), path);
}

// One document per non-blank line.
inline std::vector<Document> parse_text_lines(std::string_view content, SourceKind kind, std::string_view id_prefix)
{
  std::vector<Document> docs;
  for (auto const &line : split(content, '\n'))
  {
    auto t = trim(line);
    if (!t.empty())
      docs.push_back(Document::make(cat(id_prefix, "-", docs.size()), kind, std::string(t)));
  }
  return docs;
}

// One document per blank-line separated paragraph, internal whitespace normalized.
inline std::vector<Document> parse_text_paragraphs(std::string_view content, SourceKind kind,
                                                   std::string_view id_prefix)
{
  std::vector<Document> docs;
  std::string para;
  auto flush = [&] {
    if (!para.empty())
      docs.push_back(Document::make(cat(id_prefix, "-", docs.size()), kind, normalize_whitespace(para)));
    para.clear();
  };
  for (auto const &line : split(content, '\n'))
  {
    if (trim(line).empty())
      flush();
    else
    {
      para += ' ';
      para += line;
    }
  }
  flush();
  return docs;
}

// ---------------------------------------------------------------- triplets

struct TripletExample
{
  std::string sent0;
  std::string sent1;
  std::string hard_neg;

  bool operator==(TripletExample const &) const = default;
};

inline std::vector<TripletExample> parse_triplets(std::string_view content, std::string_view origin = "<triplets>")
{
  std::vector<TripletExample> out;
  detail::for_each_jsonl(content, origin, [&](std::size_t line, json const &j) {
    TripletExample t{detail::required_string(j, "sent0", origin, line),
                     detail::required_string(j, "sent1", origin, line),
                     detail::required_string(j, "hard_neg", origin, line)};
    for (auto [name, value] : {std::pair{"sent0", &t.sent0}, {"sent1", &t.sent1}, {"hard_neg", &t.hard_neg}})
      if (trim(*value).empty())
        throw DataError(cat(origin, ":", line, ": field '", name, "' is empty"));
    if (t.sent0 == t.hard_neg)
      throw DataError(cat(origin, ":", line, ": sent0 and hard_neg are identical"));
    out.push_back(std::move(t));
  });
  return out;
}

inline std::vector<TripletExample> load_triplets(std::string const &path)
{
  return parse_triplets(read_file(path), path);
}

inline std::string serialize_triplets(std::vector<TripletExample> const &triplets)
{
  std::string out;
  for (auto const &t : triplets)
  {
    out += json{{"sent0", t.sent0}, {"sent1", t.sent1}, {"hard_neg", t.hard_neg}}.dump();
    out += '\n';
  }
  return out;
}

// All three members become plain training sentences, in member order.
inline std::vector<Document> flatten_triplets(std::vector<TripletExample> const &triplets,
                                              std::string_view id_prefix = "triplet")
{
  std::vector<Document> docs;
  docs.reserve(triplets.size() * 3);
  for (std::size_t i = 0; i < triplets.size(); ++i)
  {
    auto const &t = triplets[i];
    docs.push_back(Document::make(cat(id_prefix, "-", i, "-sent0"), SourceKind::triplet, t.sent0));
    docs.push_back(Document::make(cat(id_prefix, "-", i, "-sent1"), SourceKind::triplet, t.sent1));
    docs.push_back(Document::make(cat(id_prefix, "-", i, "-hard_neg"), SourceKind::triplet, t.hard_neg));
  }
  return docs;
}

// ---------------------------------------------------------------- wiktionary

inline constexpr std::size_t kMaxWiktionaryExamples = 13;

struct WiktionaryEntry
{
  std::string word;
  std::string pos;
  std::string definition;
  std::vector<std::string> examples;

  bool operator==(WiktionaryEntry const &) const = default;
};

namespace detail
{
struct CsvRecord
{
  std::vector<std::string> cells;
  std::size_t line = 0; // line the record starts on
};

// RFC 4180 style: quoted cells may contain delimiters, doubled quotes and newlines.
inline std::vector<CsvRecord> parse_csv(std::string_view text, char delim, std::string_view origin)
{
  std::vector<CsvRecord> records;
  std::size_t i = 0, line = 1;
  while (i < text.size())
  {
    CsvRecord rec;
    rec.line = line;
    std::string cell;
    bool record_done = false;
    while (!record_done)
    {
      cell.clear();
      if (i < text.size() && text[i] == '"')
      {
        ++i;
        bool closed = false;
        while (i < text.size())
        {
          char c = text[i];
          if (c == '"')
          {
            if (i + 1 < text.size() && text[i + 1] == '"')
            {
              cell += '"';
              i += 2;
              continue;
            }
            ++i;
            closed = true;
            break;
          }
          if (c == '\n')
            ++line;
          cell += c;
          ++i;
        }
        if (!closed)
          throw DataError(cat(origin, ": row ", records.size(), " (line ", rec.line, "): unterminated quoted cell"));
        if (i < text.size() && text[i] == '\r')
          ++i;
        if (i < text.size() && text[i] != delim && text[i] != '\n')
          throw DataError(cat(origin, ": row ", records.size(), " (line ", rec.line,
                              "): unexpected character after closing quote"));
      }
      else
      {
        while (i < text.size() && text[i] != delim && text[i] != '\n')
          cell += text[i++];
        if (!cell.empty() && cell.back() == '\r')
          cell.pop_back();
      }
      rec.cells.push_back(cell);
      if (i >= text.size())
        record_done = true;
      else if (text[i] == delim)
        ++i;
      else
      {
        ++i;
        ++line;
        record_done = true;
      }
    }
    bool blank = rec.cells.size() == 1 && rec.cells[0].empty();
    if (!blank)
      records.push_back(std::move(rec));
  }
  return records;
}

inline std::string csv_quote(std::string_view cell, char delim)
{
  bool needs = cell.find_first_of(std::string{delim, '"', '\n', '\r'}) != std::string_view::npos ||
               (!cell.empty() && (is_space(cell.front()) || is_space(cell.back())));
  if (!needs)
    return std::string(cell);
  std::string out = "\"";
  for (char c : cell)
  {
    if (c == '"')
      out += '"';
    out += c;
  }
  out += '"';
  return out;
}
} // namespace detail

// Header row must start with word,pos,definition followed by up to 13 example
// columns. Tab is used as the delimiter when the header contains one.
inline std::vector<WiktionaryEntry> parse_wiktionary_csv_text(std::string_view text,
                                                              std::string_view origin = "<wiktionary>")
{
  auto header_end = text.find('\n');
  auto header_line = text.substr(0, header_end);
  char const delim = header_line.find('\t') != std::string_view::npos ? '\t' : ',';
  auto records = detail::parse_csv(text, delim, origin);
  if (records.empty())
    return {};
  auto const &header = records.front().cells;
  static constexpr char const *expected[] = {"word", "pos", "definition"};
  if (header.size() < 3)
    throw DataError(cat(origin, ": header must start with word, pos, definition"));
  for (std::size_t c = 0; c < 3; ++c)
    if (to_lower(trim(header[c])) != expected[c])
      throw DataError(cat(origin, ": header column ", c + 1, " is '", header[c], "', expected '", expected[c], "'"));
  if (header.size() > 3 + kMaxWiktionaryExamples)
    throw DataError(cat(origin, ": header has ", header.size() - 3, " example columns (max ",
                        kMaxWiktionaryExamples, ")"));

  std::vector<WiktionaryEntry> entries;
  for (std::size_t r = 1; r < records.size(); ++r)
  {
    auto const &rec = records[r];
    auto where = [&] { return cat(origin, ": row ", r, " (line ", rec.line, ")"); };
    if (rec.cells.size() < 3)
      throw DataError(cat(where(), ": expected at least 3 cells, found ", rec.cells.size()));
    if (rec.cells.size() > 3 + kMaxWiktionaryExamples)
      throw DataError(cat(where(), ": ", rec.cells.size() - 3, " example cells exceeds the maximum of ",
                          kMaxWiktionaryExamples));
    WiktionaryEntry e;
    e.word = std::string(trim(rec.cells[0]));
    e.pos = std::string(trim(rec.cells[1]));
    e.definition = std::string(trim(rec.cells[2]));
    if (e.word.empty())
      throw DataError(cat(where(), ": empty word"));
    if (e.definition.empty())
      throw DataError(cat(where(), ": empty definition"));
    for (std::size_t c = 3; c < rec.cells.size(); ++c)
    {
      auto ex = trim(rec.cells[c]);
      if (!ex.empty())
        e.examples.emplace_back(ex);
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

inline std::vector<WiktionaryEntry> parse_wiktionary_csv(std::string const &path)
{
  return parse_wiktionary_csv_text(read_file(path), path);
}

inline std::string serialize_wiktionary_csv(std::vector<WiktionaryEntry> const &entries, char delim = ',')
{
  std::string out = cat("word", delim, "pos", delim, "definition");
  for (std::size_t k = 1; k <= kMaxWiktionaryExamples; ++k)
    out += cat(delim, "example_", k);
  out += '\n';
  for (auto const &e : entries)
  {
    if (e.examples.size() > kMaxWiktionaryExamples)
      throw DataError(cat("entry '", e.word, "' has ", e.examples.size(), " examples"));
    out += detail::csv_quote(e.word, delim);
    out += delim;
    out += detail::csv_quote(e.pos, delim);
    out += delim;
    out += detail::csv_quote(e.definition, delim);
    for (std::size_t k = 0; k < kMaxWiktionaryExamples; ++k)
    {
      out += delim;
      if (k < e.examples.size())
        out += detail::csv_quote(e.examples[k], delim);
    }
    out += '\n';
  }
  return out;
}

inline std::vector<Document> wiktionary_documents(std::vector<WiktionaryEntry> const &entries)
{
  std::vector<Document> docs;
  for (std::size_t i = 0; i < entries.size(); ++i)
  {
    auto const &e = entries[i];
    std::string text = e.pos.empty() ? cat(e.word, ": ", e.definition) : cat(e.word, " (", e.pos, "): ", e.definition);
    for (auto const &ex : e.examples)
      text += cat(" ", ex);
    docs.push_back(Document::make(cat("wikt-", i), SourceKind::wiktionary, std::move(text)));
  }
  return docs;
}

// ---------------------------------------------------------------- grammar examples

struct TagValue
{
  enum class Kind
  {
    words,
    sentential_yes,
    sentential_no,
    not_present,
  };
  Kind kind = Kind::not_present;
  std::vector<std::string> words;

  static TagValue of_words(std::vector<std::string> w) { return {Kind::words, std::move(w)}; }
  static TagValue yes() { return {Kind::sentential_yes, {}}; }
  static TagValue no() { return {Kind::sentential_no, {}}; }
  static TagValue absent() { return {Kind::not_present, {}}; }

  bool operator==(TagValue const &) const = default;
};

// Answer text as it appears in tagging responses.
inline std::string answer_text(TagValue const &v)
{
  switch (v.kind)
  {
  case TagValue::Kind::words:
  {
    std::string s;
    for (std::size_t i = 0; i < v.words.size(); ++i)
      s += (i ? ", " : "") + v.words[i];
    return s;
  }
  case TagValue::Kind::sentential_yes:
    return "yes";
  case TagValue::Kind::sentential_no:
    return "no";
  case TagValue::Kind::not_present:
    return "N/A";
  }
  return "N/A";
}

struct GrammarTag
{
  std::string notion;
  TagValue value;

  bool operator==(GrammarTag const &) const = default;
};

struct GrammarExample
{
  std::string sentence;
  std::string topic;
  std::string source_notion; // the notion the sentence was generated for
  std::vector<GrammarTag> tags;

  void validate() const
  {
    if (sentence.empty())
      throw DataError("grammar example has an empty sentence");
    std::set<std::string> seen;
    for (auto const &t : tags)
      if (!seen.insert(t.notion).second)
        throw DataError(cat("grammar example has two tags for notion '", t.notion, "'"));
  }

  bool operator==(GrammarExample const &) const = default;
};

inline json to_json(GrammarExample const &g)
{
  json tags = json::array();
  for (auto const &t : g.tags)
  {
    json v;
    switch (t.value.kind)
    {
    case TagValue::Kind::words:
      v = t.value.words;
      break;
    case TagValue::Kind::sentential_yes:
      v = "yes";
      break;
    case TagValue::Kind::sentential_no:
      v = "no";
      break;
    case TagValue::Kind::not_present:
      v = "N/A";
      break;
    }
    tags.push_back(json{{"notion", t.notion}, {"value", v}});
  }
  return json{{"sentence", g.sentence}, {"topic", g.topic}, {"notion", g.source_notion}, {"tags", tags}};
}

inline GrammarExample grammar_example_from_json(json const &j, std::string_view origin = "<grammar>",
                                                std::size_t line = 0)
{
  GrammarExample g;
  g.sentence = detail::required_string(j, "sentence", origin, line);
  g.topic = j.value("topic", "");
  g.source_notion = j.value("notion", "");
  if (j.contains("tags"))
  {
    for (auto const &t : j["tags"])
    {
      GrammarTag tag;
      tag.notion = detail::required_string(t, "notion", origin, line);
      auto const &v = t.at("value");
      if (v.is_array())
        tag.value = TagValue::of_words(v.get<std::vector<std::string>>());
      else if (v == "yes")
        tag.value = TagValue::yes();
      else if (v == "no")
        tag.value = TagValue::no();
      else if (v == "N/A")
        tag.value = TagValue::absent();
      else
        throw DataError(cat(origin, ":", line, ": bad tag value for '", tag.notion, "'"));
      g.tags.push_back(std::move(tag));
    }
  }
  try
  {
    g.validate();
  }
  catch (DataError const &e)
  {
    throw DataError(cat(origin, ":", line, ": ", e.what()));
  }
  return g;
}

inline std::string serialize_grammar_examples(std::vector<GrammarExample> const &examples)
{
  std::string out;
  for (auto const &g : examples)
  {
    out += to_json(g).dump();
    out += '\n';
  }
  return out;
}

inline std::vector<GrammarExample> parse_grammar_examples(std::string_view content,
                                                          std::string_view origin = "<grammar>")
{
  std::vector<GrammarExample> out;
  detail::for_each_jsonl(content, origin, [&](std::size_t line, json const &j) {
    out.push_back(grammar_example_from_json(j, origin, line));
  });
  return out;
}

inline std::vector<GrammarExample> load_grammar_examples(std::string const &path)
{
  return parse_grammar_examples(read_file(path), path);
}

inline std::vector<Document> grammar_documents(std::vector<GrammarExample> const &examples)
{
  std::vector<Document> docs;
  for (std::size_t i = 0; i < examples.size(); ++i)
    docs.push_back(Document::make(cat("gram-", i), SourceKind::grammar_gen, examples[i].sentence));
  return docs;
}

// ---------------------------------------------------------------- manifest + mixing

struct ManifestEntry
{
  std::string name;
  std::string path;
  SourceKind kind = SourceKind::unconstrained;
  std::size_t budget = 0;
  std::string format; // empty: inferred from kind and extension

  bool operator==(ManifestEntry const &) const = default;
};

struct CorpusManifest
{
  std::vector<ManifestEntry> entries;
  std::size_t total_budget = 0;
  std::uint64_t seed = 0;

  void validate() const
  {
    std::size_t sum = 0;
    for (auto const &e : entries)
      sum += e.budget;
    if (sum > total_budget)
      throw DataError(cat("manifest entry budgets sum to ", sum, " words, above total_budget ", total_budget));
  }
};

inline json to_json(CorpusManifest const &m)
{
  json entries = json::array();
  for (auto const &e : m.entries)
  {
    json j{{"name", e.name}, {"path", e.path}, {"kind", to_string(e.kind)}, {"budget", e.budget}};
    if (!e.format.empty())
      j["format"] = e.format;
    entries.push_back(j);
  }
  return json{{"total_budget", m.total_budget}, {"seed", m.seed}, {"entries", entries}};
}

// Relative entry paths resolve against base_dir.
inline CorpusManifest manifest_from_json(json const &j, std::filesystem::path const &base_dir = {})
{
  CorpusManifest m;
  try
  {
    m.total_budget = j.at("total_budget").get<std::size_t>();
    m.seed = j.value("seed", std::uint64_t{0});
    for (auto const &e : j.at("entries"))
    {
      ManifestEntry me;
      me.path = e.at("path").get<std::string>();
      me.name = e.value("name", std::filesystem::path(me.path).stem().string());
      me.kind = parse_source_kind(e.at("kind").get<std::string>());
      me.budget = e.at("budget").get<std::size_t>();
      me.format = e.value("format", "");
      if (!base_dir.empty() && std::filesystem::path(me.path).is_relative())
        me.path = (base_dir / me.path).string();
      m.entries.push_back(std::move(me));
    }
  }
  catch (json::exception const &e)
  {
    throw DataError(cat("invalid corpus manifest: ", e.what()));
  }
  m.validate();
  return m;
}

inline CorpusManifest load_manifest(std::string const &path)
{
  json j;
  try
  {
    j = json::parse(read_file(path));
  }
  catch (json::parse_error const &e)
  {
    throw DataError(cat(path, ": ", e.what()));
  }
  return manifest_from_json(j, std::filesystem::path(path).parent_path());
}

inline bool ends_with(std::string_view s, std::string_view suffix)
{
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

inline std::vector<Document> load_source(ManifestEntry const &entry)
{
  if (!std::filesystem::exists(entry.path))
    throw DataError(cat("source '", entry.name, "': file not found: ", entry.path));
  std::string fmt = entry.format;
  if (fmt.empty())
  {
    switch (entry.kind)
    {
    case SourceKind::triplet:
      fmt = "triplets";
      break;
    case SourceKind::grammar_gen:
      fmt = ends_with(entry.path, ".jsonl") ? "grammar" : "text-lines";
      break;
    case SourceKind::grammar_book:
      fmt = "text-paragraphs";
      break;
    case SourceKind::wiktionary:
      fmt = "wiktionary-csv";
      break;
    case SourceKind::unconstrained:
      fmt = ends_with(entry.path, ".jsonl") ? "documents" : "text-lines";
      break;
    }
  }
  std::string const content = read_file(entry.path);
  std::vector<Document> docs;
  if (fmt == "documents")
    docs = parse_documents(content, entry.path);
  else if (fmt == "triplets")
    docs = flatten_triplets(parse_triplets(content, entry.path), entry.name);
  else if (fmt == "grammar")
    docs = grammar_documents(parse_grammar_examples(content, entry.path));
  else if (fmt == "wiktionary-csv")
    docs = wiktionary_documents(parse_wiktionary_csv_text(content, entry.path));
  else if (fmt == "text-lines")
    docs = parse_text_lines(content, entry.kind, entry.name);
  else if (fmt == "text-paragraphs")
    docs = parse_text_paragraphs(content, entry.kind, entry.name);
  else
    throw DataError(cat("source '", entry.name, "': unknown format '", fmt, "'"));
  for (auto &d : docs)
    d.source = entry.kind;
  return docs;
}

struct MixResult
{
  std::vector<Document> documents;
  std::vector<std::size_t> words_per_entry;
  std::vector<std::string> warnings;

  std::size_t total() const
  {
    std::size_t n = 0;
    for (auto w : words_per_entry)
      n += w;
    return n;
  }
};

// Per entry: shuffle the source's documents with a stream derived from
// (seed, entry index), then take documents greedily in that order while they
// fit in the remaining entry budget and total budget. Documents are never
// split. Output keeps manifest entry order.
inline MixResult mix_corpora(CorpusManifest const &manifest, std::vector<std::vector<Document>> const &sources)
{
  manifest.validate();
  if (sources.size() != manifest.entries.size())
    throw UsageError(cat("mix_corpora: ", sources.size(), " sources for ", manifest.entries.size(), " entries"));
  MixResult out;
  std::size_t total_used = 0;
  for (std::size_t e = 0; e < manifest.entries.size(); ++e)
  {
    auto const &entry = manifest.entries[e];
    auto const &docs = sources[e];
    std::size_t used = 0;
    if (entry.budget > 0)
    {
      std::vector<std::size_t> order(docs.size());
      for (std::size_t i = 0; i < order.size(); ++i)
        order[i] = i;
      auto rng = make_rng(manifest.seed, RngPurpose::mixing, e);
      shuffle(order, rng);
      for (auto i : order)
      {
        auto wc = docs[i].word_count;
        if (used + wc <= entry.budget && total_used + wc <= manifest.total_budget)
        {
          out.documents.push_back(docs[i]);
          used += wc;
          total_used += wc;
        }
      }
      auto available = total_words(docs);
      if (available < entry.budget)
      {
        auto msg = cat("source '", entry.name, "' provides ", available, " words, below its budget of ",
                       entry.budget);
        log_warning(msg);
        out.warnings.push_back(std::move(msg));
      }
    }
    out.words_per_entry.push_back(used);
  }
  return out;
}

inline MixResult mix_corpora(CorpusManifest const &manifest)
{
  std::vector<std::vector<Document>> sources;
  for (auto const &e : manifest.entries)
    sources.push_back(load_source(e));
  return mix_corpora(manifest, sources);
}

} // namespace l2lm
