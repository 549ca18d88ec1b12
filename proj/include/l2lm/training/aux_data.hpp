#pragma once

// Auxiliary sequence-to-sequence items for the two multi-objective schemes.

#include <string>
#include <vector>

#include "l2lm/corpus.hpp"
#include "l2lm/model/marking.hpp"
#include "l2lm/model/network.hpp"

namespace l2lm
{

struct AuxBatch
{
  std::vector<AuxItem> items;
  std::size_t skipped = 0;
};

namespace detail
{
// Target ids ending in SEP, cut so that teacher forcing fits in max_len.
inline std::vector<TokenId> bounded_target(SubwordModel const &tok, std::string const &text, std::size_t max_len)
{
  auto ids = tok.encode(text);
  if (ids.size() + 1 > max_len)
    ids.resize(max_len - 1);
  ids.push_back(kSep);
  return ids;
}
} // namespace detail

// One item per (entry, example sentence containing the headword). The
// decoder reads only the hidden state at the marked word.
inline AuxBatch build_definition_batch(std::vector<WiktionaryEntry> const &entries, SubwordModel const &tok,
                                       std::size_t max_len = 64)
{
  AuxBatch out;
  for (auto const &e : entries)
  {
    std::size_t used = 0;
    for (auto const &example : e.examples)
    {
      MarkedInput marked;
      try
      {
        marked = mark_position(tok, example, e.word);
      }
      catch (DataError const &)
      {
        continue;
      }
      if (marked.ids.size() > max_len)
      {
        log_info(cat("definition batch: example for '", e.word, "' longer than ", max_len, " tokens, skipped"));
        continue;
      }
      out.items.push_back({std::move(marked.ids), marked.index, detail::bounded_target(tok, e.definition, max_len)});
      ++used;
    }
    if (used == 0)
    {
      ++out.skipped;
      log_info(cat("definition batch: no usable example contains '", e.word, "', entry skipped"));
    }
  }
  return out;
}

inline std::string grammar_target_text(GrammarTag const &tag)
{
  return cat("notion ", tag.notion, " : ", answer_text(tag.value));
}

// One item per (sentence, tag); the decoder attends to every hidden state.
inline AuxBatch build_grammar_batch(std::vector<GrammarExample> const &examples, SubwordModel const &tok,
                                    std::size_t max_len = 64)
{
  AuxBatch out;
  for (auto const &ex : examples)
  {
    auto ids = tok.encode(ex.sentence);
    if (ids.empty() || ids.size() > max_len)
    {
      out.skipped += ex.tags.size();
      log_info(cat("grammar batch: sentence of ", ids.size(), " tokens skipped"));
      continue;
    }
    for (auto const &tag : ex.tags)
      out.items.push_back({ids, std::nullopt, detail::bounded_target(tok, grammar_target_text(tag), max_len)});
  }
  return out;
}

} // namespace l2lm
