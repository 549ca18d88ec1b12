#pragma once

#include <string>
#include <vector>

#include "l2lm/tokenizer.hpp"

namespace l2lm
{

struct MarkedInput
{
  std::vector<TokenId> ids; // sentence ids with MARK before the target
  std::size_t index = 0;    // position of the target's first subword in `ids`
};

namespace detail
{
inline std::string chunk_key(std::string const &chunk)
{
  return to_lower(chunk.empty() || chunk[0] != ' ' ? chunk : chunk.substr(1));
}
} // namespace detail

// Finds the first occurrence of `target` (as a sequence of pretokenized
// chunks, case-insensitive, starting at a word boundary) and inserts MARK
// immediately before its first subword.
inline MarkedInput mark_position(SubwordModel const &tok, std::string const &sentence, std::string const &target)
{
  auto const s_chunks = pretokenize(sentence);
  auto const t_chunks = pretokenize(target);
  if (t_chunks.empty())
    throw UsageError("mark_position: empty target");

  std::vector<std::size_t> starts; // token offset of each chunk
  std::vector<TokenId> ids;
  for (auto const &c : s_chunks)
  {
    starts.push_back(ids.size());
    auto part = tok.encode_chunk(c.text);
    ids.insert(ids.end(), part.begin(), part.end());
  }

  for (std::size_t i = 0; i + t_chunks.size() <= s_chunks.size(); ++i)
  {
    if (i > 0 && s_chunks[i].word == s_chunks[i - 1].word)
      continue;
    bool match = true;
    for (std::size_t k = 0; k < t_chunks.size() && match; ++k)
      match = detail::chunk_key(s_chunks[i + k].text) == detail::chunk_key(t_chunks[k].text);
    if (!match)
      continue;
    MarkedInput out;
    out.ids = ids;
    out.ids.insert(out.ids.begin() + static_cast<std::ptrdiff_t>(starts[i]), kMark);
    out.index = starts[i] + 1;
    return out;
  }
  throw DataError(cat("target '", target, "' not found in sentence '", sentence, "'"));
}

} // namespace l2lm
