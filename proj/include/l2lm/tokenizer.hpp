#pragma once

// Byte-pair subword vocabulary over UTF-8 code points, and packing of token
// streams into fixed-length training windows.
//
// Text is whitespace-normalized and split into chunks: each whitespace word
// splits further into runs of word characters (ASCII alphanumerics and any
// non-ASCII code point) and runs of ASCII punctuation. A chunk that begins a
// word (other than the first word) carries a leading space, so decoding is
// plain concatenation. Merges never cross chunk boundaries.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "l2lm/common.hpp"
#include "l2lm/corpus.hpp"

namespace l2lm
{

using TokenId = std::int32_t;

enum SpecialToken : TokenId
{
  kPad = 0,
  kUnk = 1,
  kCls = 2,
  kSep = 3,
  kMask = 4,
  kMark = 5,
};

inline constexpr TokenId kNumSpecialTokens = 6;
inline constexpr char const *kSpecialNames[kNumSpecialTokens] = {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]", "[MARK]"};

inline bool is_special(TokenId id)
{
  return id >= 0 && id < kNumSpecialTokens;
}

struct TextChunk
{
  std::string text;        // including the leading space, if any
  std::size_t word = 0;    // index of the whitespace word it came from
  bool word_chars = false; // run of word characters (vs punctuation)
};

namespace detail
{
inline bool is_word_char(std::string_view cp)
{
  auto c = static_cast<unsigned char>(cp[0]);
  if (c >= 0x80)
    return true;
  return std::isalnum(c) != 0;
}
} // namespace detail

inline std::vector<TextChunk> pretokenize(std::string_view text)
{
  std::vector<TextChunk> chunks;
  auto words = split_whitespace(text);
  for (std::size_t w = 0; w < words.size(); ++w)
  {
    bool first_run = true;
    std::string run;
    bool run_word = false;
    auto flush = [&] {
      if (run.empty())
        return;
      chunks.push_back({(first_run && w > 0 ? " " : "") + run, w, run_word});
      first_run = false;
      run.clear();
    };
    for (auto const &cp : utf8_chars(words[w]))
    {
      bool const wc = detail::is_word_char(cp);
      if (!run.empty() && wc != run_word)
        flush();
      run_word = wc;
      run += cp;
    }
    flush();
  }
  return chunks;
}

struct TrainingExample
{
  std::vector<TokenId> ids;

  bool operator==(TrainingExample const &) const = default;
};

class SubwordModel
{
public:
  struct Merge
  {
    TokenId left;
    TokenId right;
    TokenId result;
    bool operator==(Merge const &) const = default;
  };

  SubwordModel() { reset_specials(); }

  std::size_t size() const { return pieces_.size(); }
  std::vector<std::string> const &pieces() const { return pieces_; }
  std::vector<Merge> const &merges() const { return merges_; }
  std::uint64_t seed() const { return seed_; }

  std::string const &piece(TokenId id) const { return pieces_.at(static_cast<std::size_t>(id)); }

  std::optional<TokenId> find(std::string const &piece) const
  {
    auto it = index_.find(piece);
    if (it == index_.end())
      return std::nullopt;
    return it->second;
  }

  std::vector<TokenId> encode_chunk(std::string_view chunk) const
  {
    std::vector<TokenId> sym;
    for (auto const &cp : utf8_chars(chunk))
    {
      auto it = index_.find(cp);
      sym.push_back(it == index_.end() ? kUnk : it->second);
    }
    while (sym.size() > 1)
    {
      std::size_t best_rank = merges_.size();
      for (std::size_t i = 0; i + 1 < sym.size(); ++i)
      {
        auto it = ranks_.find(pair_key(sym[i], sym[i + 1]));
        if (it != ranks_.end() && it->second < best_rank)
          best_rank = it->second;
      }
      if (best_rank == merges_.size())
        break;
      auto const &m = merges_[best_rank];
      std::vector<TokenId> next;
      next.reserve(sym.size());
      for (std::size_t i = 0; i < sym.size(); ++i)
      {
        if (i + 1 < sym.size() && sym[i] == m.left && sym[i + 1] == m.right)
        {
          next.push_back(m.result);
          ++i;
        }
        else
          next.push_back(sym[i]);
      }
      sym.swap(next);
    }
    return sym;
  }

  std::vector<TokenId> encode(std::string_view text) const
  {
    std::vector<TokenId> ids;
    for (auto const &c : pretokenize(text))
    {
      auto part = encode_chunk(c.text);
      ids.insert(ids.end(), part.begin(), part.end());
    }
    return ids;
  }

  // PAD is dropped; other special tokens render as their bracketed names.
  std::string decode(std::vector<TokenId> const &ids) const
  {
    std::string out;
    for (auto id : ids)
    {
      if (id == kPad)
        continue;
      if (id < 0 || static_cast<std::size_t>(id) >= pieces_.size())
        throw DataError(cat("token id ", id, " outside vocabulary of ", pieces_.size()));
      out += pieces_[static_cast<std::size_t>(id)];
    }
    return out;
  }

  json to_json() const
  {
    json merges = json::array();
    for (auto const &m : merges_)
      merges.push_back(json::array({m.left, m.right, m.result}));
    return json{{"format", "l2lm-bpe"}, {"version", 1},        {"vocab_size", pieces_.size()},
                {"seed", seed_},        {"pieces", pieces_}, {"merges", merges}};
  }

  static SubwordModel from_json(json const &j)
  {
    SubwordModel m;
    try
    {
      if (j.at("format") != "l2lm-bpe" || j.at("version") != 1)
        throw DataError("not an l2lm-bpe v1 tokenizer");
      auto pieces = j.at("pieces").get<std::vector<std::string>>();
      if (pieces.size() < kNumSpecialTokens || pieces.size() != j.at("vocab_size").get<std::size_t>())
        throw DataError("tokenizer vocabulary size mismatch");
      for (TokenId s = 0; s < kNumSpecialTokens; ++s)
        if (pieces[static_cast<std::size_t>(s)] != kSpecialNames[s])
          throw DataError("tokenizer special tokens out of order");
      m.pieces_ = std::move(pieces);
      m.seed_ = j.value("seed", std::uint64_t{0});
      m.index_.clear();
      for (std::size_t i = 0; i < m.pieces_.size(); ++i)
        m.index_.emplace(m.pieces_[i], static_cast<TokenId>(i));
      for (auto const &mj : j.at("merges"))
        m.add_merge_rule({mj.at(0).get<TokenId>(), mj.at(1).get<TokenId>(), mj.at(2).get<TokenId>()});
      auto const n = static_cast<TokenId>(m.pieces_.size());
      for (auto const &r : m.merges_)
        if (r.left < 0 || r.left >= n || r.right < 0 || r.right >= n || r.result < 0 || r.result >= n)
          throw DataError("tokenizer merge refers to an unknown piece");
    }
    catch (json::exception const &e)
    {
      throw DataError(cat("malformed tokenizer: ", e.what()));
    }
    return m;
  }

  void save(std::string const &path) const { write_file(path, to_json().dump(1) + "\n"); }

  static SubwordModel load(std::string const &path)
  {
    try
    {
      return from_json(json::parse(read_file(path)));
    }
    catch (json::parse_error const &e)
    {
      throw DataError(cat(path, ": ", e.what()));
    }
  }

  bool operator==(SubwordModel const &o) const { return pieces_ == o.pieces_ && merges_ == o.merges_; }

private:
  friend SubwordModel train_subwords(std::vector<Document> const &, std::size_t, std::uint64_t);

  static std::uint64_t pair_key(TokenId a, TokenId b)
  {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) | static_cast<std::uint32_t>(b);
  }

  void reset_specials()
  {
    pieces_.assign(std::begin(kSpecialNames), std::end(kSpecialNames));
    index_.clear();
    for (std::size_t i = 0; i < pieces_.size(); ++i)
      index_.emplace(pieces_[i], static_cast<TokenId>(i));
  }

  TokenId add_piece(std::string const &p)
  {
    if (auto it = index_.find(p); it != index_.end())
      return it->second;
    auto id = static_cast<TokenId>(pieces_.size());
    pieces_.push_back(p);
    index_.emplace(p, id);
    return id;
  }

  void add_merge_rule(Merge m)
  {
    ranks_.emplace(pair_key(m.left, m.right), merges_.size());
    merges_.push_back(m);
  }

  std::vector<std::string> pieces_;
  std::unordered_map<std::string, TokenId> index_;
  std::vector<Merge> merges_;
  std::unordered_map<std::uint64_t, std::size_t> ranks_;
  std::uint64_t seed_ = 0;
};

// Greedy BPE: repeatedly merge the most frequent adjacent pair, ties broken by
// the lexicographic order of (left piece, right piece). The procedure is fully
// deterministic; the seed is recorded with the model for provenance only.
// A merge whose concatenation already exists reuses that piece id.
inline SubwordModel train_subwords(std::vector<Document> const &corpus, std::size_t vocab_size, std::uint64_t seed)
{
  if (corpus.empty())
    throw UsageError("train_subwords: corpus is empty");

  std::map<std::string, std::size_t> chunk_freq;
  for (auto const &d : corpus)
    for (auto &c : pretokenize(d.text))
      ++chunk_freq[std::move(c.text)];

  std::set<std::string> alphabet;
  for (auto const &[chunk, _] : chunk_freq)
    for (auto &cp : utf8_chars(chunk))
      alphabet.insert(std::move(cp));
  if (vocab_size <= kNumSpecialTokens + alphabet.size())
    throw DataError(cat("vocab_size ", vocab_size, " must exceed ", kNumSpecialTokens, " special tokens plus ",
                        alphabet.size(), " base characters"));

  SubwordModel model;
  model.seed_ = seed;
  for (auto const &cp : alphabet)
    model.add_piece(cp);

  std::vector<std::vector<TokenId>> words;
  std::vector<std::size_t> freq;
  for (auto const &[chunk, f] : chunk_freq)
  {
    std::vector<TokenId> sym;
    for (auto const &cp : utf8_chars(chunk))
      sym.push_back(*model.find(cp));
    words.push_back(std::move(sym));
    freq.push_back(f);
  }

  std::unordered_map<std::uint64_t, std::size_t> counts;
  while (model.size() < vocab_size)
  {
    counts.clear();
    for (std::size_t w = 0; w < words.size(); ++w)
      for (std::size_t i = 0; i + 1 < words[w].size(); ++i)
        counts[SubwordModel::pair_key(words[w][i], words[w][i + 1])] += freq[w];
    if (counts.empty())
      throw DataError(cat("corpus supports a vocabulary of at most ", model.size(), " tokens, below the requested ",
                          vocab_size));

    std::uint64_t best = 0;
    std::size_t best_count = 0;
    for (auto const &[key, count] : counts)
    {
      if (count < best_count)
        continue;
      if (count > best_count)
      {
        best = key;
        best_count = count;
        continue;
      }
      auto l = static_cast<TokenId>(key >> 32), r = static_cast<TokenId>(key & 0xffffffffu);
      auto bl = static_cast<TokenId>(best >> 32), br = static_cast<TokenId>(best & 0xffffffffu);
      auto const &lp = model.piece(l), &blp = model.piece(bl);
      if (lp < blp || (lp == blp && model.piece(r) < model.piece(br)))
        best = key;
    }

    auto const left = static_cast<TokenId>(best >> 32), right = static_cast<TokenId>(best & 0xffffffffu);
    auto const result = model.add_piece(model.piece(left) + model.piece(right));
    model.add_merge_rule({left, right, result});

    for (auto &sym : words)
    {
      if (sym.size() < 2)
        continue;
      std::size_t out = 0;
      for (std::size_t i = 0; i < sym.size(); ++i)
      {
        if (i + 1 < sym.size() && sym[i] == left && sym[i + 1] == right)
        {
          sym[out++] = result;
          ++i;
        }
        else
          sym[out++] = sym[i];
      }
      sym.resize(out);
    }
  }
  return model;
}

inline std::vector<TokenId> encode(SubwordModel const &model, std::string_view text)
{
  return model.encode(text);
}

inline std::string decode(SubwordModel const &model, std::vector<TokenId> const &ids)
{
  return model.decode(ids);
}

// Documents are encoded, joined with a single SEP, and cut into consecutive
// windows of exactly context_size ids; the final window is PAD-filled.
inline std::vector<TrainingExample> pack_examples(SubwordModel const &model, std::vector<Document> const &docs,
                                                  std::size_t context_size)
{
  if (context_size < 2)
    throw UsageError(cat("context_size must be at least 2, got ", context_size));
  std::vector<TokenId> stream;
  for (std::size_t i = 0; i < docs.size(); ++i)
  {
    if (i > 0)
      stream.push_back(kSep);
    auto ids = model.encode(docs[i].text);
    stream.insert(stream.end(), ids.begin(), ids.end());
  }
  std::vector<TrainingExample> out;
  for (std::size_t at = 0; at < stream.size(); at += context_size)
  {
    TrainingExample ex;
    ex.ids.assign(context_size, kPad);
    auto n = std::min(context_size, stream.size() - at);
    std::copy_n(stream.begin() + static_cast<std::ptrdiff_t>(at), n, ex.ids.begin());
    out.push_back(std::move(ex));
  }
  return out;
}

} // namespace l2lm
