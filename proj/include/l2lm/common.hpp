#pragma once

#include <cstdint>
#include <fstream>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace l2lm
{

inline constexpr const char *kVersion = "0.3.0";

// Error categories map onto CLI exit codes: usage 1, data 2, runtime 3.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

class UsageError : public Error
{
public:
  using Error::Error;
};

class DataError : public Error
{
public:
  using Error::Error;
};

class RuntimeError : public Error
{
public:
  using Error::Error;
};

namespace detail
{
inline void append_all(std::ostringstream &) {}

template<typename T, typename... Rest>
void append_all(std::ostringstream &os, T const &first, Rest const &...rest)
{
  os << first;
  append_all(os, rest...);
}
} // namespace detail

template<typename... Args>
std::string cat(Args const &...args)
{
  std::ostringstream os;
  detail::append_all(os, args...);
  return os.str();
}

// ---------------------------------------------------------------- strings

inline bool is_space(char c)
{
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

inline std::string_view trim(std::string_view s)
{
  while (!s.empty() && is_space(s.front()))
    s.remove_prefix(1);
  while (!s.empty() && is_space(s.back()))
    s.remove_suffix(1);
  return s;
}

inline std::string to_lower(std::string_view s)
{
  std::string out(s);
  for (auto &c : out)
    if (c >= 'A' && c <= 'Z')
      c = static_cast<char>(c - 'A' + 'a');
  return out;
}

inline bool iequals(std::string_view a, std::string_view b)
{
  if (a.size() != b.size())
    return false;
  for (std::size_t i = 0; i < a.size(); ++i)
  {
    char x = a[i], y = b[i];
    if (x >= 'A' && x <= 'Z')
      x = static_cast<char>(x - 'A' + 'a');
    if (y >= 'A' && y <= 'Z')
      y = static_cast<char>(y - 'A' + 'a');
    if (x != y)
      return false;
  }
  return true;
}

// Maximal non-whitespace runs.
inline std::vector<std::string_view> split_whitespace(std::string_view text)
{
  std::vector<std::string_view> words;
  std::size_t i = 0;
  while (i < text.size())
  {
    while (i < text.size() && is_space(text[i]))
      ++i;
    std::size_t start = i;
    while (i < text.size() && !is_space(text[i]))
      ++i;
    if (i > start)
      words.push_back(text.substr(start, i - start));
  }
  return words;
}

inline std::string normalize_whitespace(std::string_view text)
{
  std::string out;
  for (auto w : split_whitespace(text))
  {
    if (!out.empty())
      out += ' ';
    out += w;
  }
  return out;
}

inline std::vector<std::string> split(std::string_view s, char delim)
{
  std::vector<std::string> parts;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i)
  {
    if (i == s.size() || s[i] == delim)
    {
      parts.emplace_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return parts;
}

// Splits UTF-8 into code-point substrings. Invalid lead bytes become
// single-byte units so the split is total.
inline std::vector<std::string> utf8_chars(std::string_view s)
{
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size())
  {
    auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = 1;
    if (c >= 0xF0)
      len = 4;
    else if (c >= 0xE0)
      len = 3;
    else if (c >= 0xC0)
      len = 2;
    if (i + len > s.size())
      len = 1;
    for (std::size_t k = 1; k < len; ++k)
      if ((static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80)
      {
        len = 1;
        break;
      }
    out.emplace_back(s.substr(i, len));
    i += len;
  }
  return out;
}

// ---------------------------------------------------------------- files

inline std::string read_file(std::string const &path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw DataError(cat("cannot open '", path, "'"));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(std::string const &path, std::string_view content)
{
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw RuntimeError(cat("cannot write '", path, "'"));
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

// FNV-1a, 64 bit. Used for content fingerprints in manifests and for
// keying canned completions; not a security primitive.
inline std::uint64_t fnv1a64(std::string_view data, std::uint64_t h = 0xcbf29ce484222325ULL)
{
  for (unsigned char c : data)
  {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v)
{
  static constexpr char digits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4)
    s[static_cast<std::size_t>(i)] = digits[v & 0xF];
  return s;
}

inline std::string hash_file(std::string const &path)
{
  return hex64(fnv1a64(read_file(path)));
}

// ---------------------------------------------------------------- random

inline std::uint64_t splitmix64(std::uint64_t x)
{
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// One generator per purpose, all derived from a single run seed, so that
// e.g. dropout draws never perturb the masking stream.
enum class RngPurpose : std::uint64_t
{
  init = 1,
  shuffle = 2,
  masking = 3,
  dropout = 4,
  aux_shuffle = 5,
  aux_dropout = 6,
  decoder_init = 7,
  mixing = 8,
  synthesis = 9,
  toy_pairs = 10,
};

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed, RngPurpose purpose, std::uint64_t salt = 0)
{
  auto s = splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(purpose) * 0x1000193ULL + salt));
  return Rng(s);
}

// Uniform integer in [0, n) from raw generator bits. std::uniform_int_distribution
// is implementation-defined; this keeps streams identical across standard libraries.
inline std::uint64_t uniform_below(Rng &rng, std::uint64_t n)
{
  if (n == 0)
    return 0;
  std::uint64_t const limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t r;
  do
    r = rng();
  while (r >= limit);
  return r % n;
}

inline double uniform01(Rng &rng)
{
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

template<typename T>
void shuffle(std::vector<T> &v, Rng &rng)
{
  for (std::size_t i = v.size(); i > 1; --i)
  {
    auto j = static_cast<std::size_t>(uniform_below(rng, i));
    std::swap(v[i - 1], v[j]);
  }
}

inline void log_warning(std::string_view msg)
{
  std::clog << "warning: " << msg << '\n';
}

inline void log_info(std::string_view msg)
{
  std::clog << msg << '\n';
}

} // namespace l2lm
