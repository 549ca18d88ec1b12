#include <set>

#include <gtest/gtest.h>

#include "l2lm/common.hpp"

using namespace l2lm;

TEST(Strings, TrimAndSplit)
{
  EXPECT_EQ(trim("  a b \t\n"), "a b");
  EXPECT_EQ(trim(""), "");
  auto parts = split("a,,b", ',');
  ASSERT_EQ(parts.size(), 3u);
  EXPECT_EQ(parts[1], "");
  EXPECT_EQ(split_whitespace(" one  two\tthree\n").size(), 3u);
  EXPECT_EQ(normalize_whitespace("  a \n\t b  "), "a b");
  EXPECT_TRUE(iequals("Hello", "hELLO"));
  EXPECT_EQ(to_lower("MiXeD"), "mixed");
}

TEST(Strings, Utf8Chars)
{
  auto cps = utf8_chars("aé€😀");
  ASSERT_EQ(cps.size(), 4u);
  EXPECT_EQ(cps[1], "é");
  EXPECT_EQ(cps[3], "😀");
}

TEST(Hashing, FnvKnownVectors)
{
  // Published FNV-1a 64-bit test vectors.
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a64("foobar"), 0x85944171f73967e8ULL);
  EXPECT_EQ(hex64(0xabcULL), "0000000000000abc");
}

TEST(Random, StreamsArePerPurpose)
{
  auto a = make_rng(7, RngPurpose::masking);
  auto b = make_rng(7, RngPurpose::masking);
  auto c = make_rng(7, RngPurpose::shuffle);
  auto d = make_rng(8, RngPurpose::masking);
  auto x = a();
  EXPECT_EQ(x, b());
  EXPECT_NE(x, c());
  EXPECT_NE(x, d());
}

TEST(Random, UniformBelowStaysInRange)
{
  auto rng = make_rng(1, RngPurpose::toy_pairs);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i)
    ++counts[uniform_below(rng, 7)];
  for (int c : counts)
    EXPECT_NEAR(c, 10000, 500);
  for (int i = 0; i < 1000; ++i)
  {
    double u = uniform01(rng);
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
}

TEST(Random, ShuffleIsAPermutation)
{
  std::vector<int> v(100);
  for (int i = 0; i < 100; ++i)
    v[i] = i;
  auto rng = make_rng(3, RngPurpose::shuffle);
  shuffle(v, rng);
  EXPECT_EQ(std::set<int>(v.begin(), v.end()).size(), 100u);
  bool moved = false;
  for (int i = 0; i < 100; ++i)
    moved = moved || v[i] != i;
  EXPECT_TRUE(moved);
}

TEST(Files, MissingFileIsADataError)
{
  try
  {
    read_file("/nonexistent/l2lm/file.txt");
    FAIL();
  }
  catch (DataError const &e)
  {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/l2lm/file.txt"), std::string::npos);
  }
}
