#pragma once

// Binary checkpoint: "L2LMCKPT", u32 version, config header, then named
// tensors in traversal order as little-endian float32. All integers are
// little-endian.

#include <bit>
#include <cstring>
#include <string>
#include <vector>

#include "l2lm/model/params.hpp"

namespace l2lm
{

inline constexpr char kCheckpointMagic[8] = {'L', '2', 'L', 'M', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail
{
static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

class ByteWriter
{
public:
  template<typename T>
  void put(T v)
  {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out_.append(buf, sizeof(T));
  }
  void put_string(std::string const &s)
  {
    put(static_cast<std::uint32_t>(s.size()));
    out_ += s;
  }
  void put_raw(char const *p, std::size_t n) { out_.append(p, n); }
  std::string take() { return std::move(out_); }

private:
  std::string out_;
};

class ByteReader
{
public:
  ByteReader(std::string const &in, std::string origin) : in_(in), origin_(std::move(origin)) {}

  template<typename T>
  T get()
  {
    need(sizeof(T));
    T v;
    std::memcpy(&v, in_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string get_string()
  {
    auto n = get<std::uint32_t>();
    need(n);
    std::string s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  char const *take_raw(std::size_t n)
  {
    need(n);
    char const *p = in_.data() + pos_;
    pos_ += n;
    return p;
  }
  bool done() const { return pos_ == in_.size(); }

private:
  void need(std::size_t n) const
  {
    if (in_.size() - pos_ < n)
      throw DataError(cat(origin_, ": truncated checkpoint at byte ", pos_));
  }

  std::string const &in_;
  std::string origin_;
  std::size_t pos_ = 0;
};
} // namespace detail

template<typename S>
std::string serialize_checkpoint(ParameterSet<S> const &p)
{
  detail::ByteWriter w;
  w.put_raw(kCheckpointMagic, sizeof kCheckpointMagic);
  w.put(kCheckpointVersion);
  auto const &c = p.config;
  for (auto v : {c.n_layers, c.n_heads, c.d_model, c.d_ff, c.vocab_size, c.max_positions, c.decoder_layers})
    w.put(static_cast<std::uint32_t>(v));
  w.put(static_cast<float>(c.dropout));
  w.put(static_cast<std::uint64_t>(c.seed));

  std::uint32_t count = 0;
  for_each_tensor([&](std::string const &, TensorKind, Matrix<S> const &) { ++count; }, p);
  w.put(count);
  for_each_tensor(
      [&](std::string const &name, TensorKind, Matrix<S> const &t) {
        w.put_string(name);
        w.put(static_cast<std::uint32_t>(t.rows()));
        w.put(static_cast<std::uint32_t>(t.cols()));
        for (Eigen::Index i = 0; i < t.size(); ++i)
          w.put(static_cast<float>(t.data()[i]));
      },
      p);
  return w.take();
}

template<typename S>
ParameterSet<S> parse_checkpoint(std::string const &bytes, std::string const &origin = "checkpoint")
{
  detail::ByteReader r(bytes, origin);
  if (std::memcmp(r.take_raw(sizeof kCheckpointMagic), kCheckpointMagic, sizeof kCheckpointMagic) != 0)
    throw DataError(cat(origin, ": not a checkpoint (bad magic)"));
  auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw DataError(cat(origin, ": unsupported checkpoint version ", version));
  ModelConfig c;
  c.n_layers = r.get<std::uint32_t>();
  c.n_heads = r.get<std::uint32_t>();
  c.d_model = r.get<std::uint32_t>();
  c.d_ff = r.get<std::uint32_t>();
  c.vocab_size = r.get<std::uint32_t>();
  c.max_positions = r.get<std::uint32_t>();
  c.decoder_layers = r.get<std::uint32_t>();
  c.dropout = r.get<float>();
  c.seed = r.get<std::uint64_t>();
  try
  {
    c.validate();
  }
  catch (UsageError const &e)
  {
    throw DataError(cat(origin, ": invalid model config: ", e.what()));
  }

  // Shapes come from a freshly initialized skeleton; the data overwrites it.
  ModelConfig skeleton_config = c;
  ParameterSet<S> p = init_params<S>(skeleton_config);
  auto const count = r.get<std::uint32_t>();
  std::uint32_t seen = 0;
  for_each_tensor(
      [&](std::string const &name, TensorKind, Matrix<S> &t) {
        ++seen;
        if (seen > count)
          throw DataError(cat(origin, ": checkpoint has ", count, " tensors, config needs more"));
        auto stored = r.get_string();
        if (stored != name)
          throw DataError(cat(origin, ": expected tensor '", name, "', found '", stored, "'"));
        auto rows = r.get<std::uint32_t>(), cols = r.get<std::uint32_t>();
        if (rows != t.rows() || cols != t.cols())
          throw DataError(cat(origin, ": tensor '", name, "' has shape ", rows, "x", cols, ", expected ", t.rows(),
                              "x", t.cols()));
        for (Eigen::Index i = 0; i < t.size(); ++i)
          t.data()[i] = static_cast<S>(r.get<float>());
      },
      p);
  if (seen != count || !r.done())
    throw DataError(cat(origin, ": trailing data after ", seen, " tensors"));
  return p;
}

template<typename S>
void save_checkpoint(ParameterSet<S> const &p, std::string const &path)
{
  write_file(path, serialize_checkpoint(p));
}

template<typename S>
ParameterSet<S> load_checkpoint(std::string const &path)
{
  return parse_checkpoint<S>(read_file(path), path);
}

} // namespace l2lm
