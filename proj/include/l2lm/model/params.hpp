#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "l2lm/common.hpp"
#include "l2lm/corpus.hpp"

namespace l2lm
{

template<typename S>
using Matrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ModelConfig
{
  std::size_t n_layers = 4;
  std::size_t n_heads = 4;
  std::size_t d_model = 128;
  std::size_t d_ff = 512;
  std::size_t vocab_size = 2000;
  std::size_t max_positions = 64;
  std::size_t decoder_layers = 0; // 0: encoder only
  double dropout = 0.1;
  std::uint64_t seed = 0;

  void validate() const
  {
    if (n_layers == 0 || n_heads == 0 || d_model == 0 || d_ff == 0)
      throw UsageError("model dimensions must be positive");
    if (d_model % n_heads != 0)
      throw UsageError(cat("d_model ", d_model, " is not divisible by n_heads ", n_heads));
    if (max_positions < 64)
      throw UsageError(cat("max_positions must be at least 64, got ", max_positions));
    if (vocab_size <= 6)
      throw UsageError(cat("vocab_size ", vocab_size, " leaves no room beyond the special tokens"));
    if (!(dropout >= 0.0 && dropout < 1.0))
      throw UsageError(cat("dropout must lie in [0, 1), got ", dropout));
  }

  bool operator==(ModelConfig const &) const = default;
};

inline json to_json(ModelConfig const &c)
{
  return json{{"n_layers", c.n_layers},         {"n_heads", c.n_heads},   {"d_model", c.d_model},
              {"d_ff", c.d_ff},                 {"vocab_size", c.vocab_size}, {"max_positions", c.max_positions},
              {"decoder_layers", c.decoder_layers}, {"dropout", c.dropout}, {"seed", c.seed}};
}

// Decoupled weight decay applies to `weight` tensors only.
enum class TensorKind
{
  weight,
  bias,
  norm,
};

template<typename S>
struct Linear
{
  Matrix<S> W; // in x out
  Matrix<S> b; // 1 x out
};

template<typename S>
struct LayerNormParams
{
  Matrix<S> gamma; // 1 x d
  Matrix<S> beta;  // 1 x d
};

template<typename S>
struct AttentionParams
{
  Linear<S> q, k, v, o;
};

template<typename S>
struct EncoderLayerParams
{
  LayerNormParams<S> ln1;
  AttentionParams<S> attn;
  LayerNormParams<S> ln2;
  Linear<S> ff1, ff2;
};

template<typename S>
struct DecoderLayerParams
{
  LayerNormParams<S> ln1;
  AttentionParams<S> self_attn;
  LayerNormParams<S> ln2;
  AttentionParams<S> cross_attn;
  LayerNormParams<S> ln3;
  Linear<S> ff1, ff2;
};

template<typename S>
struct DecoderParams
{
  Matrix<S> tok_emb;
  Matrix<S> pos_emb;
  std::vector<DecoderLayerParams<S>> layers;
  LayerNormParams<S> ln_f;
  Linear<S> head;
};

template<typename S>
struct ParameterSet
{
  ModelConfig config;
  Matrix<S> tok_emb; // V x d
  Matrix<S> pos_emb; // max_positions x d
  std::vector<EncoderLayerParams<S>> layers;
  LayerNormParams<S> ln_f;
  Linear<S> mlm_head; // d x V
  std::optional<DecoderParams<S>> decoder;

  bool has_decoder() const { return decoder.has_value(); }
};

// ---------------------------------------------------------------- traversal

// Calls f(name, kind, tensor_of_first, tensor_of_rest...) for every tensor in a
// fixed order. The extra parameter sets (gradients, optimizer moments) must
// share the first one's structure.
namespace detail
{
template<typename F, typename... L>
void visit_linear(F &f, std::string const &name, L &...lin)
{
  f(name + ".W", TensorKind::weight, lin.W...);
  f(name + ".b", TensorKind::bias, lin.b...);
}

template<typename F, typename... N>
void visit_norm(F &f, std::string const &name, N &...ln)
{
  f(name + ".gamma", TensorKind::norm, ln.gamma...);
  f(name + ".beta", TensorKind::norm, ln.beta...);
}

template<typename F, typename... A>
void visit_attention(F &f, std::string const &name, A &...a)
{
  visit_linear(f, name + ".q", a.q...);
  visit_linear(f, name + ".k", a.k...);
  visit_linear(f, name + ".v", a.v...);
  visit_linear(f, name + ".o", a.o...);
}
} // namespace detail

template<typename F, typename P, typename... Rest>
void for_each_tensor(F &&f, P &first, Rest &...rest)
{
  f(std::string("enc.tok_emb"), TensorKind::weight, first.tok_emb, rest.tok_emb...);
  f(std::string("enc.pos_emb"), TensorKind::weight, first.pos_emb, rest.pos_emb...);
  for (std::size_t l = 0; l < first.layers.size(); ++l)
  {
    auto const prefix = cat("enc.layer", l);
    detail::visit_norm(f, prefix + ".ln1", first.layers[l].ln1, rest.layers[l].ln1...);
    detail::visit_attention(f, prefix + ".attn", first.layers[l].attn, rest.layers[l].attn...);
    detail::visit_norm(f, prefix + ".ln2", first.layers[l].ln2, rest.layers[l].ln2...);
    detail::visit_linear(f, prefix + ".ff1", first.layers[l].ff1, rest.layers[l].ff1...);
    detail::visit_linear(f, prefix + ".ff2", first.layers[l].ff2, rest.layers[l].ff2...);
  }
  detail::visit_norm(f, "enc.ln_f", first.ln_f, rest.ln_f...);
  detail::visit_linear(f, "mlm_head", first.mlm_head, rest.mlm_head...);
  if (!first.decoder)
    return;
  if (!(rest.decoder.has_value() && ...))
    throw UsageError("parameter sets differ in decoder presence");
  auto &d = *first.decoder;
  f(std::string("dec.tok_emb"), TensorKind::weight, d.tok_emb, rest.decoder->tok_emb...);
  f(std::string("dec.pos_emb"), TensorKind::weight, d.pos_emb, rest.decoder->pos_emb...);
  for (std::size_t l = 0; l < d.layers.size(); ++l)
  {
    auto const prefix = cat("dec.layer", l);
    detail::visit_norm(f, prefix + ".ln1", d.layers[l].ln1, rest.decoder->layers[l].ln1...);
    detail::visit_attention(f, prefix + ".self_attn", d.layers[l].self_attn, rest.decoder->layers[l].self_attn...);
    detail::visit_norm(f, prefix + ".ln2", d.layers[l].ln2, rest.decoder->layers[l].ln2...);
    detail::visit_attention(f, prefix + ".cross_attn", d.layers[l].cross_attn,
                            rest.decoder->layers[l].cross_attn...);
    detail::visit_norm(f, prefix + ".ln3", d.layers[l].ln3, rest.decoder->layers[l].ln3...);
    detail::visit_linear(f, prefix + ".ff1", d.layers[l].ff1, rest.decoder->layers[l].ff1...);
    detail::visit_linear(f, prefix + ".ff2", d.layers[l].ff2, rest.decoder->layers[l].ff2...);
  }
  detail::visit_norm(f, "dec.ln_f", d.ln_f, rest.decoder->ln_f...);
  detail::visit_linear(f, "dec.head", d.head, rest.decoder->head...);
}

template<typename S>
std::size_t parameter_count(ParameterSet<S> const &p)
{
  std::size_t n = 0;
  for_each_tensor([&](std::string const &, TensorKind, Matrix<S> const &t) { n += static_cast<std::size_t>(t.size()); },
                  p);
  return n;
}

template<typename S>
ParameterSet<S> zeros_like(ParameterSet<S> const &p)
{
  ParameterSet<S> z = p;
  for_each_tensor([](std::string const &, TensorKind, Matrix<S> &t) { t.setZero(); }, z);
  return z;
}

template<typename S>
void set_zero(ParameterSet<S> &p)
{
  for_each_tensor([](std::string const &, TensorKind, Matrix<S> &t) { t.setZero(); }, p);
}

template<typename S>
bool all_finite(ParameterSet<S> const &p)
{
  bool ok = true;
  for_each_tensor([&](std::string const &, TensorKind, Matrix<S> const &t) { ok = ok && t.allFinite(); }, p);
  return ok;
}

// Same structure, different scalar type.
template<typename To, typename From>
ParameterSet<To> cast_params(ParameterSet<From> const &src)
{
  ParameterSet<To> dst;
  dst.config = src.config;
  dst.layers.resize(src.layers.size());
  if (src.decoder)
  {
    dst.decoder.emplace();
    dst.decoder->layers.resize(src.decoder->layers.size());
  }
  std::vector<Matrix<From> const *> flat;
  for_each_tensor([&](std::string const &, TensorKind, Matrix<From> const &t) { flat.push_back(&t); }, src);
  std::size_t i = 0;
  for_each_tensor([&](std::string const &, TensorKind, Matrix<To> &t) { t = flat[i++]->template cast<To>(); }, dst);
  return dst;
}

// ---------------------------------------------------------------- initialization

namespace detail
{
// Box-Muller over raw generator bits, so initial weights do not depend on the
// standard library's normal_distribution.
class NormalSampler
{
public:
  explicit NormalSampler(Rng rng) : rng_(std::move(rng)) {}

  double operator()()
  {
    if (has_spare_)
    {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform01(rng_);
    while (u1 <= 0.0)
      u1 = uniform01(rng_);
    double const u2 = uniform01(rng_);
    double const r = std::sqrt(-2.0 * std::log(u1));
    constexpr double two_pi = 6.283185307179586476925286766559;
    spare_ = r * std::sin(two_pi * u2);
    has_spare_ = true;
    return r * std::cos(two_pi * u2);
  }

private:
  Rng rng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

template<typename S>
Matrix<S> normal_matrix(std::size_t rows, std::size_t cols, double stddev, NormalSampler &sample)
{
  Matrix<S> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i)
    m.data()[i] = static_cast<S>(stddev * sample());
  return m;
}

template<typename S>
Linear<S> init_linear(std::size_t in, std::size_t out, NormalSampler &sample)
{
  return {normal_matrix<S>(in, out, 0.02, sample), Matrix<S>::Zero(1, static_cast<Eigen::Index>(out))};
}

template<typename S>
LayerNormParams<S> init_norm(std::size_t d)
{
  auto const n = static_cast<Eigen::Index>(d);
  return {Matrix<S>::Ones(1, n), Matrix<S>::Zero(1, n)};
}

template<typename S>
AttentionParams<S> init_attention(std::size_t d, NormalSampler &sample)
{
  AttentionParams<S> a;
  a.q = init_linear<S>(d, d, sample);
  a.k = init_linear<S>(d, d, sample);
  a.v = init_linear<S>(d, d, sample);
  a.o = init_linear<S>(d, d, sample);
  return a;
}
} // namespace detail

// Weights ~ N(0, 0.02^2), biases 0, layer-norm scale 1 and offset 0. The
// encoder and decoder draw from separate streams, so adding a decoder leaves
// the encoder's initial weights unchanged.
template<typename S>
ParameterSet<S> init_params(ModelConfig const &config)
{
  config.validate();
  ParameterSet<S> p;
  p.config = config;
  auto const d = config.d_model, V = config.vocab_size;
  detail::NormalSampler sample(make_rng(config.seed, RngPurpose::init));
  p.tok_emb = detail::normal_matrix<S>(V, d, 0.02, sample);
  p.pos_emb = detail::normal_matrix<S>(config.max_positions, d, 0.02, sample);
  for (std::size_t l = 0; l < config.n_layers; ++l)
  {
    EncoderLayerParams<S> layer;
    layer.ln1 = detail::init_norm<S>(d);
    layer.attn = detail::init_attention<S>(d, sample);
    layer.ln2 = detail::init_norm<S>(d);
    layer.ff1 = detail::init_linear<S>(d, config.d_ff, sample);
    layer.ff2 = detail::init_linear<S>(config.d_ff, d, sample);
    p.layers.push_back(std::move(layer));
  }
  p.ln_f = detail::init_norm<S>(d);
  p.mlm_head = detail::init_linear<S>(d, V, sample);

  if (config.decoder_layers > 0)
  {
    detail::NormalSampler dsample(make_rng(config.seed, RngPurpose::decoder_init));
    DecoderParams<S> dec;
    dec.tok_emb = detail::normal_matrix<S>(V, d, 0.02, dsample);
    dec.pos_emb = detail::normal_matrix<S>(config.max_positions, d, 0.02, dsample);
    for (std::size_t l = 0; l < config.decoder_layers; ++l)
    {
      DecoderLayerParams<S> layer;
      layer.ln1 = detail::init_norm<S>(d);
      layer.self_attn = detail::init_attention<S>(d, dsample);
      layer.ln2 = detail::init_norm<S>(d);
      layer.cross_attn = detail::init_attention<S>(d, dsample);
      layer.ln3 = detail::init_norm<S>(d);
      layer.ff1 = detail::init_linear<S>(d, config.d_ff, dsample);
      layer.ff2 = detail::init_linear<S>(config.d_ff, d, dsample);
      dec.layers.push_back(std::move(layer));
    }
    dec.ln_f = detail::init_norm<S>(d);
    dec.head = detail::init_linear<S>(d, V, dsample);
    p.decoder = std::move(dec);
  }
  return p;
}

// Encoder and MLM head are copied unchanged; the decoder is dropped.
template<typename S>
ParameterSet<S> strip_decoder(ParameterSet<S> const &p)
{
  ParameterSet<S> out;
  out.config = p.config;
  out.config.decoder_layers = 0;
  out.tok_emb = p.tok_emb;
  out.pos_emb = p.pos_emb;
  out.layers = p.layers;
  out.ln_f = p.ln_f;
  out.mlm_head = p.mlm_head;
  return out;
}

} // namespace l2lm
