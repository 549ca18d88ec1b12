#pragma once

// Forward and backward passes of the transformer building blocks. Every
// forward takes a cache that its backward consumes; backward functions
// accumulate parameter gradients (+=) and return the input gradient.

#include <cmath>
#include <limits>
#include <vector>

#include "l2lm/model/params.hpp"

namespace l2lm
{

inline constexpr double kLayerNormEps = 1e-5;

template<typename S>
using ColVector = Eigen::Matrix<S, Eigen::Dynamic, 1>;

// ---------------------------------------------------------------- linear

template<typename S>
Matrix<S> linear_forward(Linear<S> const &p, Matrix<S> const &x)
{
  Matrix<S> y;
  y.noalias() = x * p.W;
  y.rowwise() += p.b.row(0);
  return y;
}

template<typename S>
Matrix<S> linear_backward(Linear<S> const &p, Linear<S> &g, Matrix<S> const &x, Matrix<S> const &dy)
{
  g.W.noalias() += x.transpose() * dy;
  g.b += dy.colwise().sum();
  Matrix<S> dx;
  dx.noalias() = dy * p.W.transpose();
  return dx;
}

// ---------------------------------------------------------------- layer norm

template<typename S>
struct LayerNormCache
{
  Matrix<S> xhat;
  ColVector<S> rstd;
};

template<typename S>
Matrix<S> layer_norm_forward(LayerNormParams<S> const &p, Matrix<S> const &x, LayerNormCache<S> &cache)
{
  auto const d = static_cast<S>(x.cols());
  ColVector<S> mean = x.rowwise().sum() / d;
  cache.xhat = x.colwise() - mean;
  ColVector<S> var = cache.xhat.array().square().rowwise().sum() / d;
  cache.rstd = (var.array() + static_cast<S>(kLayerNormEps)).rsqrt();
  cache.xhat.array().colwise() *= cache.rstd.array();
  Matrix<S> y = cache.xhat.array().rowwise() * p.gamma.row(0).array();
  y.rowwise() += p.beta.row(0);
  return y;
}

template<typename S>
Matrix<S> layer_norm_backward(LayerNormParams<S> const &p, LayerNormParams<S> &g, LayerNormCache<S> const &cache,
                              Matrix<S> const &dy)
{
  g.gamma += (dy.array() * cache.xhat.array()).colwise().sum().matrix();
  g.beta += dy.colwise().sum();
  Matrix<S> dxhat = dy.array().rowwise() * p.gamma.row(0).array();
  auto const d = static_cast<S>(dy.cols());
  ColVector<S> mean_dxhat = dxhat.rowwise().sum() / d;
  ColVector<S> mean_dxhat_xhat = (dxhat.array() * cache.xhat.array()).rowwise().sum().matrix() / d;
  Matrix<S> dx = dxhat.colwise() - mean_dxhat;
  dx -= (cache.xhat.array().colwise() * mean_dxhat_xhat.array()).matrix();
  dx.array().colwise() *= cache.rstd.array();
  return dx;
}

// ---------------------------------------------------------------- gelu (erf form)

template<typename S>
Matrix<S> gelu_forward(Matrix<S> const &x)
{
  return x.unaryExpr([](S v) {
    return static_cast<S>(0.5) * v * (static_cast<S>(1) + std::erf(v * static_cast<S>(0.70710678118654752440)));
  });
}

template<typename S>
Matrix<S> gelu_backward(Matrix<S> const &x, Matrix<S> const &dy)
{
  Matrix<S> deriv = x.unaryExpr([](S v) {
    S const cdf = static_cast<S>(0.5) * (static_cast<S>(1) + std::erf(v * static_cast<S>(0.70710678118654752440)));
    S const pdf = static_cast<S>(0.39894228040143267794) * std::exp(static_cast<S>(-0.5) * v * v);
    return cdf + v * pdf;
  });
  return dy.cwiseProduct(deriv);
}

// ---------------------------------------------------------------- dropout

// Inverted dropout. A disabled context (rate 0 or no generator) draws nothing.
struct DropoutContext
{
  Rng *rng = nullptr;
  double rate = 0.0;

  bool active() const { return rng != nullptr && rate > 0.0; }
};

template<typename S>
void dropout_forward(Matrix<S> &x, Matrix<S> &mask, DropoutContext const &ctx)
{
  if (!ctx.active())
  {
    mask.resize(0, 0);
    return;
  }
  mask.resize(x.rows(), x.cols());
  auto const keep_scale = static_cast<S>(1.0 / (1.0 - ctx.rate));
  for (Eigen::Index i = 0; i < mask.size(); ++i)
    mask.data()[i] = uniform01(*ctx.rng) < ctx.rate ? S(0) : keep_scale;
  x.array() *= mask.array();
}

template<typename S>
void dropout_backward(Matrix<S> &dy, Matrix<S> const &mask)
{
  if (mask.size() > 0)
    dy.array() *= mask.array();
}

// ---------------------------------------------------------------- attention

template<typename S>
struct AttentionCache
{
  Matrix<S> xq, xkv;
  Matrix<S> Q, K, V;
  Matrix<S> O;                // concatenated head outputs, Tq x d
  std::vector<Matrix<S>> P;   // per-head attention probabilities, Tq x Tk
};

// Keys with key_valid[j] == 0 get zero weight; with `causal`, query i only
// sees keys j <= i. A query row with no visible key gets an all-zero row.
template<typename S>
Matrix<S> attention_forward(AttentionParams<S> const &p, std::size_t n_heads, Matrix<S> const &xq,
                            Matrix<S> const &xkv, std::vector<std::uint8_t> const &key_valid, bool causal,
                            AttentionCache<S> &cache)
{
  auto const Tq = xq.rows(), Tk = xkv.rows(), d = xq.cols();
  auto const dh = d / static_cast<Eigen::Index>(n_heads);
  S const scale = static_cast<S>(1.0 / std::sqrt(static_cast<double>(dh)));
  cache.xq = xq;
  cache.xkv = xkv;
  cache.Q = linear_forward(p.q, xq);
  cache.K = linear_forward(p.k, xkv);
  cache.V = linear_forward(p.v, xkv);
  cache.O.resize(Tq, d);
  cache.P.resize(n_heads);
  for (std::size_t h = 0; h < n_heads; ++h)
  {
    auto const c0 = static_cast<Eigen::Index>(h) * dh;
    Matrix<S> scores;
    scores.noalias() = cache.Q.middleCols(c0, dh) * cache.K.middleCols(c0, dh).transpose();
    scores *= scale;
    Matrix<S> &P = cache.P[h];
    P.resize(Tq, Tk);
    for (Eigen::Index i = 0; i < Tq; ++i)
    {
      S row_max = -std::numeric_limits<S>::infinity();
      for (Eigen::Index j = 0; j < Tk; ++j)
        if (key_valid[static_cast<std::size_t>(j)] && (!causal || j <= i))
          row_max = std::max(row_max, scores(i, j));
      if (row_max == -std::numeric_limits<S>::infinity())
      {
        P.row(i).setZero();
        continue;
      }
      S sum = 0;
      for (Eigen::Index j = 0; j < Tk; ++j)
      {
        S e = 0;
        if (key_valid[static_cast<std::size_t>(j)] && (!causal || j <= i))
          e = std::exp(scores(i, j) - row_max);
        P(i, j) = e;
        sum += e;
      }
      P.row(i) /= sum;
    }
    cache.O.middleCols(c0, dh).noalias() = P * cache.V.middleCols(c0, dh);
  }
  return linear_forward(p.o, cache.O);
}

// Returns (d xq, d xkv); for self-attention the caller adds the two.
template<typename S>
std::pair<Matrix<S>, Matrix<S>> attention_backward(AttentionParams<S> const &p, AttentionParams<S> &g,
                                                   AttentionCache<S> const &cache, Matrix<S> const &dout)
{
  auto const n_heads = cache.P.size();
  auto const d = cache.Q.cols();
  auto const dh = d / static_cast<Eigen::Index>(n_heads);
  S const scale = static_cast<S>(1.0 / std::sqrt(static_cast<double>(dh)));
  Matrix<S> dO = linear_backward(p.o, g.o, cache.O, dout);
  Matrix<S> dQ(cache.Q.rows(), d), dK(cache.K.rows(), d), dV(cache.V.rows(), d);
  for (std::size_t h = 0; h < n_heads; ++h)
  {
    auto const c0 = static_cast<Eigen::Index>(h) * dh;
    Matrix<S> const &P = cache.P[h];
    auto dOh = dO.middleCols(c0, dh);
    Matrix<S> dP;
    dP.noalias() = dOh * cache.V.middleCols(c0, dh).transpose();
    dV.middleCols(c0, dh).noalias() = P.transpose() * dOh;
    ColVector<S> row_dot = (dP.array() * P.array()).rowwise().sum();
    Matrix<S> dS = P.array() * (dP.colwise() - row_dot).array();
    dS *= scale;
    dQ.middleCols(c0, dh).noalias() = dS * cache.K.middleCols(c0, dh);
    dK.middleCols(c0, dh).noalias() = dS.transpose() * cache.Q.middleCols(c0, dh);
  }
  Matrix<S> dxq = linear_backward(p.q, g.q, cache.xq, dQ);
  Matrix<S> dxkv = linear_backward(p.k, g.k, cache.xkv, dK);
  dxkv += linear_backward(p.v, g.v, cache.xkv, dV);
  return {std::move(dxq), std::move(dxkv)};
}

} // namespace l2lm
