#pragma once

#include <cmath>

#include "l2lm/model/params.hpp"

namespace l2lm
{

struct AdamWConfig
{
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

template<typename S>
struct AdamWState
{
  ParameterSet<S> m, v;
  std::size_t step = 0;

  explicit AdamWState(ParameterSet<S> const &like) : m(zeros_like(like)), v(zeros_like(like)) {}
};

// One tensor. Decay is decoupled and applied before the moment update,
// matching the usual AdamW formulation.
template<typename S>
void adamw_update(Matrix<S> &theta, Matrix<S> const &g, Matrix<S> &m, Matrix<S> &v, std::size_t t, double lr,
                  AdamWConfig const &cfg, bool decay)
{
  double const bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  double const bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  double const shrink = decay ? 1.0 - lr * cfg.weight_decay : 1.0;
  for (Eigen::Index i = 0; i < theta.size(); ++i)
  {
    double const gi = g.data()[i];
    double const mi = cfg.beta1 * m.data()[i] + (1.0 - cfg.beta1) * gi;
    double const vi = cfg.beta2 * v.data()[i] + (1.0 - cfg.beta2) * gi * gi;
    m.data()[i] = static_cast<S>(mi);
    v.data()[i] = static_cast<S>(vi);
    double th = static_cast<double>(theta.data()[i]) * shrink;
    th -= lr * (mi / bc1) / (std::sqrt(vi / bc2) + cfg.eps);
    theta.data()[i] = static_cast<S>(th);
  }
}

template<typename S>
void adamw_step(ParameterSet<S> &params, ParameterSet<S> const &grads, AdamWState<S> &state, double lr,
                AdamWConfig const &cfg)
{
  if (!all_finite(grads))
    throw RuntimeError("non-finite gradient");
  ++state.step;
  for_each_tensor(
      [&](std::string const &, TensorKind kind, Matrix<S> &theta, Matrix<S> const &g, Matrix<S> &m, Matrix<S> &v) {
        adamw_update(theta, g, m, v, state.step, lr, cfg, kind == TensorKind::weight);
      },
      params, grads, state.m, state.v);
}

} // namespace l2lm
