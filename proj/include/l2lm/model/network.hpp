#pragma once

// Pre-layer-norm transformer encoder with an MLM head, and an optional
// decoder (causal self-attention + cross-attention over encoder states) used
// by the auxiliary objectives.

#include <cmath>
#include <optional>
#include <vector>

#include "l2lm/model/layers.hpp"
#include "l2lm/tokenizer.hpp"

namespace l2lm
{

template<typename S>
struct EncoderOutput
{
  Matrix<S> hidden; // T x d_model
};

template<typename S>
struct EncoderLayerCache
{
  LayerNormCache<S> ln1;
  AttentionCache<S> attn;
  Matrix<S> drop_attn;
  LayerNormCache<S> ln2;
  Matrix<S> ff_in, ff_pre;
  Matrix<S> drop_ff;
};

template<typename S>
struct EncoderCache
{
  std::vector<TokenId> ids;
  Matrix<S> drop_emb;
  std::vector<EncoderLayerCache<S>> layers;
  LayerNormCache<S> ln_f;
  Matrix<S> hidden;
};

inline std::vector<std::uint8_t> non_pad_mask(std::vector<TokenId> const &ids)
{
  std::vector<std::uint8_t> m(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i)
    m[i] = ids[i] != kPad;
  return m;
}

namespace detail
{
template<typename S>
Matrix<S> embed(Matrix<S> const &tok, Matrix<S> const &pos, std::vector<TokenId> const &ids)
{
  auto const T = static_cast<Eigen::Index>(ids.size());
  Matrix<S> x(T, tok.cols());
  for (Eigen::Index t = 0; t < T; ++t)
    x.row(t) = tok.row(ids[static_cast<std::size_t>(t)]) + pos.row(t);
  return x;
}

template<typename S>
void embed_backward(Matrix<S> &gtok, Matrix<S> &gpos, std::vector<TokenId> const &ids, Matrix<S> const &dx)
{
  for (Eigen::Index t = 0; t < dx.rows(); ++t)
  {
    gtok.row(ids[static_cast<std::size_t>(t)]) += dx.row(t);
    gpos.row(t) += dx.row(t);
  }
}

inline void check_ids(std::vector<TokenId> const &ids, std::size_t vocab, std::size_t max_positions)
{
  if (ids.empty())
    throw UsageError("empty input sequence");
  if (ids.size() > max_positions)
    throw DataError(cat("sequence of ", ids.size(), " tokens exceeds max_positions ", max_positions));
  for (auto id : ids)
    if (id < 0 || static_cast<std::size_t>(id) >= vocab)
      throw DataError(cat("token id ", id, " outside vocabulary of ", vocab));
}
} // namespace detail

// key_valid marks attendable positions (normally the non-PAD ones).
template<typename S>
EncoderCache<S> encoder_forward_cached(ParameterSet<S> const &p, std::vector<TokenId> const &ids,
                                       std::vector<std::uint8_t> const &key_valid, DropoutContext dropout = {})
{
  detail::check_ids(ids, p.config.vocab_size, p.config.max_positions);
  if (key_valid.size() != ids.size())
    throw UsageError(cat("attention mask has ", key_valid.size(), " entries for ", ids.size(), " tokens"));
  EncoderCache<S> c;
  c.ids = ids;
  Matrix<S> x = detail::embed(p.tok_emb, p.pos_emb, ids);
  dropout_forward(x, c.drop_emb, dropout);
  c.layers.resize(p.layers.size());
  for (std::size_t l = 0; l < p.layers.size(); ++l)
  {
    auto const &P = p.layers[l];
    auto &L = c.layers[l];
    Matrix<S> a = layer_norm_forward(P.ln1, x, L.ln1);
    Matrix<S> att = attention_forward(P.attn, p.config.n_heads, a, a, key_valid, false, L.attn);
    dropout_forward(att, L.drop_attn, dropout);
    x += att;
    L.ff_in = layer_norm_forward(P.ln2, x, L.ln2);
    L.ff_pre = linear_forward(P.ff1, L.ff_in);
    Matrix<S> ff = linear_forward(P.ff2, gelu_forward(L.ff_pre));
    dropout_forward(ff, L.drop_ff, dropout);
    x += ff;
  }
  c.hidden = layer_norm_forward(p.ln_f, x, c.ln_f);
  return c;
}

template<typename S>
EncoderOutput<S> encoder_forward(ParameterSet<S> const &p, std::vector<TokenId> const &ids,
                                 std::vector<std::uint8_t> const &key_valid)
{
  return {encoder_forward_cached(p, ids, key_valid).hidden};
}

template<typename S>
EncoderOutput<S> encoder_forward(ParameterSet<S> const &p, std::vector<TokenId> const &ids)
{
  return encoder_forward(p, ids, non_pad_mask(ids));
}

template<typename S>
void encoder_backward(ParameterSet<S> const &p, ParameterSet<S> &g, EncoderCache<S> const &c,
                      Matrix<S> const &d_hidden)
{
  Matrix<S> dx = layer_norm_backward(p.ln_f, g.ln_f, c.ln_f, d_hidden);
  for (std::size_t l = p.layers.size(); l-- > 0;)
  {
    auto const &P = p.layers[l];
    auto &G = g.layers[l];
    auto const &L = c.layers[l];

    Matrix<S> dff = dx;
    dropout_backward(dff, L.drop_ff);
    Matrix<S> dh = linear_backward(P.ff2, G.ff2, gelu_forward(L.ff_pre), dff);
    dh = gelu_backward(L.ff_pre, dh);
    dh = linear_backward(P.ff1, G.ff1, L.ff_in, dh);
    dx += layer_norm_backward(P.ln2, G.ln2, L.ln2, dh);

    Matrix<S> datt = dx;
    dropout_backward(datt, L.drop_attn);
    auto [dq, dkv] = attention_backward(P.attn, G.attn, L.attn, datt);
    dq += dkv;
    dx += layer_norm_backward(P.ln1, G.ln1, L.ln1, dq);
  }
  dropout_backward(dx, c.drop_emb);
  detail::embed_backward(g.tok_emb, g.pos_emb, c.ids, dx);
}

// Full per-position vocabulary logits.
template<typename S>
Matrix<S> mlm_logits(ParameterSet<S> const &p, EncoderOutput<S> const &hidden)
{
  return linear_forward(p.mlm_head, hidden.hidden);
}

// ---------------------------------------------------------------- decoder

template<typename S>
struct DecoderLayerCache
{
  LayerNormCache<S> ln1;
  AttentionCache<S> self_attn;
  Matrix<S> drop_self;
  LayerNormCache<S> ln2;
  AttentionCache<S> cross_attn;
  Matrix<S> drop_cross;
  LayerNormCache<S> ln3;
  Matrix<S> ff_in, ff_pre;
  Matrix<S> drop_ff;
};

template<typename S>
struct DecoderCache
{
  std::vector<TokenId> ids;
  Matrix<S> drop_emb;
  std::vector<DecoderLayerCache<S>> layers;
  LayerNormCache<S> ln_f;
  Matrix<S> final_hidden;
  Matrix<S> logits;
};

template<typename S>
DecoderParams<S> const &require_decoder(ParameterSet<S> const &p)
{
  if (!p.decoder)
    throw UsageError("model has no decoder (decoder_layers = 0)");
  return *p.decoder;
}

// Teacher-forced: logits row i predicts the token after input_ids[i].
template<typename S>
DecoderCache<S> decoder_forward_cached(ParameterSet<S> const &p, std::vector<TokenId> const &input_ids,
                                       Matrix<S> const &memory, DropoutContext dropout = {})
{
  auto const &dec = require_decoder(p);
  detail::check_ids(input_ids, p.config.vocab_size, p.config.max_positions);
  if (memory.rows() == 0 || memory.cols() != static_cast<Eigen::Index>(p.config.d_model))
    throw UsageError("decoder memory must be a non-empty N x d_model matrix");
  std::vector<std::uint8_t> self_valid(input_ids.size(), 1);
  std::vector<std::uint8_t> mem_valid(static_cast<std::size_t>(memory.rows()), 1);
  DecoderCache<S> c;
  c.ids = input_ids;
  Matrix<S> y = detail::embed(dec.tok_emb, dec.pos_emb, input_ids);
  dropout_forward(y, c.drop_emb, dropout);
  c.layers.resize(dec.layers.size());
  for (std::size_t l = 0; l < dec.layers.size(); ++l)
  {
    auto const &P = dec.layers[l];
    auto &L = c.layers[l];
    Matrix<S> a = layer_norm_forward(P.ln1, y, L.ln1);
    Matrix<S> s = attention_forward(P.self_attn, p.config.n_heads, a, a, self_valid, true, L.self_attn);
    dropout_forward(s, L.drop_self, dropout);
    y += s;
    Matrix<S> b = layer_norm_forward(P.ln2, y, L.ln2);
    Matrix<S> x = attention_forward(P.cross_attn, p.config.n_heads, b, memory, mem_valid, false, L.cross_attn);
    dropout_forward(x, L.drop_cross, dropout);
    y += x;
    L.ff_in = layer_norm_forward(P.ln3, y, L.ln3);
    L.ff_pre = linear_forward(P.ff1, L.ff_in);
    Matrix<S> ff = linear_forward(P.ff2, gelu_forward(L.ff_pre));
    dropout_forward(ff, L.drop_ff, dropout);
    y += ff;
  }
  c.final_hidden = layer_norm_forward(dec.ln_f, y, c.ln_f);
  c.logits = linear_forward(dec.head, c.final_hidden);
  return c;
}

template<typename S>
Matrix<S> decoder_forward(ParameterSet<S> const &p, std::vector<TokenId> const &input_ids, Matrix<S> const &memory)
{
  return decoder_forward_cached(p, input_ids, memory).logits;
}

// Returns the gradient with respect to the memory rows.
template<typename S>
Matrix<S> decoder_backward(ParameterSet<S> const &p, ParameterSet<S> &g, DecoderCache<S> const &c,
                           Matrix<S> const &d_logits)
{
  auto const &dec = *p.decoder;
  auto &gd = *g.decoder;
  Matrix<S> dfinal = linear_backward(dec.head, gd.head, c.final_hidden, d_logits);
  Matrix<S> dy = layer_norm_backward(dec.ln_f, gd.ln_f, c.ln_f, dfinal);
  Matrix<S> dmemory;
  for (std::size_t l = dec.layers.size(); l-- > 0;)
  {
    auto const &P = dec.layers[l];
    auto &G = gd.layers[l];
    auto const &L = c.layers[l];

    Matrix<S> dff = dy;
    dropout_backward(dff, L.drop_ff);
    Matrix<S> dh = linear_backward(P.ff2, G.ff2, gelu_forward(L.ff_pre), dff);
    dh = gelu_backward(L.ff_pre, dh);
    dh = linear_backward(P.ff1, G.ff1, L.ff_in, dh);
    dy += layer_norm_backward(P.ln3, G.ln3, L.ln3, dh);

    Matrix<S> dx = dy;
    dropout_backward(dx, L.drop_cross);
    auto [dq_cross, dmem] = attention_backward(P.cross_attn, G.cross_attn, L.cross_attn, dx);
    if (dmemory.size() == 0)
      dmemory = std::move(dmem);
    else
      dmemory += dmem;
    dy += layer_norm_backward(P.ln2, G.ln2, L.ln2, dq_cross);

    Matrix<S> ds = dy;
    dropout_backward(ds, L.drop_self);
    auto [dq, dkv] = attention_backward(P.self_attn, G.self_attn, L.self_attn, ds);
    dq += dkv;
    dy += layer_norm_backward(P.ln1, G.ln1, L.ln1, dq);
  }
  dropout_backward(dy, c.drop_emb);
  detail::embed_backward(gd.tok_emb, gd.pos_emb, c.ids, dy);
  return dmemory;
}

// [CLS] followed by all but the last target token.
inline std::vector<TokenId> teacher_forcing_input(std::vector<TokenId> const &target)
{
  std::vector<TokenId> in{kCls};
  in.insert(in.end(), target.begin(), target.end() - (target.empty() ? 0 : 1));
  return in;
}

// Greedy decoding until SEP (included) or max_len tokens.
template<typename S>
std::vector<TokenId> greedy_decode(ParameterSet<S> const &p, Matrix<S> const &memory, std::size_t max_len)
{
  std::vector<TokenId> out;
  std::vector<TokenId> in{kCls};
  while (out.size() < max_len && in.size() <= p.config.max_positions)
  {
    Matrix<S> logits = decoder_forward(p, in, memory);
    Eigen::Index best;
    logits.row(logits.rows() - 1).maxCoeff(&best);
    auto const id = static_cast<TokenId>(best);
    out.push_back(id);
    if (id == kSep)
      break;
    in.push_back(id);
  }
  return out;
}

// ---------------------------------------------------------------- losses

inline constexpr TokenId kIgnoreLabel = -1;

namespace detail
{
// Adds weight * CE(logits row i, target i) over rows with target >= 0 and
// writes d(weighted loss)/d logits into dlogits. Returns the unweighted sum.
template<typename S>
double cross_entropy(Matrix<S> const &logits, std::vector<TokenId> const &targets, double weight,
                     Matrix<S> &dlogits)
{
  dlogits.setZero(logits.rows(), logits.cols());
  double total = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i)
  {
    auto const t = targets[static_cast<std::size_t>(i)];
    if (t < 0)
      continue;
    S const m = logits.row(i).maxCoeff();
    auto e = (logits.row(i).array() - m).exp();
    S const z = e.sum();
    total += static_cast<double>(std::log(z) + m - logits(i, t));
    dlogits.row(i) = (e / z).matrix() * static_cast<S>(weight);
    dlogits(i, t) -= static_cast<S>(weight);
  }
  return total;
}
} // namespace detail

// One MLM sequence: masked input ids and labels (kIgnoreLabel where unselected).
struct MlmItem
{
  std::vector<TokenId> input;
  std::vector<TokenId> labels;
};

// One auxiliary sequence-to-sequence item. With memory_index set, the decoder
// attends to that single encoder state; otherwise to all of them.
struct AuxItem
{
  std::vector<TokenId> encoder_input;
  std::optional<std::size_t> memory_index;
  std::vector<TokenId> target; // ends with SEP

  bool operator==(AuxItem const &) const = default;
};

struct Objective
{
  std::vector<MlmItem> mlm;
  std::vector<AuxItem> aux;
  double aux_weight = 1.0;
};

struct LossBreakdown
{
  double mlm = 0.0;   // mean CE over labeled positions
  double aux = 0.0;   // mean CE over auxiliary target tokens
  double total = 0.0; // mlm + aux_weight * aux
  std::size_t mlm_tokens = 0;
  std::size_t aux_tokens = 0;
};

struct ObjectiveDropout
{
  DropoutContext mlm;
  DropoutContext aux;
};

template<typename S>
Matrix<S> memory_for(AuxItem const &item, Matrix<S> const &hidden)
{
  if (!item.memory_index)
    return hidden;
  if (*item.memory_index >= static_cast<std::size_t>(hidden.rows()))
    throw DataError(cat("memory index ", *item.memory_index, " outside sequence of ", hidden.rows()));
  return hidden.row(static_cast<Eigen::Index>(*item.memory_index));
}

// Computes the objective and accumulates its exact gradient into `grads`
// (which must share the structure of `params`).
template<typename S>
LossBreakdown loss_and_gradients(ParameterSet<S> const &p, Objective const &obj, ParameterSet<S> &grads,
                                 ObjectiveDropout dropout = {})
{
  LossBreakdown out;
  for (auto const &item : obj.mlm)
    for (auto l : item.labels)
      out.mlm_tokens += l >= 0;
  for (auto const &item : obj.aux)
    out.aux_tokens += item.target.size();
  if (!obj.aux.empty())
    require_decoder(p);

  double const mlm_weight = out.mlm_tokens ? 1.0 / static_cast<double>(out.mlm_tokens) : 0.0;
  double mlm_sum = 0.0;
  for (auto const &item : obj.mlm)
  {
    if (item.labels.size() != item.input.size())
      throw UsageError("MLM labels and input differ in length");
    auto cache = encoder_forward_cached(p, item.input, non_pad_mask(item.input), dropout.mlm);
    std::vector<Eigen::Index> rows;
    std::vector<TokenId> targets;
    for (std::size_t t = 0; t < item.labels.size(); ++t)
      if (item.labels[t] >= 0)
      {
        rows.push_back(static_cast<Eigen::Index>(t));
        targets.push_back(item.labels[t]);
      }
    if (rows.empty())
      continue;
    Matrix<S> h_sel(static_cast<Eigen::Index>(rows.size()), cache.hidden.cols());
    for (std::size_t r = 0; r < rows.size(); ++r)
      h_sel.row(static_cast<Eigen::Index>(r)) = cache.hidden.row(rows[r]);
    Matrix<S> logits = linear_forward(p.mlm_head, h_sel);
    Matrix<S> dlogits;
    mlm_sum += detail::cross_entropy(logits, targets, mlm_weight, dlogits);
    Matrix<S> dh_sel = linear_backward(p.mlm_head, grads.mlm_head, h_sel, dlogits);
    Matrix<S> dh = Matrix<S>::Zero(cache.hidden.rows(), cache.hidden.cols());
    for (std::size_t r = 0; r < rows.size(); ++r)
      dh.row(rows[r]) = dh_sel.row(static_cast<Eigen::Index>(r));
    encoder_backward(p, grads, cache, dh);
  }
  out.mlm = mlm_sum * mlm_weight;

  double const aux_weight = out.aux_tokens ? obj.aux_weight / static_cast<double>(out.aux_tokens) : 0.0;
  double aux_sum = 0.0;
  for (auto const &item : obj.aux)
  {
    auto enc = encoder_forward_cached(p, item.encoder_input, non_pad_mask(item.encoder_input), dropout.aux);
    Matrix<S> memory = memory_for(item, enc.hidden);
    auto dec = decoder_forward_cached(p, teacher_forcing_input(item.target), memory, dropout.aux);
    Matrix<S> dlogits;
    aux_sum += detail::cross_entropy(dec.logits, item.target, aux_weight, dlogits);
    Matrix<S> dmemory = decoder_backward(p, grads, dec, dlogits);
    Matrix<S> dh;
    if (item.memory_index)
    {
      dh = Matrix<S>::Zero(enc.hidden.rows(), enc.hidden.cols());
      dh.row(static_cast<Eigen::Index>(*item.memory_index)) = dmemory.row(0);
    }
    else
      dh = std::move(dmemory);
    encoder_backward(p, grads, enc, dh);
  }
  out.aux = out.aux_tokens ? aux_sum / static_cast<double>(out.aux_tokens) : 0.0;
  out.total = out.mlm + obj.aux_weight * out.aux;
  if (!std::isfinite(out.total))
    throw RuntimeError(cat("non-finite loss (mlm ", out.mlm, ", aux ", out.aux, ")"));
  return out;
}

template<typename S>
LossBreakdown objective_loss(ParameterSet<S> const &p, Objective const &obj)
{
  auto scratch = zeros_like(p);
  return loss_and_gradients(p, obj, scratch);
}

} // namespace l2lm
