#include <cstring>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace l2lm;

namespace
{
template<typename S>
bool bit_identical(Matrix<S> const &a, Matrix<S> const &b)
{
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(S) * static_cast<std::size_t>(a.size())) == 0;
}

std::vector<TokenId> random_ids(Rng &rng, std::size_t len, std::size_t vocab)
{
  std::vector<TokenId> ids;
  for (std::size_t i = 0; i < len; ++i)
    ids.push_back(testkit::random_token(rng, vocab));
  return ids;
}

// Plain Adam loop on a fixed objective, without decay.
template<typename S>
double fit(ParameterSet<S> &p, Objective const &obj, std::size_t steps, double lr)
{
  AdamWState<S> st(p);
  auto g = zeros_like(p);
  AdamWConfig cfg;
  cfg.weight_decay = 0;
  double loss = 0;
  for (std::size_t s = 0; s < steps; ++s)
  {
    set_zero(g);
    loss = loss_and_gradients(p, obj, g).total;
    adamw_step(p, g, st, lr, cfg);
  }
  return loss;
}
} // namespace

TEST(Init, DeterministicAndConventional)
{
  auto c = testkit::tiny_config(3);
  auto a = init_params<float>(c), b = init_params<float>(c);
  EXPECT_EQ(serialize_checkpoint(a), serialize_checkpoint(b));
  EXPECT_TRUE((a.layers[0].ln1.gamma.array() == 1.0f).all());
  EXPECT_TRUE((a.layers[0].ln1.beta.array() == 0.0f).all());
  EXPECT_TRUE((a.mlm_head.b.array() == 0.0f).all());
  // Sample standard deviation of a large weight matrix is near 0.02.
  ModelConfig big;
  big.seed = 1;
  auto p = init_params<double>(big);
  double const mean = p.tok_emb.mean();
  double const sd = std::sqrt((p.tok_emb.array() - mean).square().mean());
  EXPECT_NEAR(sd, 0.02, 0.0005);
  c.seed = 4;
  EXPECT_NE(serialize_checkpoint(init_params<float>(c)), serialize_checkpoint(a));
}

TEST(Init, ParameterCountClosedForm)
{
  ModelConfig c;
  c.n_layers = 2;
  c.n_heads = 4;
  c.d_model = 64;
  c.d_ff = 256;
  c.vocab_size = 2000;
  c.max_positions = 64;
  // tok 2000*64 + pos 64*64 + 2 * (2 LN * 128 + 4 * (64*64 + 64) + (64*256 + 256) + (256*64 + 64))
  // + final LN 128 + head 64*2000 + 2000
  EXPECT_EQ(parameter_count(init_params<float>(c)), 362192u);
  c.decoder_layers = 1;
  auto with_dec = parameter_count(init_params<float>(c));
  // decoder: tok + pos + one layer (3 LN, 2 attention, FF) + LN + head
  std::size_t const dec = 128000 + 4096 + (3 * 128 + 2 * 16640 + 16640 + 16448) + 128 + 130000;
  EXPECT_EQ(with_dec, 362192u + dec);
}

TEST(Init, InvalidConfigs)
{
  ModelConfig c;
  c.n_heads = 3;
  EXPECT_THROW(init_params<float>(c), UsageError);
  c = {};
  c.max_positions = 32;
  EXPECT_THROW(init_params<float>(c), UsageError);
  c = {};
  c.vocab_size = 6;
  EXPECT_THROW(init_params<float>(c), UsageError);
  c = {};
  c.dropout = 1.0;
  EXPECT_THROW(init_params<float>(c), UsageError);
}

TEST(Init, DecoderDoesNotShiftEncoderInit)
{
  auto enc = init_params<float>(testkit::tiny_config(5, 0));
  auto full = init_params<float>(testkit::tiny_config(5, 1));
  EXPECT_EQ(serialize_checkpoint(enc), serialize_checkpoint(strip_decoder(full)));
}

TEST(Encoder, AttentionRowsSumToOne)
{
  auto p = init_params<double>(testkit::tiny_config(1));
  auto rng = make_rng(1, RngPurpose::toy_pairs);
  auto ids = random_ids(rng, 9, p.config.vocab_size);
  ids[7] = ids[8] = kPad;
  auto cache = encoder_forward_cached(p, ids, non_pad_mask(ids));
  for (auto const &P : cache.layers[0].attn.P)
    for (Eigen::Index i = 0; i < P.rows(); ++i)
    {
      EXPECT_NEAR(P.row(i).sum(), 1.0, 1e-6);
      EXPECT_EQ(P(i, 7), 0.0);
      EXPECT_EQ(P(i, 8), 0.0);
    }
  EXPECT_TRUE(cache.hidden.allFinite());
  EXPECT_EQ(cache.hidden.rows(), 9);
}

TEST(Encoder, PadContentDoesNotLeak)
{
  auto p = init_params<double>(testkit::tiny_config(2));
  auto rng = make_rng(2, RngPurpose::toy_pairs);
  auto ids = random_ids(rng, 10, p.config.vocab_size);
  std::vector<std::uint8_t> mask(10, 1);
  for (std::size_t i = 6; i < 10; ++i)
    mask[i] = 0;
  auto base = encoder_forward(p, ids, mask).hidden;
  for (int trial = 0; trial < 5; ++trial)
  {
    auto other = ids;
    for (std::size_t i = 6; i < 10; ++i)
      other[i] = testkit::random_token(rng, p.config.vocab_size);
    auto h = encoder_forward(p, other, mask).hidden;
    EXPECT_TRUE(bit_identical<double>(h.topRows(6), base.topRows(6)));
  }
  // PAD ids get the same treatment from the default mask.
  auto padded = ids;
  padded.resize(6);
  padded.insert(padded.end(), 4, kPad);
  EXPECT_TRUE(bit_identical<double>(encoder_forward(p, padded).hidden.topRows(6), base.topRows(6)));
}

TEST(Encoder, SingleTokenMatchesHandPipeline)
{
  auto p = init_params<double>(testkit::tiny_config(3));
  TokenId const tok = 7;
  auto h = encoder_forward(p, std::vector<TokenId>{tok}).hidden;
  // No mixing: the single key gets weight 1, so attention = o(v(ln1(x))).
  Matrix<double> x = p.tok_emb.row(tok) + p.pos_emb.row(0);
  for (auto const &L : p.layers)
  {
    LayerNormCache<double> c1, c2;
    x += linear_forward(L.attn.o, linear_forward(L.attn.v, layer_norm_forward(L.ln1, x, c1)));
    x += linear_forward(L.ff2, gelu_forward(linear_forward(L.ff1, layer_norm_forward(L.ln2, x, c2))));
  }
  LayerNormCache<double> cf;
  Matrix<double> expected = layer_norm_forward(p.ln_f, x, cf);
  EXPECT_LT((h - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Encoder, RejectsBadIds)
{
  auto p = init_params<float>(testkit::tiny_config(1));
  EXPECT_THROW(encoder_forward(p, std::vector<TokenId>{1, 11}), DataError);
  EXPECT_THROW(encoder_forward(p, std::vector<TokenId>{-1}), DataError);
  EXPECT_THROW(encoder_forward(p, std::vector<TokenId>(65, 7)), DataError);
  EXPECT_THROW(encoder_forward(p, std::vector<TokenId>{}), UsageError);
  EXPECT_THROW(encoder_forward(p, std::vector<TokenId>{7, 8}, std::vector<std::uint8_t>{1}), UsageError);
}

TEST(MlmHead, ZeroHiddenZeroLogitsAndSoftmax)
{
  auto p = init_params<double>(testkit::tiny_config(1));
  EncoderOutput<double> zero{Matrix<double>::Zero(3, 8)};
  EXPECT_EQ(mlm_logits(p, zero).cwiseAbs().maxCoeff(), 0.0);
  auto logits = mlm_logits(p, encoder_forward(p, std::vector<TokenId>{6, 7, 8}));
  ASSERT_EQ(logits.cols(), 11);
  for (Eigen::Index i = 0; i < logits.rows(); ++i)
  {
    Eigen::ArrayXd e = (logits.row(i).array() - logits.row(i).maxCoeff()).exp().transpose();
    EXPECT_NEAR((e / e.sum()).sum(), 1.0, 1e-12);
  }
}

TEST(MlmHead, OverfitRecoversMaskedToken)
{
  auto c = testkit::tiny_config(4, 0);
  c.d_model = 16;
  c.d_ff = 32;
  auto p = init_params<double>(c);
  Objective obj;
  obj.mlm.push_back({{6, 9, kMask, 8, 10}, {kIgnoreLabel, kIgnoreLabel, 7, kIgnoreLabel, kIgnoreLabel}});
  double const initial = objective_loss(p, obj).total;
  EXPECT_NEAR(initial, std::log(11.0), 0.3); // near-uniform start, one labelled position
  double const final_loss = fit(p, obj, 150, 1e-2);
  EXPECT_LT(final_loss, 0.05);
  auto logits = mlm_logits(p, encoder_forward(p, obj.mlm[0].input));
  Eigen::Index best;
  logits.row(2).maxCoeff(&best);
  EXPECT_EQ(best, 7);
}

TEST(Decoder, Causality)
{
  auto p = init_params<double>(testkit::tiny_config(5));
  Matrix<double> memory = encoder_forward(p, std::vector<TokenId>{6, 7, 8}).hidden;
  std::vector<TokenId> in{kCls, 6, 7, 8, 9};
  auto base = decoder_forward(p, in, memory);
  for (std::size_t j = 1; j < in.size(); ++j)
  {
    auto changed = in;
    changed[j] = 10;
    auto out = decoder_forward(p, changed, memory);
    EXPECT_TRUE(bit_identical<double>(out.topRows(static_cast<Eigen::Index>(j)),
                                      base.topRows(static_cast<Eigen::Index>(j))));
    EXPECT_FALSE(bit_identical<double>(out.row(static_cast<Eigen::Index>(j)), base.row(static_cast<Eigen::Index>(j))));
  }
}

TEST(Decoder, SingleMemoryRowGetsFullWeight)
{
  auto p = init_params<double>(testkit::tiny_config(6));
  Matrix<double> memory = encoder_forward(p, std::vector<TokenId>{6, 7, 8}).hidden.row(1);
  auto c = decoder_forward_cached(p, std::vector<TokenId>{kCls, 9, 10}, memory);
  for (auto const &P : c.layers[0].cross_attn.P)
  {
    ASSERT_EQ(P.cols(), 1);
    EXPECT_TRUE((P.array() == 1.0).all());
  }
}

TEST(Decoder, AbsentDecoderIsUsageError)
{
  auto p = init_params<double>(testkit::tiny_config(6, 0));
  Matrix<double> memory = Matrix<double>::Zero(1, 8);
  EXPECT_THROW(decoder_forward(p, std::vector<TokenId>{kCls}, memory), UsageError);
  Objective obj;
  obj.aux.push_back({{6, 7}, std::nullopt, {8, kSep}});
  auto g = zeros_like(p);
  EXPECT_THROW(loss_and_gradients(p, obj, g), UsageError);
}

TEST(Decoder, OverfitPairGreedyDecodes)
{
  auto c = testkit::tiny_config(7);
  c.d_model = 16;
  c.d_ff = 32;
  c.vocab_size = 14;
  auto p = init_params<double>(c);
  Objective obj;
  obj.aux_weight = 1.0;
  AuxItem item{{6, kMark, 7, 8, 9}, 2, {10, 11, 12, 13, 12, kSep}};
  obj.aux.push_back(item);
  EXPECT_LT(fit(p, obj, 200, 1e-2), 0.05);
  auto enc = encoder_forward(p, item.encoder_input).hidden;
  EXPECT_EQ(greedy_decode(p, memory_for(item, enc), 10), item.target);
}

TEST(Decoder, TeacherForcingShift)
{
  EXPECT_EQ(teacher_forcing_input({10, 11, kSep}), (std::vector<TokenId>{kCls, 10, 11}));
}

TEST(Gradients, MatchFiniteDifferences)
{
  for (std::uint64_t seed : {11u, 12u})
  {
    auto r = testkit::gradient_check(seed);
    EXPECT_LT(r.max_rel_error, 1e-4) << "seed " << seed << " worst " << r.worst_tensor;
    EXPECT_GT(r.coordinates, 2000u);
  }
}

TEST(Gradients, UnusedDecoderGetsExactlyZero)
{
  auto c = testkit::tiny_config(8);
  auto p = init_params<double>(c);
  auto obj = testkit::random_objective(c, 8);
  obj.aux.clear();
  auto g = zeros_like(p);
  loss_and_gradients(p, obj, g);
  for_each_tensor(
      [&](std::string const &name, TensorKind, Matrix<double> &t) {
        if (name.starts_with("dec."))
          EXPECT_EQ(t.cwiseAbs().maxCoeff(), 0.0) << name;
      },
      g);
  EXPECT_GT(g.tok_emb.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Gradients, Deterministic)
{
  auto c = testkit::tiny_config(9);
  auto p = init_params<float>(c);
  auto obj = testkit::random_objective(c, 9);
  auto g1 = zeros_like(p), g2 = zeros_like(p);
  loss_and_gradients(p, obj, g1);
  loss_and_gradients(p, obj, g2);
  EXPECT_EQ(serialize_checkpoint(g1), serialize_checkpoint(g2));
}

TEST(Gradients, NonFiniteLossIsError)
{
  auto c = testkit::tiny_config(10, 0);
  auto p = init_params<double>(c);
  p.mlm_head.b(0, 7) = std::numeric_limits<double>::quiet_NaN();
  Objective obj;
  obj.mlm.push_back({{6, kMask}, {kIgnoreLabel, 7}});
  auto g = zeros_like(p);
  EXPECT_THROW(loss_and_gradients(p, obj, g), RuntimeError);
}

TEST(Strip, IdentityAndSmallerCheckpoint)
{
  auto full = init_params<float>(testkit::tiny_config(12));
  auto stripped = strip_decoder(full);
  EXPECT_FALSE(stripped.has_decoder());
  EXPECT_EQ(stripped.config.decoder_layers, 0u);
  auto rng = make_rng(12, RngPurpose::toy_pairs);
  for (int i = 0; i < 10; ++i)
  {
    auto ids = random_ids(rng, 1 + uniform_below(rng, 20), 11);
    EXPECT_TRUE(bit_identical<float>(mlm_logits(full, encoder_forward(full, ids)),
                                     mlm_logits(stripped, encoder_forward(stripped, ids))));
  }
  EXPECT_LT(serialize_checkpoint(stripped).size(), serialize_checkpoint(full).size());
}

TEST(Checkpoint, RoundTripAndValidation)
{
  auto p = init_params<float>(testkit::tiny_config(13));
  auto dir = testkit::temp_dir("ckpt");
  auto path = (dir / "m.ckpt").string();
  save_checkpoint(p, path);
  auto q = load_checkpoint<float>(path);
  EXPECT_EQ(q.config, p.config);
  EXPECT_EQ(serialize_checkpoint(q), serialize_checkpoint(p));
  auto bytes = serialize_checkpoint(p);
  EXPECT_EQ(bytes.substr(0, 8), "L2LMCKPT");
  EXPECT_THROW(parse_checkpoint<float>(bytes.substr(0, bytes.size() - 3)), DataError);
  EXPECT_THROW(parse_checkpoint<float>(bytes + "x"), DataError);
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(parse_checkpoint<float>(bad), DataError);
  EXPECT_THROW(load_checkpoint<float>((dir / "missing.ckpt").string()), DataError);
  // Double parameters go through float32 storage.
  auto d = load_checkpoint<double>(path);
  EXPECT_EQ(d.tok_emb(3, 2), static_cast<double>(p.tok_emb(3, 2)));
}

TEST(Marking, SimpleWord)
{
  auto tok = train_subwords(testkit::as_documents({"the cat sat on the mat", "a cat and a hat"}), 22, 0);
  auto m = mark_position(tok, "the cat sat", "cat");
  auto plain = tok.encode("the cat sat");
  auto cat_ids = tok.encode_chunk(" cat");
  ASSERT_EQ(m.ids.size(), plain.size() + 1);
  EXPECT_EQ(m.ids[m.index - 1], kMark);
  EXPECT_EQ(tok.decode(std::vector<TokenId>(m.ids.begin() + static_cast<std::ptrdiff_t>(m.index),
                                            m.ids.begin() + static_cast<std::ptrdiff_t>(m.index + cat_ids.size()))),
            " cat");
  EXPECT_THROW(mark_position(tok, "the cat sat", "dog"), DataError);
  EXPECT_THROW(mark_position(tok, "the cat sat", ""), UsageError);
  // Case-insensitive; word-internal matches are rejected.
  EXPECT_EQ(mark_position(tok, "The Cat sat", "cat").index, m.index);
  EXPECT_THROW(mark_position(tok, "the concat sat", "cat"), DataError);
}

TEST(Marking, MultiSubwordTargetIndexesFirstPiece)
{
  auto tok = train_subwords(testkit::as_documents({"a cat can tap a pull", "cap lap put up"}), 22, 0);
  auto target_ids = tok.encode_chunk(" catapult");
  ASSERT_GT(target_ids.size(), 1u);
  auto m = mark_position(tok, "a catapult fired", "catapult");
  EXPECT_EQ(m.ids[m.index - 1], kMark);
  EXPECT_EQ(m.ids[m.index], target_ids.front());
  std::vector<TokenId> after(m.ids.begin() + static_cast<std::ptrdiff_t>(m.index),
                             m.ids.begin() + static_cast<std::ptrdiff_t>(m.index + target_ids.size()));
  EXPECT_EQ(after, target_ids);
}
