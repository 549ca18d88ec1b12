#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "l2lm/model/checkpoint.hpp"
#include "l2lm/training/masking.hpp"
#include "l2lm/training/optimizer.hpp"

namespace l2lm
{

struct TrainingConfig
{
  double learning_rate = 2e-4;
  double weight_decay = 0.01;
  std::size_t warmup_steps = 4000;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t batch_size = 64;
  std::size_t epochs = 50;
  std::size_t context_size = 64;
  std::uint64_t seed = 0;
  double aux_weight = 1.0;
  std::size_t aux_batch_size = 0; // 0: same as batch_size
  std::size_t checkpoint_interval = 0; // 0: no intermediate checkpoints
  std::string checkpoint_dir;
  MaskingConfig masking;

  void validate() const
  {
    if (!(learning_rate > 0))
      throw UsageError("learning_rate must be positive");
    if (weight_decay < 0)
      throw UsageError("weight_decay must be non-negative");
    if (batch_size == 0 || epochs == 0)
      throw UsageError("batch_size and epochs must be positive");
    if (context_size < 2)
      throw UsageError("context_size must be at least 2");
    if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1 && eps > 0))
      throw UsageError("invalid AdamW coefficients");
    if (aux_weight < 0)
      throw UsageError("aux_weight must be non-negative");
    if (checkpoint_interval > 0 && checkpoint_dir.empty())
      throw UsageError("checkpoint_interval needs a checkpoint directory");
    masking.validate();
  }

  AdamWConfig adamw() const { return {beta1, beta2, eps, weight_decay}; }
  std::size_t effective_aux_batch() const { return aux_batch_size ? aux_batch_size : batch_size; }
};

inline json to_json(TrainingConfig const &c)
{
  return json{{"learning_rate", c.learning_rate},
              {"weight_decay", c.weight_decay},
              {"warmup_steps", c.warmup_steps},
              {"optimizer", "AdamW"},
              {"beta1", c.beta1},
              {"beta2", c.beta2},
              {"eps", c.eps},
              {"batch_size", c.batch_size},
              {"epochs", c.epochs},
              {"context_size", c.context_size},
              {"seed", c.seed},
              {"aux_weight", c.aux_weight},
              {"aux_batch_size", c.effective_aux_batch()},
              {"checkpoint_interval", c.checkpoint_interval},
              {"masking", to_json(c.masking)}};
}

// Linear warmup from 0 to the peak, then linear decay to 0 at total_steps.
inline double lr_at(std::size_t step, TrainingConfig const &cfg, std::size_t total_steps)
{
  if (total_steps <= cfg.warmup_steps)
    throw UsageError(cat("total steps (", total_steps, ") must exceed warmup steps (", cfg.warmup_steps, ")"));
  if (step <= cfg.warmup_steps)
    return cfg.learning_rate * static_cast<double>(step) / static_cast<double>(cfg.warmup_steps ? cfg.warmup_steps : 1);
  if (step >= total_steps)
    return 0.0;
  return cfg.learning_rate * static_cast<double>(total_steps - step) /
         static_cast<double>(total_steps - cfg.warmup_steps);
}

struct StepRecord
{
  std::size_t step = 0;
  double lr = 0.0;
  double mlm_loss = 0.0;
  std::optional<double> aux_loss;
  double total_loss = 0.0;
};

inline json to_json(StepRecord const &r)
{
  json j{{"step", r.step}, {"lr", r.lr}, {"mlm_loss", r.mlm_loss}, {"total_loss", r.total_loss}};
  if (r.aux_loss)
    j["aux_loss"] = *r.aux_loss;
  return j;
}

struct TrainLog
{
  json manifest;
  std::vector<StepRecord> steps;

  std::string to_jsonl() const
  {
    std::string out;
    for (auto const &s : steps)
      out += to_json(s).dump() + "\n";
    return out;
  }

  // Mean of a per-step quantity over steps [from, to).
  double mean(std::size_t from, std::size_t to, double StepRecord::*field) const
  {
    to = std::min(to, steps.size());
    if (from >= to)
      return 0.0;
    double s = 0;
    for (std::size_t i = from; i < to; ++i)
      s += steps[i].*field;
    return s / static_cast<double>(to - from);
  }
};

template<typename S>
struct TrainResult
{
  ParameterSet<S> params;
  TrainLog log;
  std::size_t steps_per_epoch = 0;
};

enum class AuxObjective
{
  none,
  definition,
  grammar,
};

inline std::string to_string(AuxObjective k)
{
  switch (k)
  {
  case AuxObjective::none: return "mlm";
  case AuxObjective::definition: return "mlm+definition";
  case AuxObjective::grammar: return "mlm+grammar";
  }
  return "?";
}

inline std::string examples_hash(std::vector<TrainingExample> const &examples)
{
  std::uint64_t h = fnv1a64("");
  for (auto const &ex : examples)
    h = fnv1a64(std::string_view(reinterpret_cast<char const *>(ex.ids.data()), ex.ids.size() * sizeof(TokenId)), h);
  return hex64(h);
}

inline json run_manifest(ModelConfig const &model, TrainingConfig const &cfg, AuxObjective objective,
                         std::string const &corpus_hash, std::size_t n_examples, std::size_t n_aux)
{
  return json{{"objective", to_string(objective)},
              {"model", to_json(model)},
              {"training", to_json(cfg)},
              {"corpus_hash", corpus_hash},
              {"packed_examples", n_examples},
              {"aux_items", n_aux},
              {"seed", cfg.seed},
              {"tool_version", kVersion}};
}

using StepCallback = std::function<void(StepRecord const &)>;

namespace detail
{
// Shared loop. The encoder's masking, shuffling and dropout streams are the
// same with or without auxiliary data, and the auxiliary side always runs
// (even at weight 0), so a zero weight reproduces the pure MLM run exactly.
inline TrainResult<float> train_loop(std::vector<TrainingExample> const &examples, std::vector<AuxItem> const &aux,
                                     ModelConfig model_cfg, TrainingConfig const &cfg, AuxObjective objective,
                                     StepCallback const &on_step)
{
  cfg.validate();
  if (examples.empty())
    throw DataError("training corpus is empty");
  model_cfg.seed = cfg.seed;
  model_cfg.validate();
  if (cfg.context_size > model_cfg.max_positions)
    throw UsageError(cat("context_size ", cfg.context_size, " exceeds max_positions ", model_cfg.max_positions));
  bool const multi = objective != AuxObjective::none;
  if (multi && model_cfg.decoder_layers == 0)
    throw UsageError("multi-objective training needs decoder_layers > 0");
  if (multi && aux.empty())
    throw DataError("multi-objective training has no auxiliary items");

  std::size_t const steps_per_epoch = (examples.size() + cfg.batch_size - 1) / cfg.batch_size;
  std::size_t const total_steps = cfg.epochs * steps_per_epoch;
  lr_at(0, cfg, total_steps); // validates the schedule before any work

  TrainResult<float> res;
  res.steps_per_epoch = steps_per_epoch;
  res.log.manifest = run_manifest(model_cfg, cfg, objective, examples_hash(examples), examples.size(), aux.size());

  auto params = init_params<float>(model_cfg);
  AdamWState<float> opt(params);
  auto grads = zeros_like(params);

  Rng shuffle_rng = make_rng(cfg.seed, RngPurpose::shuffle);
  Rng mask_rng = make_rng(cfg.seed, RngPurpose::masking);
  Rng drop_rng = make_rng(cfg.seed, RngPurpose::dropout);
  Rng aux_shuffle_rng = make_rng(cfg.seed, RngPurpose::aux_shuffle);
  Rng aux_drop_rng = make_rng(cfg.seed, RngPurpose::aux_dropout);
  ObjectiveDropout dropout{{&drop_rng, model_cfg.dropout}, {&aux_drop_rng, model_cfg.dropout}};

  std::vector<std::size_t> order(examples.size());
  std::vector<std::size_t> aux_order(aux.size());
  for (std::size_t i = 0; i < aux_order.size(); ++i)
    aux_order[i] = i;
  std::size_t aux_cursor = aux_order.size(); // forces a shuffle on first use

  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch)
  {
    for (std::size_t i = 0; i < order.size(); ++i)
      order[i] = i;
    shuffle(order, shuffle_rng);
    for (std::size_t b = 0; b < steps_per_epoch; ++b)
    {
      ++step;
      Objective obj;
      obj.aux_weight = cfg.aux_weight;
      for (std::size_t k = b * cfg.batch_size; k < std::min(order.size(), (b + 1) * cfg.batch_size); ++k)
        obj.mlm.push_back(apply_mlm_masking(examples[order[k]], cfg.masking, model_cfg.vocab_size, mask_rng));
      if (multi)
        for (std::size_t k = 0; k < cfg.effective_aux_batch(); ++k)
        {
          if (aux_cursor == aux_order.size())
          {
            shuffle(aux_order, aux_shuffle_rng);
            aux_cursor = 0;
          }
          obj.aux.push_back(aux[aux_order[aux_cursor++]]);
        }

      set_zero(grads);
      auto loss = loss_and_gradients(params, obj, grads, dropout);
      double const lr = lr_at(step, cfg, total_steps);
      adamw_step(params, grads, opt, lr, cfg.adamw());

      StepRecord rec{step, lr, loss.mlm, multi ? std::optional<double>(loss.aux) : std::nullopt, loss.total};
      res.log.steps.push_back(rec);
      if (on_step)
        on_step(rec);
      if (cfg.checkpoint_interval > 0 && step % cfg.checkpoint_interval == 0)
      {
        std::filesystem::create_directories(cfg.checkpoint_dir);
        save_checkpoint(params, (std::filesystem::path(cfg.checkpoint_dir) / cat("step-", step, ".ckpt")).string());
      }
    }
  }
  res.params = multi ? strip_decoder(params) : std::move(params);
  return res;
}
} // namespace detail

inline TrainResult<float> train_mlm(std::vector<TrainingExample> const &examples, ModelConfig const &model_cfg,
                                    TrainingConfig const &cfg, StepCallback const &on_step = {})
{
  auto enc_only = model_cfg;
  enc_only.decoder_layers = 0;
  return detail::train_loop(examples, {}, enc_only, cfg, AuxObjective::none, on_step);
}

// The exported parameters never contain the decoder.
inline TrainResult<float> train_multi_objective(std::vector<TrainingExample> const &examples,
                                                std::vector<AuxItem> const &aux, AuxObjective kind,
                                                ModelConfig const &model_cfg, TrainingConfig const &cfg,
                                                StepCallback const &on_step = {})
{
  if (kind == AuxObjective::none)
    throw UsageError("train_multi_objective needs an auxiliary objective");
  return detail::train_loop(examples, aux, model_cfg, cfg, kind, on_step);
}

} // namespace l2lm
