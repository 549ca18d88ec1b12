#pragma once

#include <cmath>
#include <vector>

#include "l2lm/model/network.hpp"

namespace l2lm
{

struct MaskingConfig
{
  double mask_prob = 0.15;
  // Of the selected positions:
  double to_mask = 0.8;
  double to_random = 0.1;
  double unchanged = 0.1;

  void validate() const
  {
    if (!(mask_prob >= 0.0 && mask_prob <= 1.0))
      throw UsageError(cat("mask_prob must lie in [0, 1], got ", mask_prob));
    if (to_mask < 0 || to_random < 0 || unchanged < 0 || std::abs(to_mask + to_random + unchanged - 1.0) > 1e-9)
      throw UsageError("masking fractions must be non-negative and sum to 1");
  }

  bool operator==(MaskingConfig const &) const = default;
};

inline json to_json(MaskingConfig const &m)
{
  return json{{"mask_prob", m.mask_prob}, {"to_mask", m.to_mask}, {"to_random", m.to_random}, {"unchanged", m.unchanged}};
}

// Each non-special position is selected independently with mask_prob; two
// uniform draws per eligible position, none for PAD or other specials.
// Random replacements come from the non-special range [6, V).
inline MlmItem apply_mlm_masking(TrainingExample const &ex, MaskingConfig const &cfg, std::size_t vocab_size, Rng &rng)
{
  if (vocab_size <= static_cast<std::size_t>(kNumSpecialTokens))
    throw UsageError("vocabulary has no ordinary tokens to sample");
  MlmItem out{ex.ids, std::vector<TokenId>(ex.ids.size(), kIgnoreLabel)};
  for (std::size_t i = 0; i < ex.ids.size(); ++i)
  {
    if (is_special(ex.ids[i]))
      continue;
    bool const selected = uniform01(rng) < cfg.mask_prob;
    double const branch = uniform01(rng);
    if (!selected)
      continue;
    out.labels[i] = ex.ids[i];
    if (branch < cfg.to_mask)
      out.input[i] = kMask;
    else if (branch < cfg.to_mask + cfg.to_random)
      out.input[i] = static_cast<TokenId>(kNumSpecialTokens + uniform_below(rng, vocab_size - kNumSpecialTokens));
  }
  return out;
}

} // namespace l2lm
