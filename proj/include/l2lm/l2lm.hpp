#pragma once

#include "l2lm/common.hpp"
#include "l2lm/corpus.hpp"
#include "l2lm/synthesis.hpp"
#include "l2lm/tokenizer.hpp"
#include "l2lm/model/params.hpp"
#include "l2lm/model/layers.hpp"
#include "l2lm/model/network.hpp"
#include "l2lm/model/checkpoint.hpp"
#include "l2lm/model/marking.hpp"
#include "l2lm/training/masking.hpp"
#include "l2lm/training/optimizer.hpp"
#include "l2lm/training/aux_data.hpp"
#include "l2lm/training/trainer.hpp"
#include "l2lm/evaluation.hpp"
