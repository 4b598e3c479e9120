#pragma once

#include "cleegn/analysis.hpp"
#include "cleegn/batchnorm.hpp"
#include "cleegn/checkpoint.hpp"
#include "cleegn/conv.hpp"
#include "cleegn/harness.hpp"
#include "cleegn/loss.hpp"
#include "cleegn/model.hpp"
#include "cleegn/optim.hpp"
#include "cleegn/preprocess.hpp"
#include "cleegn/recording.hpp"
#include "cleegn/rng.hpp"
#include "cleegn/streaming.hpp"
#include "cleegn/synth.hpp"
#include "cleegn/tensor.hpp"
#include "cleegn/windows.hpp"
