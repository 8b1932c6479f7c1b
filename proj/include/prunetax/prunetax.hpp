#pragma once

// Channel-pruning experimentation toolkit: a minimal CNN engine with first-
// and second-order derivative propagation, the four-axis saliency taxonomy
// (base input x pointwise metric x reduction x scaling), iterative
// least-salient-channel pruning with and without retraining, and a sweep
// harness with CSV output.

#include "prunetax/analysis.hpp"
#include "prunetax/autodiff.hpp"
#include "prunetax/checkpoint.hpp"
#include "prunetax/common.hpp"
#include "prunetax/config.hpp"
#include "prunetax/csv.hpp"
#include "prunetax/dataset.hpp"
#include "prunetax/experiment.hpp"
#include "prunetax/network.hpp"
#include "prunetax/pruning.hpp"
#include "prunetax/rng.hpp"
#include "prunetax/saliency.hpp"
#include "prunetax/sgd.hpp"
#include "prunetax/stats.hpp"
#include "prunetax/tensor.hpp"
