#pragma once

// Umbrella header for the lmKAN library: lookup multivariate
// Kolmogorov-Arnold layers with training, fusion and benchmarking support.

#include "lmkan/adam.hpp"
#include "lmkan/batchnorm.hpp"
#include "lmkan/bench.hpp"
#include "lmkan/conv.hpp"
#include "lmkan/costs.hpp"
#include "lmkan/errors.hpp"
#include "lmkan/func2d.hpp"
#include "lmkan/fuse.hpp"
#include "lmkan/grid.hpp"
#include "lmkan/hessian.hpp"
#include "lmkan/layer.hpp"
#include "lmkan/linear.hpp"
#include "lmkan/matrix.hpp"
#include "lmkan/model.hpp"
#include "lmkan/rng.hpp"
#include "lmkan/schedule.hpp"
#include "lmkan/serialize.hpp"
#include "lmkan/threading.hpp"
#include "lmkan/train.hpp"
