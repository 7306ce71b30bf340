#pragma once

#include "lifenet/adam.hpp"
#include "lifenet/autograd.hpp"
#include "lifenet/board.hpp"
#include "lifenet/checkpoint.hpp"
#include "lifenet/config.hpp"
#include "lifenet/datasets.hpp"
#include "lifenet/errors.hpp"
#include "lifenet/evaluation.hpp"
#include "lifenet/experiments.hpp"
#include "lifenet/gradcheck.hpp"
#include "lifenet/network.hpp"
#include "lifenet/ops.hpp"
#include "lifenet/report.hpp"
#include "lifenet/rng.hpp"
#include "lifenet/runtime.hpp"
#include "lifenet/tensor.hpp"
#include "lifenet/verification.hpp"
