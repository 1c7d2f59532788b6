// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "deepptych/adam.hpp"
#include "deepptych/dataset.hpp"
#include "deepptych/error.hpp"
#include "deepptych/experiment.hpp"
#include "deepptych/fft.hpp"
#include "deepptych/generator.hpp"
#include "deepptych/metrics.hpp"
#include "deepptych/network.hpp"
#include "deepptych/optics.hpp"
#include "deepptych/ptyt.hpp"
#include "deepptych/rng.hpp"
#include "deepptych/solvers.hpp"
#include "deepptych/tensor.hpp"
#include "deepptych/train.hpp"
#include "deepptych/tv.hpp"
