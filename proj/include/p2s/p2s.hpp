#pragma once

#include "p2s/adam.hpp"
#include "p2s/autodiff.hpp"
#include "p2s/checkpoint.hpp"
#include "p2s/config.hpp"
#include "p2s/conv.hpp"
#include "p2s/error.hpp"
#include "p2s/gradcheck.hpp"
#include "p2s/image.hpp"
#include "p2s/image_io.hpp"
#include "p2s/ista.hpp"
#include "p2s/kernel_bank.hpp"
#include "p2s/losses.hpp"
#include "p2s/metrics.hpp"
#include "p2s/neighbor.hpp"
#include "p2s/network.hpp"
#include "p2s/noise.hpp"
#include "p2s/phantom.hpp"
#include "p2s/rng.hpp"
#include "p2s/runtime.hpp"
#include "p2s/tensor.hpp"
#include "p2s/toml.hpp"
#include "p2s/trainer.hpp"
