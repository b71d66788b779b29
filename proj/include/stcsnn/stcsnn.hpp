#pragma once

#include "stcsnn/checkpoint.hpp"
#include "stcsnn/common.hpp"
#include "stcsnn/compress.hpp"
#include "stcsnn/dataset.hpp"
#include "stcsnn/events.hpp"
#include "stcsnn/grad_check.hpp"
#include "stcsnn/network.hpp"
#include "stcsnn/neuron.hpp"
#include "stcsnn/run_config.hpp"
#include "stcsnn/tensor.hpp"
#include "stcsnn/train.hpp"
