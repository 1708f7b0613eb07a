#pragma once

#include "mllm/attention.hpp"
#include "mllm/checkpoint.hpp"
#include "mllm/config.hpp"
#include "mllm/config_file.hpp"
#include "mllm/cost_model.hpp"
#include "mllm/data.hpp"
#include "mllm/errors.hpp"
#include "mllm/eval.hpp"
#include "mllm/model.hpp"
#include "mllm/ops.hpp"
#include "mllm/ptq.hpp"
#include "mllm/quant.hpp"
#include "mllm/sharing.hpp"
#include "mllm/tensor.hpp"
#include "mllm/training.hpp"
