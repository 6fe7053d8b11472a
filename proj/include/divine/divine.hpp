#pragma once

// Umbrella header.

#include "divine/errors.hpp"
#include "divine/numerics/adam.hpp"
#include "divine/numerics/grad_check.hpp"
#include "divine/numerics/layers.hpp"
#include "divine/numerics/losses.hpp"
#include "divine/numerics/params.hpp"
#include "divine/numerics/tensor.hpp"
#include "divine/data/container.hpp"
#include "divine/data/dataset.hpp"
#include "divine/data/folds.hpp"
#include "divine/data/synthetic.hpp"
#include "divine/model/baselines.hpp"
#include "divine/model/checkpoint.hpp"
#include "divine/model/config.hpp"
#include "divine/model/divine_model.hpp"
#include "divine/model/network.hpp"
#include "divine/train_eval/ablation.hpp"
#include "divine/train_eval/experiment.hpp"
#include "divine/train_eval/metrics.hpp"
#include "divine/train_eval/probe.hpp"
#include "divine/train_eval/trainer.hpp"
