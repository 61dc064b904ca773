#pragma once

#include "freqdoor/errors.hpp"
#include "freqdoor/tensor.hpp"
#include "freqdoor/params.hpp"
#include "freqdoor/autograd.hpp"
#include "freqdoor/image.hpp"
#include "freqdoor/resample.hpp"
#include "freqdoor/frequency.hpp"
#include "freqdoor/metrics.hpp"
#include "freqdoor/nn.hpp"
#include "freqdoor/checkpoint.hpp"
#include "freqdoor/triggers.hpp"
#include "freqdoor/injector.hpp"
#include "freqdoor/injector_train.hpp"
#include "freqdoor/baselines.hpp"
#include "freqdoor/victim.hpp"
#include "freqdoor/evaluation.hpp"
#include "freqdoor/defenses.hpp"
#include "freqdoor/dataset.hpp"
#include "freqdoor/config.hpp"
#include "freqdoor/plot.hpp"
#include "freqdoor/experiment.hpp"
