// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "deal/bench.hpp"
#include "deal/checkpoint.hpp"
#include "deal/config.hpp"
#include "deal/errors.hpp"
#include "deal/experiment.hpp"
#include "deal/gradcheck.hpp"
#include "deal/lora.hpp"
#include "deal/matrix.hpp"
#include "deal/model.hpp"
#include "deal/retention.hpp"
#include "deal/rng.hpp"
#include "deal/svd.hpp"
#include "deal/svd_analysis.hpp"
#include "deal/tape.hpp"
#include "deal/tasks.hpp"
#include "deal/training.hpp"
#include "deal/updater.hpp"
