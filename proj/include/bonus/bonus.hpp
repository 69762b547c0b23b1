#pragma once

#include "bonus/core.hpp"
#include "bonus/statistic.hpp"
#include "bonus/dists.hpp"
#include "bonus/pool.hpp"
#include "bonus/estimators.hpp"
#include "bonus/learners.hpp"
#include "bonus/engine.hpp"
#include "bonus/double_bonus.hpp"
#include "bonus/harness.hpp"
#include "bonus/config.hpp"
#include "bonus/zscores.hpp"
