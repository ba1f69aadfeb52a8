#pragma once

#include "comsd/analysis.hpp"
#include "comsd/checkpoint.hpp"
#include "comsd/config.hpp"
#include "comsd/contrastive.hpp"
#include "comsd/ddpg.hpp"
#include "comsd/entropy.hpp"
#include "comsd/envs.hpp"
#include "comsd/errors.hpp"
#include "comsd/loops.hpp"
#include "comsd/metrics.hpp"
#include "comsd/ndmath.hpp"
#include "comsd/random.hpp"
#include "comsd/replay.hpp"
#include "comsd/reward.hpp"
#include "comsd/skillspace.hpp"
