#pragma once

#include "lowrank/common.hpp"
#include "lowrank/mdp.hpp"
#include "lowrank/model_class.hpp"
#include "lowrank/planner.hpp"
#include "lowrank/rep_ucb.hpp"
#include "lowrank/rep_lcb.hpp"
#include "lowrank/envs.hpp"
#include "lowrank/io.hpp"
#include "lowrank/experiment.hpp"
