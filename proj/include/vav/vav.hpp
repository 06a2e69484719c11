#pragma once

// Umbrella header.

#include "vav/agents.hpp"
#include "vav/common.hpp"
#include "vav/environment.hpp"
#include "vav/epsilon.hpp"
#include "vav/exact_tests.hpp"
#include "vav/experiment.hpp"
#include "vav/gridworld.hpp"
#include "vav/halfspace.hpp"
#include "vav/heuristics.hpp"
#include "vav/linprog.hpp"
#include "vav/mdp.hpp"
#include "vav/omni.hpp"
#include "vav/rng.hpp"
#include "vav/verdict.hpp"
