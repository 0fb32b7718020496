#pragma once

// Umbrella header.

#include "rram/adaptive.hpp"
#include "rram/commands.hpp"
#include "rram/config.hpp"
#include "rram/dataio.hpp"
#include "rram/geometry.hpp"
#include "rram/lowrank.hpp"
#include "rram/matrix_market.hpp"
#include "rram/operators.hpp"
#include "rram/problems.hpp"
#include "rram/random.hpp"
#include "rram/rbb.hpp"
#include "rram/svd.hpp"
