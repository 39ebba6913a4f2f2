#pragma once

#include "pfsddp/cut_pool.hpp"
#include "pfsddp/engine.hpp"
#include "pfsddp/error.hpp"
#include "pfsddp/extensive.hpp"
#include "pfsddp/hydro.hpp"
#include "pfsddp/lp.hpp"
#include "pfsddp/model.hpp"
#include "pfsddp/rng.hpp"
#include "pfsddp/stage_solver.hpp"
