/**
 * @file relcap.hpp
 * @brief Umbrella header: domains, energies, capacity and potential solvers,
 * property checks and serialization.
 */
#pragma once

#include "relcap/errors.hpp"
#include "relcap/grid.hpp"
#include "relcap/sobolev.hpp"
#include "relcap/solver.hpp"
#include "relcap/capacity.hpp"
#include "relcap/potential.hpp"
#include "relcap/propcheck.hpp"
#include "relcap/io.hpp"
