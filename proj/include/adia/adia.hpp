#pragma once

#include "adia/analysis.hpp"
#include "adia/csv.hpp"
#include "adia/dynamics.hpp"
#include "adia/errors.hpp"
#include "adia/krylov.hpp"
#include "adia/lattice.hpp"
#include "adia/parallel.hpp"
#include "adia/quadrature.hpp"
#include "adia/rank_one.hpp"
#include "adia/schedule.hpp"
#include "adia/spectral.hpp"
