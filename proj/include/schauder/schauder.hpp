#pragma once

// Umbrella header: every module of the library.

#include "schauder/core/errors.hpp"
#include "schauder/core/expression.hpp"
#include "schauder/core/kv_config.hpp"
#include "schauder/geometry.hpp"
#include "schauder/holder_norms.hpp"
#include "schauder/littlewood_paley.hpp"
#include "schauder/potential.hpp"
#include "schauder/elliptic_solver.hpp"
#include "schauder/semilinear.hpp"
#include "schauder/fuchsian_blowup.hpp"
#include "schauder/experiments.hpp"
