// Umbrella header.
#pragma once

#include "surforbit/vec.hpp"
#include "surforbit/errors.hpp"
#include "surforbit/expr.hpp"
#include "surforbit/mesh.hpp"
#include "surforbit/chart.hpp"
#include "surforbit/surface.hpp"
#include "surforbit/dynamics.hpp"
#include "surforbit/integrate.hpp"
#include "surforbit/hypotheses.hpp"
#include "surforbit/orbit.hpp"
#include "surforbit/scenarios.hpp"
#include "surforbit/io.hpp"
