#pragma once

#include "dqpt/criticality.hpp"
#include "dqpt/mode_dynamics.hpp"
#include "dqpt/model.hpp"
#include "dqpt/observables.hpp"
#include "dqpt/quadrature.hpp"
#include "dqpt/roots.hpp"
#include "dqpt/version.hpp"
