#pragma once

// Umbrella header for the resonance-zone analysis toolkit.

#include "reskit/averaging.hpp"
#include "reskit/chart.hpp"
#include "reskit/dynamics.hpp"
#include "reskit/elliptic.hpp"
#include "reskit/io.hpp"
#include "reskit/numerics.hpp"
#include "reskit/ode.hpp"
#include "reskit/pendulum.hpp"
#include "reskit/simulate.hpp"
