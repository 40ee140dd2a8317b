#pragma once

// Umbrella header for the whole library.

#include "ftpss/units.hpp"
#include "ftpss/model.hpp"
#include "ftpss/trdp.hpp"
#include "ftpss/equivalent.hpp"
#include "ftpss/fpad.hpp"
#include "ftpss/dispatch.hpp"
#include "ftpss/powerflow.hpp"
#include "ftpss/sim.hpp"
#include "ftpss/scenario_io.hpp"
