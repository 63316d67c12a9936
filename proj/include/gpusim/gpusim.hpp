#pragma once

#include "gpusim/analysis.hpp"
#include "gpusim/cluster.hpp"
#include "gpusim/config.hpp"
#include "gpusim/engine.hpp"
#include "gpusim/error.hpp"
#include "gpusim/placement.hpp"
#include "gpusim/scheduler.hpp"
#include "gpusim/synth.hpp"
#include "gpusim/time.hpp"
#include "gpusim/trace.hpp"
