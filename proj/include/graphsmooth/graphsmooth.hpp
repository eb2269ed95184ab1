#pragma once

// Umbrella header for the graph-signal smoothness detection library.

#include "graphsmooth/detectors.hpp"
#include "graphsmooth/errors.hpp"
#include "graphsmooth/filters.hpp"
#include "graphsmooth/graph.hpp"
#include "graphsmooth/io.hpp"
#include "graphsmooth/quadform.hpp"
#include "graphsmooth/rng.hpp"
#include "graphsmooth/signal.hpp"
#include "graphsmooth/simulate.hpp"
