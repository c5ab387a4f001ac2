#pragma once

#include "tcal/acquisition.hpp"
#include "tcal/dataset.hpp"
#include "tcal/energy.hpp"
#include "tcal/estimate.hpp"
#include "tcal/evaluation.hpp"
#include "tcal/geometry.hpp"
#include "tcal/simulator.hpp"
#include "tcal/tcgraph.hpp"
#include "tcal/tracker.hpp"
