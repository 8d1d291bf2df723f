#pragma once

#include "netexp/analysis.hpp"
#include "netexp/common.hpp"
#include "netexp/config.hpp"
#include "netexp/covariance.hpp"
#include "netexp/design.hpp"
#include "netexp/diagnostics.hpp"
#include "netexp/estimate.hpp"
#include "netexp/exposure.hpp"
#include "netexp/graph.hpp"
#include "netexp/io.hpp"
#include "netexp/rng.hpp"
#include "netexp/simulate.hpp"
