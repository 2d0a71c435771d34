#pragma once

#include "wcds/analysis.hpp"
#include "wcds/cds_baselines.hpp"
#include "wcds/deployment.hpp"
#include "wcds/error.hpp"
#include "wcds/graph.hpp"
#include "wcds/io.hpp"
#include "wcds/key_scheme.hpp"
#include "wcds/protocol.hpp"
#include "wcds/rng.hpp"
