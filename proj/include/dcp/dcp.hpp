#pragma once

#include "dcp/baselines.hpp"
#include "dcp/blocks.hpp"
#include "dcp/hypergraph.hpp"
#include "dcp/io.hpp"
#include "dcp/masks.hpp"
#include "dcp/pipeline.hpp"
#include "dcp/placement.hpp"
#include "dcp/plan.hpp"
#include "dcp/schedule.hpp"
#include "dcp/simexec.hpp"
#include "dcp/synth.hpp"
#include "dcp/types.hpp"
