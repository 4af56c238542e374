#pragma once

#include "fof/bench.hpp"
#include "fof/comm.hpp"
#include "fof/distributed.hpp"
#include "fof/engine.hpp"
#include "fof/generate.hpp"
#include "fof/geometry.hpp"
#include "fof/oracle.hpp"
#include "fof/particle_io.hpp"
#include "fof/types.hpp"
#include "fof/union_find.hpp"
