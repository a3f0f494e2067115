#pragma once

// Everything at once. Individual headers can be included on their own.

#include "geo/error.hpp"
#include "geo/program.hpp"
#include "geo/raster.hpp"
#include "geo/render.hpp"
#include "geo/image_io.hpp"
#include "geo/edge_map.hpp"
#include "geo/distance.hpp"
#include "geo/metrics.hpp"
#include "geo/anchoring.hpp"
#include "geo/skeleton.hpp"
#include "geo/objective.hpp"
#include "geo/vep.hpp"
#include "geo/evolution.hpp"
#include "geo/corpus.hpp"
#include "geo/prompts.hpp"
#include "geo/agents.hpp"
#include "geo/dataset.hpp"
