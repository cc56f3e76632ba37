#pragma once

#include "marlin/abduce.hpp"
#include "marlin/dbscan.hpp"
#include "marlin/evaluation.hpp"
#include "marlin/features.hpp"
#include "marlin/fixpoint.hpp"
#include "marlin/geo.hpp"
#include "marlin/grid_io.hpp"
#include "marlin/interval.hpp"
#include "marlin/learner.hpp"
#include "marlin/logic.hpp"
#include "marlin/metrics.hpp"
#include "marlin/parallel.hpp"
#include "marlin/rules_io.hpp"
#include "marlin/serve.hpp"
#include "marlin/synth.hpp"
#include "marlin/trajectory.hpp"
#include "marlin/trajectory_csv.hpp"
