#pragma once

#include <adaptrial/adaptive_engine.hpp>
#include <adaptrial/analysis.hpp>
#include <adaptrial/comparators.hpp>
#include <adaptrial/datagen.hpp>
#include <adaptrial/error.hpp>
#include <adaptrial/estimation.hpp>
#include <adaptrial/rng.hpp>
#include <adaptrial/sim_harness.hpp>
#include <adaptrial/stat_kernel.hpp>
#include <adaptrial/trial_model.hpp>
