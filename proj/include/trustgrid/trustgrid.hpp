#pragma once

// Umbrella header. report.hpp is left out because it pulls in nlohmann/json.

#include "baselines.hpp"
#include "core.hpp"
#include "eval.hpp"
#include "ingest.hpp"
#include "propagation.hpp"
#include "random.hpp"
#include "recommender.hpp"
#include "snapshot.hpp"
