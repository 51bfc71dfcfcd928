#pragma once

// Umbrella header. The HTTP transport lives in steerconf/http_transport.hpp
// and is not included here; only the CLI needs httplib.

#include "steerconf/aggregate.hpp"
#include "steerconf/backend.hpp"
#include "steerconf/baselines.hpp"
#include "steerconf/datasets.hpp"
#include "steerconf/error.hpp"
#include "steerconf/log.hpp"
#include "steerconf/metrics.hpp"
#include "steerconf/parse.hpp"
#include "steerconf/pipeline.hpp"
#include "steerconf/prompts.hpp"
#include "steerconf/sha256.hpp"
#include "steerconf/simulator.hpp"
