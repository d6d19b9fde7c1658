#pragma once

#include "morticast/array3.hpp"
#include "morticast/blend.hpp"
#include "morticast/config.hpp"
#include "morticast/csv.hpp"
#include "morticast/diagnostics.hpp"
#include "morticast/error.hpp"
#include "morticast/harness.hpp"
#include "morticast/hmd_ingest.hpp"
#include "morticast/improvement.hpp"
#include "morticast/leecarter.hpp"
#include "morticast/lifetable.hpp"
#include "morticast/model_linear.hpp"
#include "morticast/model_loglog.hpp"
#include "morticast/rho_forecast.hpp"
#include "morticast/sampler.hpp"
