#pragma once

#include "pgdfl/combiners.hpp"
#include "pgdfl/config.hpp"
#include "pgdfl/convergence.hpp"
#include "pgdfl/csv.hpp"
#include "pgdfl/data.hpp"
#include "pgdfl/decision.hpp"
#include "pgdfl/errors.hpp"
#include "pgdfl/experiment.hpp"
#include "pgdfl/metrics.hpp"
#include "pgdfl/nn.hpp"
#include "pgdfl/rng.hpp"
#include "pgdfl/spectrum.hpp"
#include "pgdfl/tasks.hpp"
