#pragma once

#include "capex/errors.hpp"
#include "capex/grid.hpp"
#include "capex/model.hpp"
#include "capex/production.hpp"
#include "capex/validate.hpp"
#include "capex/random.hpp"
#include "capex/stats.hpp"
#include "capex/paths.hpp"
#include "capex/boundary.hpp"
#include "capex/policy.hpp"
#include "capex/verify.hpp"
