#pragma once

#include "coinfer/diffusion.hpp"
#include "coinfer/error.hpp"
#include "coinfer/estimators.hpp"
#include "coinfer/graph.hpp"
#include "coinfer/interface_laws.hpp"
#include "coinfer/metrics.hpp"
#include "coinfer/models.hpp"
#include "coinfer/numerics.hpp"
#include "coinfer/schedules.hpp"
#include "coinfer/sindy.hpp"
#include "coinfer/testbeds.hpp"
