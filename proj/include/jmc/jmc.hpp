#pragma once

// Umbrella header: the full relaxation toolkit in dependency order.

#include "jmc/common.hpp"
#include "jmc/interval.hpp"
#include "jmc/expr.hpp"
#include "jmc/special.hpp"
#include "jmc/dist.hpp"
#include "jmc/quadrature.hpp"
#include "jmc/mccormick.hpp"
#include "jmc/partition.hpp"
#include "jmc/oracle.hpp"
#include "jmc/rvtransform.hpp"
#include "jmc/evrelax.hpp"
#include "jmc/config.hpp"
#include "jmc/experiments.hpp"
