#pragma once

#include "tou/errors.hpp"
#include "tou/numerics.hpp"
#include "tou/demand.hpp"
#include "tou/aggregation.hpp"
#include "tou/market.hpp"
#include "tou/welfare.hpp"
#include "tou/extensions.hpp"
#include "tou/oracle.hpp"
#include "tou/io.hpp"
#include "tou/verify.hpp"
