#ifndef CDPK_CDPK_HPP
#define CDPK_CDPK_HPP

#include "cdpk/baseline.hpp"
#include "cdpk/boosting.hpp"
#include "cdpk/core.hpp"
#include "cdpk/decomposition.hpp"
#include "cdpk/dp_counting.hpp"
#include "cdpk/greedy.hpp"
#include "cdpk/high_dim.hpp"
#include "cdpk/low_dim.hpp"
#include "cdpk/nets.hpp"
#include "cdpk/runner.hpp"

#endif  // CDPK_CDPK_HPP
