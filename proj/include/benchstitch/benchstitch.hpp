#pragma once

#include "benchstitch/algoprog.hpp"
#include "benchstitch/csv.hpp"
#include "benchstitch/dataset.hpp"
#include "benchstitch/dates.hpp"
#include "benchstitch/error.hpp"
#include "benchstitch/rng.hpp"
#include "benchstitch/robustness.hpp"
#include "benchstitch/stats.hpp"
#include "benchstitch/stitch.hpp"
#include "benchstitch/synthlab.hpp"
#include "benchstitch/trends.hpp"
