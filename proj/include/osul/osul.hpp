#pragma once

// Convenience header pulling in the whole library.

#include "osul/error.hpp"
#include "osul/matrix.hpp"
#include "osul/linalg.hpp"
#include "osul/optimize.hpp"
#include "osul/splinebasis.hpp"
#include "osul/penalty.hpp"
#include "osul/fit.hpp"
#include "osul/mixed.hpp"
#include "osul/study.hpp"
#include "osul/csv.hpp"
#include "osul/cli.hpp"
