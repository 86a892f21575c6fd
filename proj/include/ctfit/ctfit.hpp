#pragma once

#include "error.hpp"
#include "matrix.hpp"
#include "table.hpp"
#include "special.hpp"
#include "independence.hpp"
#include "factorize.hpp"
#include "distributions.hpp"
#include "gof.hpp"
#include "quadrature.hpp"
#include "mixture.hpp"
#include "pipeline.hpp"
