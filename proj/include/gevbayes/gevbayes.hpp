#pragma once

// Umbrella header.

#include "appendix.hpp"
#include "diagnostics.hpp"
#include "estimation.hpp"
#include "evidence.hpp"
#include "gev.hpp"
#include "io.hpp"
#include "likelihood.hpp"
#include "mcmc.hpp"
#include "numerics.hpp"
#include "posterior_normal.hpp"
#include "priors.hpp"
#include "quadrature.hpp"
#include "rng.hpp"
#include "specfun.hpp"
