#pragma once

#include "hypam/brownian.hpp"
#include "hypam/config.hpp"
#include "hypam/covariance.hpp"
#include "hypam/errors.hpp"
#include "hypam/geometry.hpp"
#include "hypam/heatkernel.hpp"
#include "hypam/io.hpp"
#include "hypam/moments.hpp"
#include "hypam/parallel.hpp"
#include "hypam/rng.hpp"
#include "hypam/runner.hpp"
#include "hypam/stats.hpp"
#include "hypam/validation.hpp"
