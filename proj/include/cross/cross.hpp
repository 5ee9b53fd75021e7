#pragma once

// Umbrella header for the Cross tensor measurement and completion library.

#include "cross/completion.hpp"
#include "cross/experiment.hpp"
#include "cross/generators.hpp"
#include "cross/io.hpp"
#include "cross/linalg.hpp"
#include "cross/metrics.hpp"
#include "cross/rng.hpp"
#include "cross/scheme.hpp"
#include "cross/tensor.hpp"
#include "cross/tucker.hpp"
