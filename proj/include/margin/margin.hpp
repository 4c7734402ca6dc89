#pragma once

// Umbrella header: pulls in the whole library.

#include "margin/attack.hpp"
#include "margin/baselines.hpp"
#include "margin/classifier.hpp"
#include "margin/config.hpp"
#include "margin/constraint.hpp"
#include "margin/data.hpp"
#include "margin/dense_net.hpp"
#include "margin/errors.hpp"
#include "margin/experiment.hpp"
#include "margin/finite_diff.hpp"
#include "margin/norms.hpp"
#include "margin/report.hpp"
#include "margin/rng.hpp"
#include "margin/train.hpp"
#include "margin/vec.hpp"
