#pragma once

#include "basket/borrowing.hpp"
#include "basket/comparators.hpp"
#include "basket/errors.hpp"
#include "basket/harness.hpp"
#include "basket/io.hpp"
#include "basket/joint_model.hpp"
#include "basket/mcmc.hpp"
#include "basket/proposed.hpp"
#include "basket/rng.hpp"
#include "basket/trial_data.hpp"
