#pragma once

#include "leashed/data.hpp"
#include "leashed/dynamics.hpp"
#include "leashed/harness.hpp"
#include "leashed/nn.hpp"
#include "leashed/optimizers.hpp"
#include "leashed/param_vector.hpp"
#include "leashed/stress.hpp"
