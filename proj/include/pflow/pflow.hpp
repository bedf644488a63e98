#pragma once

// Umbrella header for the principal-flow library.

#include "pflow/analytic_fields.hpp"
#include "pflow/checkpoint.hpp"
#include "pflow/common.hpp"
#include "pflow/data.hpp"
#include "pflow/field.hpp"
#include "pflow/ftle.hpp"
#include "pflow/integrate.hpp"
#include "pflow/loss.hpp"
#include "pflow/mlp.hpp"
#include "pflow/prc.hpp"
#include "pflow/train.hpp"
