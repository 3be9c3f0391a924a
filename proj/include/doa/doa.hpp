#pragma once

// Everything except the I/O layer (doa/io.hpp), which also needs nlohmann/json.

#include "doa/array_model.hpp"
#include "doa/classical.hpp"
#include "doa/error.hpp"
#include "doa/estimators.hpp"
#include "doa/eval.hpp"
#include "doa/ml.hpp"
#include "doa/numerics.hpp"
#include "doa/peaks.hpp"
#include "doa/simulate.hpp"
#include "doa/sparse.hpp"
#include "doa/subspace.hpp"
