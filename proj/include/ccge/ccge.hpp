#pragma once

#include "ccge/errors.hpp"
#include "ccge/model.hpp"
#include "ccge/cells.hpp"
#include "ccge/retrolik.hpp"
#include "ccge/optim.hpp"
#include "ccge/parallel.hpp"
#include "ccge/logistic.hpp"
#include "ccge/estimators.hpp"
#include "ccge/simgen.hpp"
#include "ccge/diagnostics.hpp"
#include "ccge/io.hpp"
