#pragma once

#include "sqda/core.hpp"
#include "sqda/solver.hpp"
#include "sqda/classify.hpp"
#include "sqda/estimate.hpp"
#include "sqda/multigroup.hpp"
#include "sqda/copula.hpp"
#include "sqda/datagen.hpp"
#include "sqda/experiment.hpp"
#include "sqda/io.hpp"
