#pragma once

#include "rateabs/builders.hpp"
#include "rateabs/counterexample.hpp"
#include "rateabs/document.hpp"
#include "rateabs/error.hpp"
#include "rateabs/matrix.hpp"
#include "rateabs/mk_analysis.hpp"
#include "rateabs/model.hpp"
#include "rateabs/nominal.hpp"
#include "rateabs/numerics.hpp"
#include "rateabs/scheduler.hpp"
#include "rateabs/sequences.hpp"
#include "rateabs/simulation.hpp"
