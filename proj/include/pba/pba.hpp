#pragma once

#include "pba/bench.hpp"
#include "pba/errors.hpp"
#include "pba/eval.hpp"
#include "pba/geometry.hpp"
#include "pba/lm.hpp"
#include "pba/pl2pl.hpp"
#include "pba/problem.hpp"
#include "pba/reduction.hpp"
#include "pba/solver.hpp"
#include "pba/synth.hpp"
