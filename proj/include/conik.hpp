#pragma once

// Umbrella header: the whole library in dependency order.

#include "conik/problem.hpp"
#include "conik/sparse.hpp"
#include "conik/cones.hpp"
#include "conik/scaling.hpp"
#include "conik/ldl.hpp"
#include "conik/graph.hpp"
#include "conik/merge.hpp"
#include "conik/decompose.hpp"
#include "conik/solver.hpp"
#include "conik/solve.hpp"
#include "conik/io.hpp"
#include "conik/generators.hpp"
#include "conik/bench.hpp"
