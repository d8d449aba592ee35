#pragma once

#include "malm/catalog.hpp"
#include "malm/error.hpp"
#include "malm/inner.hpp"
#include "malm/linalg.hpp"
#include "malm/oracle.hpp"
#include "malm/outer.hpp"
#include "malm/problem.hpp"
#include "malm/trace_io.hpp"
