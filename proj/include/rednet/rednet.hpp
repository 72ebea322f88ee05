#pragma once

#include "rednet/adalasso.hpp"
#include "rednet/evaluation.hpp"
#include "rednet/io.hpp"
#include "rednet/linalg.hpp"
#include "rednet/parallel.hpp"
#include "rednet/pipeline.hpp"
#include "rednet/reparam.hpp"
#include "rednet/rng.hpp"
#include "rednet/screening.hpp"
#include "rednet/synthgen.hpp"
#include "rednet/types.hpp"
#include "rednet/version.hpp"
