#pragma once

#include "mfglab/coefficients.hpp"
#include "mfglab/convexcost.hpp"
#include "mfglab/error.hpp"
#include "mfglab/fp.hpp"
#include "mfglab/grid.hpp"
#include "mfglab/hamiltonian.hpp"
#include "mfglab/hjb.hpp"
#include "mfglab/kernel_oracle.hpp"
#include "mfglab/mfg.hpp"
#include "mfglab/parallel.hpp"
#include "mfglab/particles.hpp"
#include "mfglab/tridiagonal.hpp"
