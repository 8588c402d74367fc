#pragma once

#include "frd/chebyshev.hpp"
#include "frd/config.hpp"
#include "frd/error.hpp"
#include "frd/fft.hpp"
#include "frd/graph.hpp"
#include "frd/io.hpp"
#include "frd/lattice.hpp"
#include "frd/mollifier.hpp"
#include "frd/parallel.hpp"
#include "frd/quadrature.hpp"
#include "frd/sampler.hpp"
#include "frd/scales.hpp"
#include "frd/spectral_weights.hpp"
