#pragma once

// Umbrella header pulling in the whole library.

#include "turbforward/analysis.hpp"
#include "turbforward/config.hpp"
#include "turbforward/core.hpp"
#include "turbforward/fft.hpp"
#include "turbforward/image_io.hpp"
#include "turbforward/matrix.hpp"
#include "turbforward/operators.hpp"
#include "turbforward/psf.hpp"
#include "turbforward/pupil.hpp"
#include "turbforward/rng.hpp"
#include "turbforward/runner.hpp"
#include "turbforward/turbulence.hpp"
#include "turbforward/version.hpp"
#include "turbforward/zernike.hpp"
