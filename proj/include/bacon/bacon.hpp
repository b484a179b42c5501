#pragma once

// Everything at once. Individual headers are self-contained.
#include "bacon/analysis.hpp"
#include "bacon/bench.hpp"
#include "bacon/checkpoint.hpp"
#include "bacon/config.hpp"
#include "bacon/csv.hpp"
#include "bacon/errors.hpp"
#include "bacon/extraction.hpp"
#include "bacon/fft.hpp"
#include "bacon/image.hpp"
#include "bacon/image_io.hpp"
#include "bacon/mesh.hpp"
#include "bacon/network.hpp"
#include "bacon/parallel.hpp"
#include "bacon/rng.hpp"
#include "bacon/runtime.hpp"
#include "bacon/sdf.hpp"
#include "bacon/spatial.hpp"
#include "bacon/spectral.hpp"
#include "bacon/training.hpp"
