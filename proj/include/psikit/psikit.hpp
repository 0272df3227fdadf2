#pragma once

#include "dataset.hpp"
#include "datagen.hpp"
#include "diagnostics.hpp"
#include "geometry.hpp"
#include "glyphs.hpp"
#include "io.hpp"
#include "model.hpp"
#include "parallel.hpp"
#include "raster.hpp"
#include "rng.hpp"
