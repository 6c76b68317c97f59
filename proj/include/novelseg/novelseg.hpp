#pragma once

#include "novelseg/attention.hpp"
#include "novelseg/contour.hpp"
#include "novelseg/crf.hpp"
#include "novelseg/curation.hpp"
#include "novelseg/error.hpp"
#include "novelseg/eval.hpp"
#include "novelseg/manifest.hpp"
#include "novelseg/mixing.hpp"
#include "novelseg/morphology.hpp"
#include "novelseg/pfm_io.hpp"
#include "novelseg/pipeline.hpp"
#include "novelseg/png_io.hpp"
#include "novelseg/promptgen.hpp"
#include "novelseg/random.hpp"
#include "novelseg/raster.hpp"
