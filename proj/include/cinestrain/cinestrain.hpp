#pragma once

// Umbrella header: dense groupwise motion estimation for cine image
// sequences with a locally low-rank dissimilarity, plus strain derivation,
// baselines, an analytic phantom, and evaluation metrics.

#include "cinestrain/bspline.hpp"
#include "cinestrain/common.hpp"
#include "cinestrain/cost.hpp"
#include "cinestrain/fields.hpp"
#include "cinestrain/image.hpp"
#include "cinestrain/io.hpp"
#include "cinestrain/metrics.hpp"
#include "cinestrain/phantom.hpp"
#include "cinestrain/solver.hpp"
#include "cinestrain/strain.hpp"
