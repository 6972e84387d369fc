#pragma once

#include "hairlang/common.hpp"
#include "hairlang/hairmodel.hpp"
#include "hairlang/spectral.hpp"
#include "hairlang/kmeans.hpp"
#include "hairlang/guides.hpp"
#include "hairlang/quantize.hpp"
#include "hairlang/strandlang.hpp"
#include "hairlang/transformer.hpp"
#include "hairlang/armodel.hpp"
#include "hairlang/synthgen.hpp"
#include "hairlang/dense.hpp"
#include "hairlang/profile.hpp"
