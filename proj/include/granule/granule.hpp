#pragma once

#include "granule/core.hpp"
#include "granule/rdgbg.hpp"
#include "granule/gbabs.hpp"
#include "granule/harness.hpp"
#include "granule/eval.hpp"
#include "granule/io.hpp"
