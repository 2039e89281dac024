// Copyright 2026 the lnmc contributors. Licensed under the Apache License,
// Version 2.0. See the LICENSE file at the root of this distribution or at
// http://www.apache.org/licenses/LICENSE-2.0
#pragma once

// Umbrella header for the whole library.
#include "lnmc/checker.hpp"
#include "lnmc/trace_io.hpp"
