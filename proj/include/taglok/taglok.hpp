#pragma once

#include "taglok/camsim.hpp"
#include "taglok/config.hpp"
#include "taglok/geometry.hpp"
#include "taglok/harness.hpp"
#include "taglok/pipeline.hpp"
#include "taglok/tagmap.hpp"
