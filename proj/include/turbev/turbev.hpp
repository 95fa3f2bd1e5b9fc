#pragma once

#include "turbev/core.hpp"
#include "turbev/epaw.hpp"
#include "turbev/error.hpp"
#include "turbev/ettube.hpp"
#include "turbev/evsynth.hpp"
#include "turbev/fixture.hpp"
#include "turbev/grid.hpp"
#include "turbev/imgproc.hpp"
#include "turbev/io.hpp"
#include "turbev/metrics.hpp"
#include "turbev/paep.hpp"
#include "turbev/parallel.hpp"
#include "turbev/restore.hpp"
#include "turbev/turbsim.hpp"
