#pragma once

#include "nlos/error.hpp"
#include "nlos/parallel.hpp"
#include "nlos/geometry.hpp"
#include "nlos/galvo.hpp"
#include "nlos/patterns.hpp"
#include "nlos/jitter.hpp"
#include "nlos/volume.hpp"
#include "nlos/transient.hpp"
#include "nlos/simulator.hpp"
#include "nlos/optim.hpp"
#include "nlos/calibration.hpp"
#include "nlos/enhancement.hpp"
#include "nlos/reconstruction.hpp"
#include "nlos/io.hpp"
