#pragma once

#include "pinch/config.hpp"
#include "pinch/contact.hpp"
#include "pinch/controller.hpp"
#include "pinch/diagnostics.hpp"
#include "pinch/dynamics.hpp"
#include "pinch/errors.hpp"
#include "pinch/kinematics.hpp"
#include "pinch/scenario.hpp"
#include "pinch/sensor.hpp"
#include "pinch/shapes.hpp"
#include "pinch/spatial.hpp"
