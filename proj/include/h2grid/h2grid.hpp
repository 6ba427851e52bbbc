#pragma once

#include "h2grid/errors.hpp"
#include "h2grid/control.hpp"
#include "h2grid/network.hpp"
#include "h2grid/plant.hpp"
#include "h2grid/simulation.hpp"
#include "h2grid/config.hpp"
#include "h2grid/output.hpp"
