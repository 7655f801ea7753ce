#pragma once

#include "losscarto/activation.hpp"
#include "losscarto/architecture.hpp"
#include "losscarto/attack.hpp"
#include "losscarto/errors.hpp"
#include "losscarto/hyperplane.hpp"
#include "losscarto/kinks.hpp"
#include "losscarto/network.hpp"
#include "losscarto/oracle.hpp"
#include "losscarto/poly.hpp"
#include "losscarto/random.hpp"
#include "losscarto/rational.hpp"
#include "losscarto/regionfit.hpp"
#include "losscarto/surface.hpp"
#include "losscarto/virtual.hpp"
