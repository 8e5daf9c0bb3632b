#pragma once

#include "tensorlite/nn/functional.hpp"
#include "tensorlite/nn/layers.hpp"
