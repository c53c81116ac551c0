#pragma once

#include "errors.hpp"
#include "se3.hpp"
#include "sphere_grid.hpp"
#include "field.hpp"
#include "fd_operators.hpp"
#include "diffusion.hpp"
#include "morphology.hpp"
#include "kernels.hpp"
#include "pseudo_linear.hpp"
#include "geodesics.hpp"
#include "monte_carlo.hpp"
