#pragma once

// Umbrella header: Fisher geometry of multivariate normals, end to end.

#include "mvngeo/errors.hpp"
#include "mvngeo/linalg.hpp"
#include "mvngeo/manifold.hpp"
#include "mvngeo/closed_form.hpp"
#include "mvngeo/paths.hpp"
#include "mvngeo/shooting.hpp"
#include "mvngeo/bench.hpp"
#include "mvngeo/json_io.hpp"
