#pragma once

#include "cloudmatch/geometry.hpp"
#include "cloudmatch/kdtree.hpp"
#include "cloudmatch/normals.hpp"
#include "cloudmatch/metric.hpp"
#include "cloudmatch/registration.hpp"
#include "cloudmatch/eval.hpp"
#include "cloudmatch/synth.hpp"
#include "cloudmatch/ply.hpp"
#include "cloudmatch/io.hpp"
#include "cloudmatch/random.hpp"
