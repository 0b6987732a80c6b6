#pragma once

#include "rtsim/error.hpp"
#include "rtsim/geometry/types.hpp"
#include "rtsim/geometry/kdtree.hpp"
#include "rtsim/geometry/ply.hpp"
#include "rtsim/geometry/shapes.hpp"
#include "rtsim/scan/camera.hpp"
#include "rtsim/scan/render.hpp"
#include "rtsim/scan/unproject.hpp"
#include "rtsim/scan/calibrate.hpp"
#include "rtsim/scan/io.hpp"
#include "rtsim/scan/phantoms.hpp"
#include "rtsim/surface/volume.hpp"
#include "rtsim/surface/marching_cubes.hpp"
#include "rtsim/surface/normals.hpp"
#include "rtsim/surface/reconstruct.hpp"
#include "rtsim/surface/decimate.hpp"
#include "rtsim/surface/quality.hpp"
#include "rtsim/machine/state.hpp"
#include "rtsim/machine/geometry.hpp"
#include "rtsim/machine/kinematics.hpp"
#include "rtsim/collide/bvh.hpp"
#include "rtsim/collide/triangle.hpp"
#include "rtsim/collide/collide.hpp"
#include "rtsim/evalkit/metrics.hpp"
#include "rtsim/evalkit/budget.hpp"
#include "rtsim/evalkit/flat_surface.hpp"
#include "rtsim/evalkit/scenarios.hpp"
#include "rtsim/service/x3d.hpp"
#include "rtsim/service/pipeline.hpp"
#include "rtsim/service/scene.hpp"
#include "rtsim/service/server.hpp"
