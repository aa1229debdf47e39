#pragma once

#include <vector>

#include "monocuboid/pose.hpp"

namespace monocuboid {

// Planar convex polygon in 3D, vertices in cyclic order.
using Polygon3 = std::vector<Vec3>;

// Convex polyhedron stored as its face polygons.
struct ConvexPolyhedron {
  std::vector<Polygon3> faces;

  double volume() const;
  bool empty() const { return faces.empty(); }
};

ConvexPolyhedron box_polyhedron(const CuboidPose& pose);

// Keeps the part of poly with n.x <= offset. The cut face is added as a new
// polygon.
ConvexPolyhedron clip(const ConvexPolyhedron& poly, const Vec3& n, double offset);

double box_volume(const CuboidPose& pose);

// Exact intersection volume of two oriented boxes.
double intersection_volume(const CuboidPose& a, const CuboidPose& b);

// Oriented 3D intersection-over-union. Throws InvalidInput when either box
// has near-zero volume.
double iou3d(const CuboidPose& a, const CuboidPose& b);

}  // namespace monocuboid
