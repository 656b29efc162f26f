#pragma once

#include <array>

#include "mfeit/mesh.hpp"

namespace mfeit::detail {

/// Area and constant gradients of the three P1 shape functions.
struct ElementGeometry {
  double area;
  std::array<Vec2, 3> grad;
};

inline ElementGeometry element_geometry(const Mesh& mesh, int t) {
  const auto& tri = mesh.triangles[t];
  const Vec2& a = mesh.nodes[tri[0]];
  const Vec2& b = mesh.nodes[tri[1]];
  const Vec2& c = mesh.nodes[tri[2]];
  const double twice = (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
  ElementGeometry g;
  g.area = 0.5 * twice;
  g.grad[0] = Vec2(b.y() - c.y(), c.x() - b.x()) / twice;
  g.grad[1] = Vec2(c.y() - a.y(), a.x() - c.x()) / twice;
  g.grad[2] = Vec2(a.y() - b.y(), b.x() - a.x()) / twice;
  return g;
}

}  // namespace mfeit::detail
