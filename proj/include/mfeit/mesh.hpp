#pragma once

#include <array>
#include <vector>

#include "mfeit/geometry.hpp"

namespace mfeit {

/// How thin insulators are represented in the triangulation.
enum class InterfaceModel {
  kZeroThickness,  // slit along the centerline with duplicated nodes
  kResolved,       // strip of width 2 delta filled with insulator elements
};

enum class Region { kBackground, kInsulator, kDisk };

struct MeshOptions {
  InterfaceModel model = InterfaceModel::kZeroThickness;
  /// First layer thickness next to a strip face (or the slit). Zero means
  /// half_thickness / 2 of the segment being meshed.
  double first_layer = 0.0;
  /// Pixels per side of the square image grid covering the domain.
  int pixels = 32;
  /// Minimum number of vertices on each disk boundary polygon.
  int disk_ring_points = 32;
};

/// A node duplicated across a zero-thickness insulator.
struct CrackPair {
  int node_minus;
  int node_plus;
  int segment_id;
  double s;  // arclength from p
};

/// Structured patch of nodes around one segment, in local (s, t) coordinates.
/// node[i][j] is the node at (s[i], t[j]). Rows and columns are element edges.
struct SegmentLattice {
  int segment_id = 0;
  std::vector<double> s;
  std::vector<double> t;
  std::vector<std::vector<int>> node;
  int col_tip_p = 0;  // column holding the tip at s = 0
  int col_tip_q = 0;  // column holding the tip at s = L
  int row_center = -1;  // t = 0 row (zero-thickness model)
  int row_minus = -1;   // t = -delta (resolved) or t = 0 (zero-thickness)
  int row_plus = -1;    // t = +delta (resolved) or t = 0 (zero-thickness)
  /// Plus-side copy for each column of the center row, -1 when not duplicated.
  std::vector<int> plus_copy;

  /// Node index on the plus face (the duplicate when one exists).
  int plus_face_node(int col) const;
  int minus_face_node(int col) const { return node[col][row_minus]; }
};

/// Square grid of pixels over [-R, R]^2; a pixel is active when it owns at
/// least one triangle centroid.
struct Pixelation {
  int n = 32;
  double domain_radius = 1.0;
  std::vector<int> active;  // pixel ids iy * n + ix, ascending

  double width() const { return 2.0 * domain_radius / n; }
  Vec2 center(int pixel_id) const;
  int pixel_of(const Vec2& x) const;
};

struct Mesh {
  std::vector<Vec2> nodes;
  std::vector<std::array<int, 3>> triangles;
  std::vector<Region> region;        // per triangle
  std::vector<int> region_index;     // inclusion index, -1 for background
  std::vector<CrackPair> crack_pairs;
  std::vector<int> boundary_nodes;   // counterclockwise, first at angle 0
  std::vector<std::array<int, 2>> boundary_edges;
  std::vector<SegmentLattice> lattices;
  Pixelation pixels;
  std::vector<int> pixel_map;        // per triangle, pixel id
  InterfaceModel model = InterfaceModel::kZeroThickness;
  double h = 0.0;
  double domain_radius = 1.0;

  double triangle_area(int t) const;
  double total_area() const;
  /// Area of the boundary polygon.
  double polygon_area() const;
};

/// Crack-conforming triangulation of the phantom with target edge length h.
/// Throws InvalidInput unless 0 < h < R/4 and MeshFailure when the result
/// fails the quality checks.
Mesh mesh_domain(const Phantom& phantom, double h, const MeshOptions& options = {});

/// Number of element edges on the shortest path between two nodes that
/// avoids the excluded nodes, or -1 when no such path exists.
int graph_distance(const Mesh& mesh, int a, int b, const std::vector<int>& excluded = {});

}  // namespace mfeit
