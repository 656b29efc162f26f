#pragma once

#include <array>
#include <cstdint>
#include <unordered_set>
#include <vector>

#include "mfeit/admittivity.hpp"

namespace mfeit::detail {

/// Incremental Delaunay triangulation (Bowyer-Watson) with constraint-edge
/// recovery by flipping and a constrained-Delaunay cleanup pass.
class Triangulator {
 public:
  explicit Triangulator(std::vector<Vec2> points);

  /// Forces the edge (a, b) into the triangulation. No input vertex may lie
  /// in the open segment ab.
  void insert_constraint(int a, int b);

  /// Restores the Delaunay property for every unconstrained edge.
  void make_constrained_delaunay();

  /// Counterclockwise triangles over the input points only.
  std::vector<std::array<int, 3>> triangles() const;

 private:
  struct Tri {
    std::array<int, 3> v{};
    std::array<int, 3> n{-1, -1, -1};
    bool alive = true;
  };

  void insert_point(int p);
  int locate(int p);
  void flip(int t, int i);
  /// Triangle containing directed edge u->v and the local index opposite it.
  std::pair<int, int> find_edge(int u, int v) const;
  bool is_constrained(int a, int b) const;
  static std::uint64_t edge_key(int a, int b);
  void set_neighbor(int t, int old_nb, int new_nb);

  std::vector<Vec2> pts_;
  int n_real_ = 0;
  std::vector<Tri> tris_;
  std::vector<int> free_;
  std::vector<int> vert_tri_;
  std::unordered_set<std::uint64_t> constrained_;
  int last_ = 0;
};

}  // namespace mfeit::detail
