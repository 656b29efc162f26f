#include "delaunay.hpp"

#include <algorithm>
#include <deque>
#include <numeric>
#include <unordered_map>

#include "mfeit/errors.hpp"
#include "predicates.hpp"

namespace mfeit::detail {

namespace {

// Hilbert curve index of (x, y) on a 2^16 x 2^16 grid.
std::uint64_t hilbert_index(std::uint32_t x, std::uint32_t y) {
  std::uint64_t d = 0;
  for (std::uint32_t s = 1u << 15; s > 0; s >>= 1) {
    const std::uint32_t rx = (x & s) ? 1 : 0;
    const std::uint32_t ry = (y & s) ? 1 : 0;
    d += static_cast<std::uint64_t>(s) * s * ((3 * rx) ^ ry);
    if (ry == 0) {
      if (rx == 1) {
        x = s - 1 - x;
        y = s - 1 - y;
      }
      std::swap(x, y);
    }
  }
  return d;
}

inline int next(int i) { return i == 2 ? 0 : i + 1; }
inline int prev(int i) { return i == 0 ? 2 : i - 1; }

}  // namespace

Triangulator::Triangulator(std::vector<Vec2> points) : pts_(std::move(points)) {
  n_real_ = static_cast<int>(pts_.size());
  if (n_real_ < 3) throw Error(ErrorCode::kMeshFailure, "need at least three points");

  Vec2 lo = pts_[0], hi = pts_[0];
  for (const auto& p : pts_) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const Vec2 mid = 0.5 * (lo + hi);
  const double span = std::max((hi - lo).maxCoeff(), 1e-12);
  pts_.push_back(mid + Vec2(-40.0 * span, -30.0 * span));
  pts_.push_back(mid + Vec2(40.0 * span, -30.0 * span));
  pts_.push_back(mid + Vec2(0.0, 50.0 * span));
  vert_tri_.assign(pts_.size(), -1);

  Tri super;
  super.v = {n_real_, n_real_ + 1, n_real_ + 2};
  tris_.push_back(super);
  for (int k = 0; k < 3; ++k) vert_tri_[n_real_ + k] = 0;

  std::vector<std::pair<std::uint64_t, int>> order(n_real_);
  for (int i = 0; i < n_real_; ++i) {
    const Vec2 u = (pts_[i] - lo) / span;
    const auto gx = static_cast<std::uint32_t>(std::clamp(u.x(), 0.0, 1.0) * 65535.0);
    const auto gy = static_cast<std::uint32_t>(std::clamp(u.y(), 0.0, 1.0) * 65535.0);
    order[i] = {hilbert_index(gx, gy), i};
  }
  std::sort(order.begin(), order.end());
  for (const auto& [key, i] : order) insert_point(i);
}

std::uint64_t Triangulator::edge_key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

bool Triangulator::is_constrained(int a, int b) const {
  return constrained_.count(edge_key(a, b)) != 0;
}

int Triangulator::locate(int p) {
  int t = last_;
  if (t < 0 || t >= static_cast<int>(tris_.size()) || !tris_[t].alive) {
    t = 0;
    while (!tris_[t].alive) ++t;
  }
  const Vec2& x = pts_[p];
  int start = 0;
  for (std::size_t steps = 0; steps < 4 * tris_.size() + 100; ++steps) {
    const Tri& tri = tris_[t];
    bool moved = false;
    for (int k = 0; k < 3; ++k) {
      const int i = (start + k) % 3;
      const int a = tri.v[next(i)], b = tri.v[prev(i)];
      if (orient2d(pts_[a], pts_[b], x) < 0) {
        t = tri.n[i];
        moved = true;
        break;
      }
    }
    if (!moved) return t;
    start = (start + 1) % 3;
    if (t < 0) throw Error(ErrorCode::kMeshFailure, "point location left the hull");
  }
  throw Error(ErrorCode::kMeshFailure, "point location did not terminate");
}

void Triangulator::set_neighbor(int t, int old_nb, int new_nb) {
  if (t < 0) return;
  for (int k = 0; k < 3; ++k) {
    if (tris_[t].n[k] == old_nb) {
      tris_[t].n[k] = new_nb;
      return;
    }
  }
}

void Triangulator::insert_point(int p) {
  const int t0 = locate(p);
  const Vec2& x = pts_[p];
  for (int k = 0; k < 3; ++k) {
    if (pts_[tris_[t0].v[k]] == x) {
      throw Error(ErrorCode::kMeshFailure, "duplicate mesh point");
    }
  }

  std::vector<int> cavity{t0};
  std::unordered_map<int, bool> seen{{t0, true}};
  struct BoundaryEdge {
    int a, b, outside;
  };
  std::vector<BoundaryEdge> boundary;
  for (std::size_t c = 0; c < cavity.size(); ++c) {
    const int t = cavity[c];
    for (int i = 0; i < 3; ++i) {
      const int nb = tris_[t].n[i];
      const int a = tris_[t].v[next(i)], b = tris_[t].v[prev(i)];
      if (nb >= 0) {
        auto it = seen.find(nb);
        if (it != seen.end()) {
          if (it->second) continue;
        } else {
          const auto& v = tris_[nb].v;
          const bool inside = incircle(pts_[v[0]], pts_[v[1]], pts_[v[2]], x) > 0;
          seen[nb] = inside;
          if (inside) {
            cavity.push_back(nb);
            continue;
          }
        }
      }
      boundary.push_back({a, b, nb});
    }
  }

  for (int t : cavity) {
    tris_[t].alive = false;
    free_.push_back(t);
  }

  std::unordered_map<int, int> by_start, by_end;
  std::vector<int> created;
  created.reserve(boundary.size());
  for (const auto& e : boundary) {
    int id;
    if (!free_.empty()) {
      id = free_.back();
      free_.pop_back();
    } else {
      id = static_cast<int>(tris_.size());
      tris_.emplace_back();
    }
    Tri& tri = tris_[id];
    tri.v = {e.a, e.b, p};
    tri.n = {-1, -1, e.outside};
    tri.alive = true;
    created.push_back(id);
    by_start[e.a] = id;
    by_end[e.b] = id;
    if (e.outside >= 0) {
      // The outside triangle pointed at the cavity triangle that owned this
      // edge; repoint it by matching the shared edge.
      Tri& out = tris_[e.outside];
      for (int k = 0; k < 3; ++k) {
        if (out.v[next(k)] == e.b && out.v[prev(k)] == e.a) out.n[k] = id;
      }
    }
  }
  for (int id : created) {
    Tri& tri = tris_[id];
    tri.n[0] = by_start.at(tri.v[1]);  // across edge (b, p)
    tri.n[1] = by_end.at(tri.v[0]);    // across edge (p, a)
    vert_tri_[tri.v[0]] = id;
    vert_tri_[tri.v[1]] = id;
    vert_tri_[p] = id;
  }
  last_ = created.front();
}

std::pair<int, int> Triangulator::find_edge(int u, int v) const {
  const int start = vert_tri_[u];
  int t = start;
  for (std::size_t guard = 0; guard < tris_.size() + 4; ++guard) {
    const Tri& tri = tris_[t];
    int iu = 0;
    while (tri.v[iu] != u) ++iu;
    if (tri.v[next(iu)] == v) return {t, prev(iu)};
    // rotate clockwise around u: neighbor across edge (u, next(u))
    t = tri.n[prev(iu)];
    if (t < 0 || t == start) break;
  }
  return {-1, -1};
}

void Triangulator::flip(int t, int i) {
  Tri& tt = tris_[t];
  const int u = tt.n[i];
  Tri& uu = tris_[u];
  const int p0 = tt.v[i], p1 = tt.v[next(i)], p2 = tt.v[prev(i)];
  int j = 0;
  while (uu.n[j] != t) ++j;
  const int q = uu.v[j];
  const int A = tt.n[next(i)];   // across (p2, p0)
  const int B = tt.n[prev(i)];   // across (p0, p1)
  const int C = uu.n[next(j)];   // across (p1, q)
  const int D = uu.n[prev(j)];   // across (q, p2)

  tt.v = {p0, p1, q};
  tt.n = {C, u, B};
  uu.v = {q, p2, p0};
  uu.n = {A, t, D};
  set_neighbor(A, t, u);
  set_neighbor(C, u, t);
  vert_tri_[p0] = t;
  vert_tri_[p1] = t;
  vert_tri_[q] = u;
  vert_tri_[p2] = u;
}

void Triangulator::insert_constraint(int a, int b) {
  if (a == b) throw Error(ErrorCode::kMeshFailure, "degenerate constraint");
  constrained_.insert(edge_key(a, b));
  if (find_edge(a, b).first >= 0 || find_edge(b, a).first >= 0) return;

  const Vec2& pa = pts_[a];
  const Vec2& pb = pts_[b];

  // Collect edges crossed by the open segment ab.
  std::deque<std::pair<int, int>> crossing;
  {
    int t = vert_tri_[a];
    int found = -1;
    const int start = t;
    for (std::size_t guard = 0; guard < tris_.size() + 4; ++guard) {
      const Tri& tri = tris_[t];
      int ia = 0;
      while (tri.v[ia] != a) ++ia;
      const int u = tri.v[next(ia)], v = tri.v[prev(ia)];
      const int ou = orient2d(pa, pts_[u], pb);
      const int ov = orient2d(pa, pts_[v], pb);
      if ((ou == 0 && (pts_[u] - pa).dot(pb - pa) > 0) ||
          (ov == 0 && (pts_[v] - pa).dot(pb - pa) > 0)) {
        throw Error(ErrorCode::kMeshFailure, "vertex lies on a constraint edge");
      }
      if (ou > 0 && ov < 0) {
        found = t;
        break;
      }
      t = tri.n[prev(ia)];
      if (t < 0 || t == start) break;
    }
    if (found < 0) throw Error(ErrorCode::kMeshFailure, "constraint start not found");

    int t_cur = found;
    int ia = 0;
    while (tris_[t_cur].v[ia] != a) ++ia;
    int u = tris_[t_cur].v[next(ia)], v = tris_[t_cur].v[prev(ia)];
    for (std::size_t guard = 0; guard < tris_.size() + 4; ++guard) {
      crossing.emplace_back(u, v);
      // Triangle on the other side of (u, v).
      const auto [t_next, k] = find_edge(v, u);
      const int w = tris_[t_next].v[k];
      if (w == b) break;
      const int ow = orient2d(pa, pb, pts_[w]);
      if (ow == 0) throw Error(ErrorCode::kMeshFailure, "vertex lies on a constraint edge");
      // u is right of ab, v is left of ab.
      if (ow > 0) {
        v = w;
      } else {
        u = w;
      }
    }
  }

  std::size_t stall = 0;
  while (!crossing.empty()) {
    const auto [u, v] = crossing.front();
    crossing.pop_front();
    const auto [t, i] = find_edge(u, v);
    if (t < 0) continue;
    const int w1 = tris_[t].v[i];
    const int nb = tris_[t].n[i];
    int j = 0;
    while (tris_[nb].n[j] != t) ++j;
    const int w2 = tris_[nb].v[j];
    const bool convex = orient2d(pts_[w1], pts_[w2], pts_[u]) *
                            orient2d(pts_[w1], pts_[w2], pts_[v]) < 0;
    if (!convex) {
      crossing.emplace_back(u, v);
      if (++stall > 10 * (crossing.size() + 10)) {
        throw Error(ErrorCode::kMeshFailure, "constraint recovery stalled");
      }
      continue;
    }
    stall = 0;
    flip(t, i);
    if (w1 != a && w1 != b && w2 != a && w2 != b &&
        orient2d(pa, pb, pts_[w1]) * orient2d(pa, pb, pts_[w2]) < 0) {
      crossing.emplace_back(w1, w2);
    }
  }
  if (find_edge(a, b).first < 0 && find_edge(b, a).first < 0) {
    throw Error(ErrorCode::kMeshFailure, "constraint edge not recovered");
  }
}

void Triangulator::make_constrained_delaunay() {
  std::vector<std::pair<int, int>> stack;
  for (int t = 0; t < static_cast<int>(tris_.size()); ++t) {
    if (!tris_[t].alive) continue;
    for (int i = 0; i < 3; ++i) {
      const int a = tris_[t].v[next(i)], b = tris_[t].v[prev(i)];
      if (a < b) stack.emplace_back(a, b);
    }
  }
  std::size_t flips = 0;
  while (!stack.empty()) {
    const auto [a, b] = stack.back();
    stack.pop_back();
    if (is_constrained(a, b)) continue;
    auto [t, i] = find_edge(a, b);
    if (t < 0) {
      std::tie(t, i) = find_edge(b, a);
      if (t < 0) continue;
    }
    const int nb = tris_[t].n[i];
    if (nb < 0) continue;
    int j = 0;
    while (tris_[nb].n[j] != t) ++j;
    const int q = tris_[nb].v[j];
    const auto& v = tris_[t].v;
    if (incircle(pts_[v[0]], pts_[v[1]], pts_[v[2]], pts_[q]) <= 0) continue;
    const int p0 = v[i], p1 = v[next(i)], p2 = v[prev(i)];
    if (orient2d(pts_[p0], pts_[q], pts_[p1]) * orient2d(pts_[p0], pts_[q], pts_[p2]) >= 0) {
      continue;
    }
    flip(t, i);
    if (++flips > 50 * tris_.size()) {
      throw Error(ErrorCode::kMeshFailure, "Delaunay restoration did not converge");
    }
    stack.emplace_back(p0, p1);
    stack.emplace_back(p1, q);
    stack.emplace_back(q, p2);
    stack.emplace_back(p2, p0);
  }
}

std::vector<std::array<int, 3>> Triangulator::triangles() const {
  std::vector<std::array<int, 3>> out;
  for (const auto& t : tris_) {
    if (!t.alive) continue;
    if (t.v[0] >= n_real_ || t.v[1] >= n_real_ || t.v[2] >= n_real_) continue;
    out.push_back(t.v);
  }
  return out;
}

}  // namespace mfeit::detail
