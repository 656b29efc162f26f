#include "mfeit/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>

#include "delaunay.hpp"
#include "mfeit/errors.hpp"

namespace mfeit {

namespace {

constexpr double kPi = std::numbers::pi;
// Lipschitz constant of the target size field.
constexpr double kGrading = 0.4;

// Column spacing along a segment as a function of the distance d to the
// nearest tip: hs/4 at the tip, rising linearly to hs at d = ell.
struct ColumnGrading {
  double hs;
  double ell;

  double spacing(double d) const {
    return hs * (0.25 + 0.75 * std::min(1.0, d / ell));
  }
  // Number of spacings between the tip and distance d.
  double count(double d) const {
    const double a = std::min(d, ell);
    double c = 4.0 * ell / (3.0 * hs) * std::log1p(3.0 * a / ell);
    if (d > ell) c += (d - ell) / hs;
    return c;
  }
};

// Positions 0 = d_0 < ... < d_N = half with equal increments of count().
std::vector<double> graded_half(const ColumnGrading& g, double half) {
  const double total = g.count(half);
  const int n = std::max(2, static_cast<int>(std::lround(total)));
  std::vector<double> d(n + 1, 0.0);
  for (int i = 1; i < n; ++i) {
    const double target = total * i / n;
    double lo = 0.0, hi = half;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * half; ++it) {
      const double mid = 0.5 * (lo + hi);
      (g.count(mid) < target ? lo : hi) = mid;
    }
    d[i] = 0.5 * (lo + hi);
  }
  d[n] = half;
  return d;
}

struct LatticePlan {
  int segment = 0;
  Vec2 origin, tau, nu;
  double length = 0.0;
  double delta = 0.0;
  ColumnGrading grading{};
  std::vector<double> s, t;
  int col_p = 0, col_q = 0;
  double s_lo = 0.0, s_hi = 0.0, height = 0.0;

  Vec2 local(const Vec2& x) const {
    const Vec2 d = x - origin;
    return {d.dot(tau), d.dot(nu)};
  }
  Vec2 global(double s_, double t_) const { return origin + s_ * tau + t_ * nu; }
  double spacing_at(double s_) const {
    const double sc = std::clamp(s_, 0.0, length);
    return grading.spacing(std::min(sc, length - sc));
  }
};

LatticePlan plan_lattice(const Phantom& ph, int k, double h, const MeshOptions& opt) {
  const ThinInsulator& seg = ph.insulators[k];
  LatticePlan lp;
  lp.segment = k;
  lp.origin = seg.p;
  lp.tau = seg.tangent();
  lp.nu = seg.normal();
  lp.length = seg.length();
  lp.delta = seg.half_thickness;
  const double hs = std::min(h, lp.length / 10.0);
  lp.grading = {hs, lp.length / 4.0};
  const double tip = hs / 4.0;
  const double cap = clearance(ph, {InclusionKind::kInsulator, k}) / 4.0;

  // Columns: two extension columns past each tip, graded interior.
  double e1 = tip, e2 = 2.5 * tip;
  if (e2 > cap) {
    e1 *= cap / e2;
    e2 = cap;
  }
  const auto half = graded_half(lp.grading, lp.length / 2.0);
  lp.s = {-e2, -e1};
  for (double d : half) lp.s.push_back(d);
  for (int i = static_cast<int>(half.size()) - 2; i >= 0; --i) {
    lp.s.push_back(lp.length - half[i]);
  }
  lp.s.push_back(lp.length + e1);
  lp.s.push_back(lp.length + e2);
  lp.col_p = 2;
  lp.col_q = static_cast<int>(lp.s.size()) - 3;
  lp.s_lo = -e2;
  lp.s_hi = lp.length + e2;

  // Rows: geometric layers away from each face (or from the slit).
  const bool resolved = opt.model == InterfaceModel::kResolved;
  const double face = resolved ? lp.delta : 0.0;
  const double first = opt.first_layer > 0.0 ? opt.first_layer : lp.delta / 2.0;
  const double room = cap - face;
  if (!(room > first)) {
    throw Error(ErrorCode::kMeshFailure, "no room for the layers around " +
                                             InclusionRef{InclusionKind::kInsulator, k}.label());
  }
  std::vector<double> offsets{0.0};
  double layer = first;
  while (true) {
    const double next = offsets.back() + layer;
    if (next > room) break;
    offsets.push_back(next);
    if (layer >= tip) break;
    layer = std::min(1.5 * layer, tip);
  }
  std::vector<double> upper;
  if (resolved) {
    upper = {0.0, 0.5 * lp.delta};
    for (double o : offsets) upper.push_back(lp.delta + o);
  } else {
    upper = offsets;
  }
  for (int i = static_cast<int>(upper.size()) - 1; i > 0; --i) lp.t.push_back(-upper[i]);
  for (double u : upper) lp.t.push_back(u);
  lp.height = upper.back();
  return lp;
}

bool inside_convex_ring(const std::vector<Vec2>& ring, const Vec2& center, const Vec2& x) {
  const int n = static_cast<int>(ring.size());
  double ang = std::atan2(x.y() - center.y(), x.x() - center.x());
  if (ang < 0) ang += 2.0 * kPi;
  const int i = std::min(n - 1, static_cast<int>(ang / (2.0 * kPi / n)));
  const Vec2& a = ring[i];
  const Vec2& b = ring[(i + 1) % n];
  const Vec2 ab = b - a, ax = x - a;
  return ab.x() * ax.y() - ab.y() * ax.x() > 0.0;
}

struct SizeField {
  double h;
  double boundary_spacing;
  double radius;
  const std::vector<LatticePlan>* lattices;
  const std::vector<ConductiveDisk>* disks;
  std::vector<double> disk_spacing;

  double operator()(const Vec2& x) const {
    double sz = std::min(h, boundary_spacing + kGrading * std::max(0.0, radius - x.norm()));
    for (const auto& lp : *lattices) {
      const Vec2 st = lp.local(x);
      const double ds = std::max({0.0, lp.s_lo - st.x(), st.x() - lp.s_hi});
      const double dt = std::max(0.0, std::abs(st.y()) - lp.height);
      sz = std::min(sz, lp.spacing_at(st.x()) + kGrading * std::hypot(ds, dt));
    }
    for (std::size_t i = 0; i < disks->size(); ++i) {
      const auto& d = (*disks)[i];
      // Ring spacing is held over a band of two radii so the near field
      // refines with the ring.
      const double dist = std::abs((x - d.center).norm() - d.radius);
      sz = std::min(sz, disk_spacing[i] + kGrading * std::max(0.0, dist - 2.0 * d.radius));
    }
    return sz;
  }
};

void quadtree_points(const SizeField& size, const Vec2& c, double half, int depth,
                     std::vector<std::pair<Vec2, double>>& out) {
  if (c.norm() - half * std::sqrt(2.0) > size.radius) return;
  const double local = size(c);
  if (2.0 * half > local && depth < 24) {
    const double q = half / 2.0;
    for (double dx : {-q, q}) {
      for (double dy : {-q, q}) quadtree_points(size, c + Vec2(dx, dy), q, depth + 1, out);
    }
    return;
  }
  out.emplace_back(c, 2.0 * half);
}

}  // namespace

int SegmentLattice::plus_face_node(int col) const {
  if (row_plus == row_center && plus_copy[col] >= 0) return plus_copy[col];
  return node[col][row_plus];
}

Vec2 Pixelation::center(int pixel_id) const {
  const int ix = pixel_id % n, iy = pixel_id / n;
  const double w = width();
  return {-domain_radius + (ix + 0.5) * w, -domain_radius + (iy + 0.5) * w};
}

int Pixelation::pixel_of(const Vec2& x) const {
  const double w = width();
  const int ix = std::clamp(static_cast<int>(std::floor((x.x() + domain_radius) / w)), 0, n - 1);
  const int iy = std::clamp(static_cast<int>(std::floor((x.y() + domain_radius) / w)), 0, n - 1);
  return iy * n + ix;
}

double Mesh::triangle_area(int t) const {
  const auto& tri = triangles[t];
  const Vec2 a = nodes[tri[1]] - nodes[tri[0]];
  const Vec2 b = nodes[tri[2]] - nodes[tri[0]];
  return 0.5 * (a.x() * b.y() - a.y() * b.x());
}

double Mesh::total_area() const {
  double sum = 0.0;
  for (int t = 0; t < static_cast<int>(triangles.size()); ++t) sum += triangle_area(t);
  return sum;
}

double Mesh::polygon_area() const {
  double sum = 0.0;
  for (const auto& e : boundary_edges) {
    const Vec2& a = nodes[e[0]];
    const Vec2& b = nodes[e[1]];
    sum += 0.5 * (a.x() * b.y() - a.y() * b.x());
  }
  return sum;
}

Mesh mesh_domain(const Phantom& ph, double h, const MeshOptions& opt) {
  const double R = ph.domain_radius;
  if (!(h > 0.0) || !(h < R / 4.0)) {
    throw Error(ErrorCode::kInvalidInput, "mesh size must satisfy 0 < h < R/4");
  }
  if (opt.pixels < 1) throw Error(ErrorCode::kInvalidInput, "pixel grid must be positive");

  Mesh mesh;
  mesh.model = opt.model;
  mesh.h = h;
  mesh.domain_radius = R;
  std::vector<Vec2>& pts = mesh.nodes;
  std::vector<std::array<int, 2>> constraints;

  // Boundary polygon. The node count is a multiple of 64 so that the edges of
  // 16 or 32 equally spaced half-coverage electrodes fall on nodes.
  const double chord_n = kPi * std::sqrt(R / 2.0) / h;
  int nb = static_cast<int>(std::ceil(std::max(2.0 * kPi * R / h, chord_n) / 64.0)) * 64;
  for (int i = 0; i < nb; ++i) {
    const double a = 2.0 * kPi * i / nb;
    pts.emplace_back(R * std::cos(a), R * std::sin(a));
    mesh.boundary_nodes.push_back(i);
    mesh.boundary_edges.push_back({i, (i + 1) % nb});
    constraints.push_back({i, (i + 1) % nb});
  }
  const double boundary_spacing = 2.0 * R * std::sin(kPi / nb);
  const double inner_radius = R * std::cos(kPi / nb);

  // Disk boundaries: polygons with the same area as the disk.
  std::vector<std::vector<Vec2>> rings;
  std::vector<double> disk_spacing;
  for (const auto& d : ph.disks) {
    const int n = std::max(opt.disk_ring_points,
                           static_cast<int>(std::ceil(2.0 * kPi * d.radius / h)));
    const double r = d.radius * std::sqrt(2.0 * kPi / (n * std::sin(2.0 * kPi / n)));
    const int base = static_cast<int>(pts.size());
    std::vector<Vec2> ring;
    for (int i = 0; i < n; ++i) {
      const double a = 2.0 * kPi * i / n;
      ring.push_back(d.center + r * Vec2(std::cos(a), std::sin(a)));
      pts.push_back(ring.back());
      constraints.push_back({base + i, base + (i + 1) % n});
    }
    rings.push_back(std::move(ring));
    disk_spacing.push_back(2.0 * r * std::sin(kPi / n));
  }

  // Segment lattices.
  std::vector<LatticePlan> plans;
  for (int k = 0; k < static_cast<int>(ph.insulators.size()); ++k) {
    plans.push_back(plan_lattice(ph, k, h, opt));
  }
  for (const auto& lp : plans) {
    SegmentLattice lat;
    lat.segment_id = lp.segment;
    lat.s = lp.s;
    lat.t = lp.t;
    lat.col_tip_p = lp.col_p;
    lat.col_tip_q = lp.col_q;
    const int nrows = static_cast<int>(lp.t.size());
    const int mid = nrows / 2;
    if (opt.model == InterfaceModel::kResolved) {
      lat.row_minus = mid - 2;
      lat.row_plus = mid + 2;
    } else {
      lat.row_center = mid;
      lat.row_minus = mid;
      lat.row_plus = mid;
    }
    lat.node.assign(lp.s.size(), std::vector<int>(nrows, -1));
    for (std::size_t i = 0; i < lp.s.size(); ++i) {
      for (int j = 0; j < nrows; ++j) {
        lat.node[i][j] = static_cast<int>(pts.size());
        pts.push_back(lp.global(lp.s[i], lp.t[j]));
        if (j > 0) constraints.push_back({lat.node[i][j - 1], lat.node[i][j]});
        if (i > 0) constraints.push_back({lat.node[i - 1][j], lat.node[i][j]});
      }
    }
    lat.plus_copy.assign(lp.s.size(), -1);
    mesh.lattices.push_back(std::move(lat));
  }

  // Lattices must not overlap each other, the disks or the boundary.
  for (std::size_t a = 0; a < plans.size(); ++a) {
    const auto& la = mesh.lattices[a];
    for (const auto& col : la.node) {
      for (int n : col) {
        const Vec2& x = pts[n];
        bool bad = x.norm() >= inner_radius;
        for (std::size_t b = 0; b < plans.size() && !bad; ++b) {
          if (b == a) continue;
          const Vec2 st = plans[b].local(x);
          bad = st.x() >= plans[b].s_lo && st.x() <= plans[b].s_hi &&
                std::abs(st.y()) <= plans[b].height;
        }
        for (std::size_t d = 0; d < ph.disks.size() && !bad; ++d) {
          bad = (x - ph.disks[d].center).norm() <= ph.disks[d].radius + disk_spacing[d];
        }
        if (bad) throw Error(ErrorCode::kMeshFailure, "segment lattices overlap");
      }
    }
  }

  // Graded background points.
  const SizeField size{h, boundary_spacing, R, &plans, &ph.disks, disk_spacing};
  std::vector<std::pair<Vec2, double>> cells;
  quadtree_points(size, Vec2::Zero(), R * 1.0001, 0, cells);
  for (const auto& [x, leaf] : cells) {
    const double m = 0.55 * leaf;
    if (x.norm() > inner_radius - m) continue;
    bool skip = false;
    for (const auto& lp : plans) {
      const Vec2 st = lp.local(x);
      if (st.x() > lp.s_lo - m && st.x() < lp.s_hi + m && std::abs(st.y()) < lp.height + m) {
        skip = true;
        break;
      }
    }
    for (std::size_t d = 0; d < ph.disks.size() && !skip; ++d) {
      const double r = (x - ph.disks[d].center).norm();
      skip = std::abs(r - ph.disks[d].radius) < std::max(m, disk_spacing[d]);
    }
    if (!skip) pts.push_back(x);
  }

  detail::Triangulator tri(pts);
  for (const auto& c : constraints) tri.insert_constraint(c[0], c[1]);
  tri.make_constrained_delaunay();

  std::vector<Vec2> boundary_ring(pts.begin(), pts.begin() + nb);
  for (auto t : tri.triangles()) {
    const Vec2 c = (pts[t[0]] + pts[t[1]] + pts[t[2]]) / 3.0;
    if (!inside_convex_ring(boundary_ring, Vec2::Zero(), c)) continue;
    const Vec2 e1 = pts[t[1]] - pts[t[0]], e2 = pts[t[2]] - pts[t[0]];
    if (e1.x() * e2.y() - e1.y() * e2.x() < 0) std::swap(t[1], t[2]);
    Region reg = Region::kBackground;
    int idx = -1;
    for (std::size_t d = 0; d < rings.size() && idx < 0; ++d) {
      if (inside_convex_ring(rings[d], ph.disks[d].center, c)) {
        reg = Region::kDisk;
        idx = static_cast<int>(d);
      }
    }
    if (opt.model == InterfaceModel::kResolved) {
      for (std::size_t k = 0; k < plans.size() && idx < 0; ++k) {
        const Vec2 st = plans[k].local(c);
        if (st.x() > 0.0 && st.x() < plans[k].length && std::abs(st.y()) < plans[k].delta) {
          reg = Region::kInsulator;
          idx = static_cast<int>(k);
        }
      }
    }
    mesh.triangles.push_back(t);
    mesh.region.push_back(reg);
    mesh.region_index.push_back(idx);
  }

  // Duplicate the slit nodes strictly between the tips.
  if (opt.model == InterfaceModel::kZeroThickness) {
    std::vector<int> copy_of(pts.size(), -1);
    std::vector<int> owner(pts.size(), -1);
    for (std::size_t k = 0; k < mesh.lattices.size(); ++k) {
      auto& lat = mesh.lattices[k];
      for (int i = lat.col_tip_p + 1; i < lat.col_tip_q; ++i) {
        const int n = lat.node[i][lat.row_center];
        const int c = static_cast<int>(pts.size());
        pts.push_back(pts[n]);
        lat.plus_copy[i] = c;
        copy_of[n] = c;
        owner[n] = static_cast<int>(k);
        mesh.crack_pairs.push_back({n, c, static_cast<int>(k), lat.s[i]});
      }
    }
    for (auto& t : mesh.triangles) {
      const Vec2 c = (pts[t[0]] + pts[t[1]] + pts[t[2]]) / 3.0;
      for (int& v : t) {
        if (v < static_cast<int>(copy_of.size()) && copy_of[v] >= 0 &&
            plans[owner[v]].local(c).y() > 0.0) {
          v = copy_of[v];
        }
      }
    }
  }

  for (int t = 0; t < static_cast<int>(mesh.triangles.size()); ++t) {
    if (!(mesh.triangle_area(t) > 1e-12 * h * h)) {
      throw Error(ErrorCode::kMeshFailure, "degenerate triangle");
    }
  }

  mesh.pixels.n = opt.pixels;
  mesh.pixels.domain_radius = R;
  std::vector<char> used(static_cast<std::size_t>(opt.pixels) * opt.pixels, 0);
  for (const auto& t : mesh.triangles) {
    const Vec2 c = (pts[t[0]] + pts[t[1]] + pts[t[2]]) / 3.0;
    const int p = mesh.pixels.pixel_of(c);
    mesh.pixel_map.push_back(p);
    used[p] = 1;
  }
  for (int p = 0; p < static_cast<int>(used.size()); ++p) {
    if (used[p]) mesh.pixels.active.push_back(p);
  }
  return mesh;
}

int graph_distance(const Mesh& mesh, int a, int b, const std::vector<int>& excluded) {
  const int n = static_cast<int>(mesh.nodes.size());
  std::vector<std::vector<int>> adj(n);
  for (const auto& t : mesh.triangles) {
    for (int i = 0; i < 3; ++i) {
      adj[t[i]].push_back(t[(i + 1) % 3]);
      adj[t[(i + 1) % 3]].push_back(t[i]);
    }
  }
  std::vector<int> dist(n, -1);
  for (int e : excluded) dist[e] = -2;
  if (dist[a] == -2 || dist[b] == -2) return -1;
  std::deque<int> queue{a};
  dist[a] = 0;
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop_front();
    if (u == b) return dist[u];
    for (int v : adj[u]) {
      if (dist[v] == -1) {
        dist[v] = dist[u] + 1;
        queue.push_back(v);
      }
    }
  }
  return -1;
}

}  // namespace mfeit
