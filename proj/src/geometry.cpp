#include "mfeit/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

#include "mfeit/errors.hpp"

namespace mfeit {

using nlohmann::json;

double ConductiveDisk::area() const {
  return std::numbers::pi * radius * radius;
}

namespace {

Vec2 read_point(const json& j) {
  if (!j.is_array() || j.size() != 2) {
    throw Error(ErrorCode::kInvalidInput, "points must be [x, y]");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

json write_point(const Vec2& p) { return json::array({p.x(), p.y()}); }

}  // namespace

PhantomSpec phantom_spec_from_json(const json& j) {
  PhantomSpec spec;
  try {
    spec.domain_radius = j.value("domain_radius", 1.0);
    spec.d0 = j.value("d0", 0.1);
    if (j.contains("materials")) {
      const auto& m = j.at("materials");
      spec.materials.sigma_b = m.value("sigma_b", spec.materials.sigma_b);
      spec.materials.eps_b = m.value("eps_b", spec.materials.eps_b);
      spec.materials.sigma_c = m.value("sigma_c", spec.materials.sigma_c);
      spec.materials.eps_c = m.value("eps_c", spec.materials.eps_c);
      spec.materials.sigma_d = m.value("sigma_d", spec.materials.sigma_d);
      spec.materials.eps_d = m.value("eps_d", spec.materials.eps_d);
    }
    for (const auto& c : j.value("insulators", json::array())) {
      spec.insulators.push_back(
          {read_point(c.at("p")), read_point(c.at("q")), c.at("delta").get<double>()});
    }
    for (const auto& d : j.value("disks", json::array())) {
      spec.disks.push_back({read_point(d.at("center")), d.at("radius").get<double>()});
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidInput, std::string("phantom spec: ") + e.what());
  }
  return spec;
}

json phantom_spec_to_json(const PhantomSpec& spec) {
  json j;
  j["domain_radius"] = spec.domain_radius;
  j["d0"] = spec.d0;
  const auto& m = spec.materials;
  j["materials"] = {{"sigma_b", m.sigma_b}, {"eps_b", m.eps_b},
                    {"sigma_c", m.sigma_c}, {"eps_c", m.eps_c},
                    {"sigma_d", m.sigma_d}, {"eps_d", m.eps_d}};
  j["insulators"] = json::array();
  for (const auto& c : spec.insulators) {
    j["insulators"].push_back(
        {{"p", write_point(c.p)}, {"q", write_point(c.q)}, {"delta", c.half_thickness}});
  }
  j["disks"] = json::array();
  for (const auto& d : spec.disks) {
    j["disks"].push_back({{"center", write_point(d.center)}, {"radius", d.radius}});
  }
  return j;
}

PhantomSpec load_phantom_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidInput, path + ": " + e.what());
  }
  return phantom_spec_from_json(j);
}

double point_segment_distance(const Vec2& x, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 == 0.0) return (x - a).norm();
  const double t = std::clamp((x - a).dot(ab) / len2, 0.0, 1.0);
  return (x - (a + t * ab)).norm();
}

namespace {

double cross(const Vec2& u, const Vec2& v) { return u.x() * v.y() - u.y() * v.x(); }

bool segments_intersect(const Vec2& a0, const Vec2& a1, const Vec2& b0, const Vec2& b1) {
  const double d1 = cross(a1 - a0, b0 - a0);
  const double d2 = cross(a1 - a0, b1 - a0);
  const double d3 = cross(b1 - b0, a0 - b0);
  const double d4 = cross(b1 - b0, a1 - b0);
  return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0)) && d1 != 0 && d2 != 0 &&
         d3 != 0 && d4 != 0;
}

}  // namespace

double segment_segment_distance(const Vec2& a0, const Vec2& a1, const Vec2& b0,
                                const Vec2& b1) {
  if (segments_intersect(a0, a1, b0, b1)) return 0.0;
  return std::min({point_segment_distance(a0, b0, b1), point_segment_distance(a1, b0, b1),
                   point_segment_distance(b0, a0, a1), point_segment_distance(b1, a0, a1)});
}

std::string InclusionRef::label() const {
  switch (kind) {
    case InclusionKind::kInsulator: return "C" + std::to_string(index + 1);
    case InclusionKind::kDisk: return "D" + std::to_string(index + 1);
    case InclusionKind::kBoundary: return "boundary";
  }
  return "?";
}

std::vector<DistanceEntry> distance_report(const Phantom& ph) {
  std::vector<DistanceEntry> out;
  const int nc = static_cast<int>(ph.insulators.size());
  const int nd = static_cast<int>(ph.disks.size());
  const InclusionRef boundary{InclusionKind::kBoundary, -1};
  for (int i = 0; i < nc; ++i) {
    const auto& a = ph.insulators[i];
    for (int j = i + 1; j < nc; ++j) {
      const auto& b = ph.insulators[j];
      out.push_back({{InclusionKind::kInsulator, i},
                     {InclusionKind::kInsulator, j},
                     segment_segment_distance(a.p, a.q, b.p, b.q)});
    }
    for (int j = 0; j < nd; ++j) {
      const auto& d = ph.disks[j];
      out.push_back({{InclusionKind::kInsulator, i},
                     {InclusionKind::kDisk, j},
                     std::max(0.0, point_segment_distance(d.center, a.p, a.q) - d.radius)});
    }
    // The farthest point of a segment from the origin is an endpoint.
    out.push_back({{InclusionKind::kInsulator, i},
                   boundary,
                   ph.domain_radius - std::max(a.p.norm(), a.q.norm())});
  }
  for (int i = 0; i < nd; ++i) {
    const auto& a = ph.disks[i];
    for (int j = i + 1; j < nd; ++j) {
      const auto& b = ph.disks[j];
      out.push_back({{InclusionKind::kDisk, i},
                     {InclusionKind::kDisk, j},
                     std::max(0.0, (a.center - b.center).norm() - a.radius - b.radius)});
    }
    out.push_back({{InclusionKind::kDisk, i},
                   boundary,
                   ph.domain_radius - a.center.norm() - a.radius});
  }
  return out;
}

double clearance(const Phantom& ph, InclusionRef which) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& e : distance_report(ph)) {
    const bool hit = (e.a.kind == which.kind && e.a.index == which.index) ||
                     (e.b.kind == which.kind && e.b.index == which.index);
    if (hit) best = std::min(best, e.distance);
  }
  return best;
}

Phantom build_phantom(const PhantomSpec& spec) {
  if (!(spec.domain_radius > 0.0) || !(spec.d0 > 0.0)) {
    throw Error(ErrorCode::kInvalidInput, "domain_radius and d0 must be positive");
  }
  spec.materials.validate();
  for (const auto& c : spec.insulators) {
    const double len = c.length();
    if (!(len > 0.0) || !(c.half_thickness > 0.0)) {
      throw Error(ErrorCode::kInvalidInput, "insulator needs positive length and thickness");
    }
    if (c.half_thickness > len / 20.0) {
      throw Error(ErrorCode::kInvalidInput, "insulator half_thickness exceeds length/20");
    }
  }
  for (const auto& d : spec.disks) {
    if (!(d.radius > 0.0)) throw Error(ErrorCode::kInvalidInput, "disk radius must be positive");
  }

  Phantom ph{spec.domain_radius, spec.insulators, spec.disks, spec.materials, spec.d0};
  for (const auto& e : distance_report(ph)) {
    if (e.b.kind == InclusionKind::kBoundary && e.distance <= 0.0) {
      throw Error(ErrorCode::kOutOfDomain, e.a.label() + " touches the domain boundary");
    }
  }
  for (const auto& e : distance_report(ph)) {
    if (e.distance < spec.d0) {
      throw Error(ErrorCode::kSeparationViolation,
                  e.a.label() + "-" + e.b.label() + " distance " + std::to_string(e.distance) +
                      " < d0");
    }
  }
  return ph;
}

}  // namespace mfeit
