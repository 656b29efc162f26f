#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "mfeit/admittivity.hpp"

namespace mfeit {

/// Straight thin insulating strip {p + s tau + h nu : 0 <= s <= |q-p|, |h| < delta}.
/// The normal is the tangent rotated by +90 degrees; the "plus" side is h > 0.
struct ThinInsulator {
  Vec2 p{0.0, 0.0};
  Vec2 q{0.0, 0.0};
  double half_thickness = 0.0;

  double length() const { return (q - p).norm(); }
  Vec2 tangent() const { return (q - p) / length(); }
  Vec2 normal() const {
    const Vec2 t = tangent();
    return {-t.y(), t.x()};
  }
  /// Local coordinates (s along p->q, t along normal) of a point.
  Vec2 local(const Vec2& x) const {
    const Vec2 d = x - p;
    return {d.dot(tangent()), d.dot(normal())};
  }
};

struct ConductiveDisk {
  Vec2 center{0.0, 0.0};
  double radius = 0.0;

  double area() const;
};

/// Unvalidated phantom description as read from a PhantomSpec file.
struct PhantomSpec {
  double domain_radius = 1.0;
  double d0 = 0.1;
  MaterialSpec materials;
  std::vector<ThinInsulator> insulators;
  std::vector<ConductiveDisk> disks;
};

struct Phantom {
  double domain_radius = 1.0;
  std::vector<ThinInsulator> insulators;
  std::vector<ConductiveDisk> disks;
  MaterialSpec materials;
  double separation = 0.1;
};

PhantomSpec phantom_spec_from_json(const nlohmann::json& j);
nlohmann::json phantom_spec_to_json(const PhantomSpec& spec);
PhantomSpec load_phantom_spec(const std::string& path);

/// Validates geometry and materials. Throws InvalidInput for malformed
/// inclusions, OutOfDomain for an inclusion touching the boundary and
/// SeparationViolation when any pairwise distance is below d0.
Phantom build_phantom(const PhantomSpec& spec);

double point_segment_distance(const Vec2& x, const Vec2& a, const Vec2& b);
double segment_segment_distance(const Vec2& a0, const Vec2& a1, const Vec2& b0,
                                const Vec2& b1);

enum class InclusionKind { kInsulator, kDisk, kBoundary };

struct InclusionRef {
  InclusionKind kind;
  int index;  // -1 for the boundary
  std::string label() const;
};

struct DistanceEntry {
  InclusionRef a;
  InclusionRef b;
  double distance;
};

/// Exact pairwise distances between insulator centerlines, disks and the
/// domain boundary. Entries are listed once per unordered pair.
std::vector<DistanceEntry> distance_report(const Phantom& phantom);

/// Smallest distance from an inclusion to anything else (other inclusions
/// or the boundary).
double clearance(const Phantom& phantom, InclusionRef which);

}  // namespace mfeit
