#include <algorithm>
#include <cmath>

#include "nextmp/env.hpp"

namespace nextmp {

namespace {

// Walks every grid cell the 2d segment passes through (Amanatides-Woo) and
// reports whether any of them is occupied. Both endpoints must lie inside
// [0,1]^2; out-of-range coordinates count as collision at the caller.
bool segment_hits_grid(const OccupancyGrid& g, double ax, double ay, double bx,
                       double by) {
  const double s = static_cast<double>(g.side);
  double gx0 = ax * s, gy0 = ay * s;
  double gx1 = bx * s, gy1 = by * s;

  auto cell_of = [&](double v) {
    int c = static_cast<int>(std::floor(v));
    if (c < 0) c = 0;
    if (c >= g.side) c = g.side - 1;
    return c;
  };

  int ix = cell_of(gx0), iy = cell_of(gy0);
  const int ex = cell_of(gx1), ey = cell_of(gy1);
  if (g.occupied(iy, ix)) return true;

  const double dx = gx1 - gx0, dy = gy1 - gy0;
  const int step_x = dx > 0 ? 1 : -1;
  const int step_y = dy > 0 ? 1 : -1;
  double t_max_x, t_delta_x;
  if (dx == 0.0) {
    t_max_x = std::numeric_limits<double>::infinity();
    t_delta_x = std::numeric_limits<double>::infinity();
  } else {
    const double next_x = dx > 0 ? std::floor(gx0) + 1.0 : std::floor(gx0);
    t_max_x = (next_x - gx0) / dx;
    t_delta_x = 1.0 / std::abs(dx);
  }
  double t_max_y, t_delta_y;
  if (dy == 0.0) {
    t_max_y = std::numeric_limits<double>::infinity();
    t_delta_y = std::numeric_limits<double>::infinity();
  } else {
    const double next_y = dy > 0 ? std::floor(gy0) + 1.0 : std::floor(gy0);
    t_max_y = (next_y - gy0) / dy;
    t_delta_y = 1.0 / std::abs(dy);
  }

  // Upper bound on traversal length guards against degenerate float loops.
  int guard = 2 * (std::abs(ex - ix) + std::abs(ey - iy)) + 4;
  while ((ix != ex || iy != ey) && guard-- > 0) {
    if (t_max_x < t_max_y) {
      t_max_x += t_delta_x;
      ix += step_x;
    } else {
      t_max_y += t_delta_y;
      iy += step_y;
    }
    if (g.occupied(iy, ix)) return true;
  }
  return false;
}

bool point_in_box(const Aabb& b, const std::array<double, 3>& p) {
  for (int ax = 0; ax < 3; ++ax)
    if (p[ax] < b.lo[ax] || p[ax] > b.hi[ax]) return false;
  return true;
}

// Slab test for segment [a, b] against an axis-aligned box.
bool segment_hits_box(const Aabb& box, const std::array<double, 3>& a,
                      const std::array<double, 3>& b) {
  double t0 = 0.0, t1 = 1.0;
  for (int ax = 0; ax < 3; ++ax) {
    const double d = b[ax] - a[ax];
    if (std::abs(d) < 1e-300) {
      if (a[ax] < box.lo[ax] || a[ax] > box.hi[ax]) return false;
      continue;
    }
    double ta = (box.lo[ax] - a[ax]) / d;
    double tb = (box.hi[ax] - a[ax]) / d;
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return false;
  }
  return true;
}

bool workspace_point_ok_2d(double x, double y) {
  return x >= 0.0 && y >= 0.0 && x <= 1.0 && y <= 1.0;
}

}  // namespace

bool config_free(const PlanningProblem& p, const Config& s) {
  const auto segs = robot_segments(p.robot, s);
  if (p.grid) {
    for (const auto& seg : segs) {
      if (!workspace_point_ok_2d(seg.a[0], seg.a[1]) ||
          !workspace_point_ok_2d(seg.b[0], seg.b[1]))
        return false;
      if (segment_hits_grid(*p.grid, seg.a[0], seg.a[1], seg.b[0], seg.b[1]))
        return false;
    }
    return true;
  }
  if (p.cuboids) {
    for (const auto& seg : segs) {
      for (const auto& box : p.cuboids->boxes) {
        if (seg.a == seg.b) {
          if (point_in_box(box, seg.a)) return false;
        } else if (segment_hits_box(box, seg.a, seg.b)) {
          return false;
        }
      }
    }
    return true;
  }
  // No obstacles at all: only the workspace bounds apply in 2d.
  if (!p.is_3d()) {
    for (const auto& seg : segs) {
      if (!workspace_point_ok_2d(seg.a[0], seg.a[1]) ||
          !workspace_point_ok_2d(seg.b[0], seg.b[1]))
        return false;
    }
  }
  return true;
}

int interpolation_steps(const PlanningProblem& p, const Config& a,
                        const Config& b) {
  double bound = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    bound += p.robot.motion_gain(i) * std::abs(a[i] - b[i]);

  double half_feature;
  if (p.grid) {
    half_feature = 0.5 / static_cast<double>(p.grid->side);
  } else if (p.cuboids && !p.cuboids->boxes.empty()) {
    double min_edge = 1.0;
    for (const auto& box : p.cuboids->boxes)
      for (int ax = 0; ax < 3; ++ax)
        min_edge = std::min(min_edge, box.hi[ax] - box.lo[ax]);
    half_feature = 0.5 * std::max(min_edge, 1e-3);
  } else {
    return 1;
  }
  return std::max(1, static_cast<int>(std::ceil(bound / half_feature)));
}

bool collision_free(const PlanningProblem& p, const Config& a,
                    const Config& b) {
  if (!config_free(p, a)) return false;
  if (!(a == b) && !config_free(p, b)) return false;

  if (p.robot.kind == RobotKind::Point2) {
    // The point robot's sweep is exactly the workspace segment.
    if (!p.grid) return true;
    return !segment_hits_grid(*p.grid, a[0], a[1], b[0], b[1]);
  }

  const int steps = interpolation_steps(p, a, b);
  for (int i = 1; i < steps; ++i) {
    const double t = static_cast<double>(i) / steps;
    if (!config_free(p, interpolate(a, b, t))) return false;
  }
  return true;
}

}  // namespace nextmp
