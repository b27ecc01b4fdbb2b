#include "nextmp/env.hpp"

#include <cmath>
#include <stdexcept>

namespace nextmp {

double distance(const Config& a, const Config& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

bool OccupancyGrid::occupied_at(double x, double y) const {
  if (x < 0.0 || y < 0.0 || x > 1.0 || y > 1.0) return true;
  int col = static_cast<int>(x * side);
  int row = static_cast<int>(y * side);
  if (col >= side) col = side - 1;
  if (row >= side) row = side - 1;
  return occupied(row, col);
}

const char* robot_kind_name(RobotKind k) {
  switch (k) {
    case RobotKind::Point2: return "point2";
    case RobotKind::Rigid3: return "rigid3";
    case RobotKind::Snake5: return "snake5";
    case RobotKind::Spacecraft7: return "spacecraft7";
  }
  return "point2";
}

RobotKind robot_kind_from_name(const std::string& name) {
  if (name == "point2") return RobotKind::Point2;
  if (name == "rigid3") return RobotKind::Rigid3;
  if (name == "snake5") return RobotKind::Snake5;
  if (name == "spacecraft7") return RobotKind::Spacecraft7;
  throw std::invalid_argument("unknown robot kind: " + name);
}

int RobotModel::dof() const {
  switch (kind) {
    case RobotKind::Point2: return 2;
    case RobotKind::Rigid3: return 3;
    case RobotKind::Snake5: return 5;
    case RobotKind::Spacecraft7: return 7;
  }
  return 2;
}

int RobotModel::workspace_dims() const {
  return kind == RobotKind::Spacecraft7 ? 3 : 2;
}

std::vector<JointRange> RobotModel::joint_ranges() const {
  switch (kind) {
    case RobotKind::Point2:
      return {};
    case RobotKind::Rigid3:
      return {{-M_PI, M_PI}};
    case RobotKind::Snake5:
      return {{-M_PI, M_PI}, {-M_PI / 4, M_PI / 4}, {-M_PI / 4, M_PI / 4}};
    case RobotKind::Spacecraft7:
      return {{0, M_PI / 2}, {0, M_PI / 2}, {0, M_PI / 2}, {0, M_PI / 2}};
  }
  return {};
}

double RobotModel::motion_gain(std::size_t coord) const {
  const int w = workspace_dims();
  if (coord < static_cast<std::size_t>(w)) return 1.0;
  const std::size_t j = coord - w;  // joint index
  const auto ranges = joint_ranges();
  const double width = ranges[j].width();
  switch (kind) {
    case RobotKind::Point2:
      return 0.0;
    case RobotKind::Rigid3:
      return width * stick_length / 2.0;
    case RobotKind::Snake5: {
      // Lever arm of joint j: all links from that joint outward.
      const double lever = snake_link * static_cast<double>(3 - j);
      return width * lever;
    }
    case RobotKind::Spacecraft7: {
      // Shoulders (j = 0, 2) sweep both arm links, elbows (j = 1, 3) one.
      const double lever = (j % 2 == 0) ? 2.0 * arm_link : arm_link;
      return width * lever;
    }
  }
  return 0.0;
}

RobotModel make_robot(RobotKind kind) {
  RobotModel r;
  r.kind = kind;
  return r;
}

namespace {

double joint_angle(const RobotModel& robot, const Config& s, std::size_t j) {
  const auto ranges = robot.joint_ranges();
  const double u = s[robot.workspace_dims() + j];
  return ranges[j].lo + u * ranges[j].width();
}

}  // namespace

std::vector<WSegment> robot_segments(const RobotModel& robot, const Config& s) {
  std::vector<WSegment> out;
  switch (robot.kind) {
    case RobotKind::Point2: {
      out.push_back({{s[0], s[1], 0}, {s[0], s[1], 0}});
      break;
    }
    case RobotKind::Rigid3: {
      const double th = joint_angle(robot, s, 0);
      const double hx = 0.5 * robot.stick_length * std::cos(th);
      const double hy = 0.5 * robot.stick_length * std::sin(th);
      out.push_back({{s[0] - hx, s[1] - hy, 0}, {s[0] + hx, s[1] + hy, 0}});
      break;
    }
    case RobotKind::Snake5: {
      double x = s[0], y = s[1];
      double heading = joint_angle(robot, s, 0);
      for (int link = 0; link < 3; ++link) {
        if (link > 0) heading += joint_angle(robot, s, link);
        const double nx = x + robot.snake_link * std::cos(heading);
        const double ny = y + robot.snake_link * std::sin(heading);
        out.push_back({{x, y, 0}, {nx, ny, 0}});
        x = nx;
        y = ny;
      }
      break;
    }
    case RobotKind::Spacecraft7: {
      const double h = 0.5 * robot.body_edge;
      const double cx = s[0], cy = s[1], cz = s[2];
      // 12 edges of the cuboid body.
      const double xs[2] = {cx - h, cx + h};
      const double ys[2] = {cy - h, cy + h};
      const double zs[2] = {cz - h, cz + h};
      for (int iy = 0; iy < 2; ++iy)
        for (int iz = 0; iz < 2; ++iz)
          out.push_back({{xs[0], ys[iy], zs[iz]}, {xs[1], ys[iy], zs[iz]}});
      for (int ix = 0; ix < 2; ++ix)
        for (int iz = 0; iz < 2; ++iz)
          out.push_back({{xs[ix], ys[0], zs[iz]}, {xs[ix], ys[1], zs[iz]}});
      for (int ix = 0; ix < 2; ++ix)
        for (int iy = 0; iy < 2; ++iy)
          out.push_back({{xs[ix], ys[iy], zs[0]}, {xs[ix], ys[iy], zs[1]}});
      // Two 2-DoF arms on the +x and -x faces; each link rotates in the
      // x-z plane through its mounting point.
      const double a0 = joint_angle(robot, s, 0);  // +x shoulder
      const double a1 = joint_angle(robot, s, 1);  // +x elbow
      const double a2 = joint_angle(robot, s, 2);  // -x shoulder
      const double a3 = joint_angle(robot, s, 3);  // -x elbow
      const double L = robot.arm_link;
      {
        const double sx = cx + h, sy = cy, sz = cz;
        const double mx = sx + L * std::cos(a0), mz = sz + L * std::sin(a0);
        const double ex = mx + L * std::cos(a0 + a1),
                     ez = mz + L * std::sin(a0 + a1);
        out.push_back({{sx, sy, sz}, {mx, sy, mz}});
        out.push_back({{mx, sy, mz}, {ex, sy, ez}});
      }
      {
        const double sx = cx - h, sy = cy, sz = cz;
        const double mx = sx - L * std::cos(a2), mz = sz + L * std::sin(a2);
        const double ex = mx - L * std::cos(a2 + a3),
                     ez = mz + L * std::sin(a2 + a3);
        out.push_back({{sx, sy, sz}, {mx, sy, mz}});
        out.push_back({{mx, sy, mz}, {ex, sy, ez}});
      }
      break;
    }
  }
  return out;
}

double segment_cost(const PlanningProblem& p, const Config& a, const Config& b) {
  const int w = p.robot.workspace_dims();
  double len2 = 0.0;
  for (int i = 0; i < w; ++i) {
    const double d = a[i] - b[i];
    len2 += d * d;
  }
  const auto ranges = p.robot.joint_ranges();
  double rot = 0.0;
  for (std::size_t j = 0; j < ranges.size(); ++j) {
    rot += std::abs(a[w + j] - b[w + j]) * ranges[j].width();
  }
  return p.w_len * std::sqrt(len2) + p.w_rot * rot;
}

Config interpolate(const Config& a, const Config& b, double t) {
  Config out;
  out.coords.resize(a.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    out.coords[i] = a[i] + t * (b[i] - a[i]);
  return out;
}

Config sample_free(const PlanningProblem& p, Rng& rng, int* attempts_out) {
  const int q = p.robot.dof();
  Config s;
  s.coords.resize(q);
  for (int attempt = 1; attempt <= 10000; ++attempt) {
    for (int i = 0; i < q; ++i) s.coords[i] = rng.uniform();
    if (config_free(p, s)) {
      if (attempts_out) *attempts_out = attempt;
      return s;
    }
  }
  throw std::runtime_error(
      "sample_free: environment degenerate, no free configuration in 10^4 "
      "draws");
}

bool in_goal(const PlanningProblem& p, const Config& s) {
  return distance(s, p.goal_center) <= p.goal_radius;
}

PlanningProblem generate_problem(RobotKind kind, std::uint64_t seed,
                                 int maze_side, double density) {
  PlanningProblem p;
  p.robot = make_robot(kind);
  p.seed = seed;
  if (p.robot.workspace_dims() == 2) {
    p.grid = generate_maze(derive_stream(seed, 1), maze_side);
  } else {
    p.cuboids = generate_blocks3d(derive_stream(seed, 1), density);
  }
  Rng rng(derive_stream(seed, 2));
  p.start = sample_free(p, rng);
  // Resample the pair until the start lies outside the goal region.
  for (;;) {
    p.goal_center = sample_free(p, rng);
    if (!in_goal(p, p.start)) break;
    p.start = sample_free(p, rng);
  }
  return p;
}

}  // namespace nextmp
