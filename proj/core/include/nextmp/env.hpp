#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nextmp/rng.hpp"

namespace nextmp {

// A configuration-space state. All coordinates live in [0,1]; angular
// coordinates are mapped affinely from their joint range. The first
// workspace_dims() coordinates are the workspace position, the remainder
// are joint coordinates.
struct Config {
  std::vector<double> coords;

  Config() = default;
  explicit Config(std::vector<double> c) : coords(std::move(c)) {}
  Config(std::initializer_list<double> c) : coords(c) {}

  std::size_t size() const { return coords.size(); }
  double operator[](std::size_t i) const { return coords[i]; }
  double& operator[](std::size_t i) { return coords[i]; }
  bool operator==(const Config& o) const { return coords == o.coords; }
};

double distance(const Config& a, const Config& b);

// Binary workspace map on [0,1]^2: 0 free, 1 obstacle, row-major, row r
// covers y in [r/side, (r+1)/side) and column c covers the same band in x.
struct OccupancyGrid {
  int side = 0;
  std::vector<std::uint8_t> cells;

  bool occupied(int row, int col) const {
    if (row < 0 || col < 0 || row >= side || col >= side) return true;
    return cells[static_cast<std::size_t>(row) * side + col] != 0;
  }
  // Point query in workspace coordinates; outside [0,1]^2 counts as occupied.
  bool occupied_at(double x, double y) const;
};

// Axis-aligned boxes inside the unit cube.
struct Aabb {
  std::array<double, 3> lo;
  std::array<double, 3> hi;
};

struct CuboidSet {
  std::vector<Aabb> boxes;
};

enum class RobotKind { Point2, Rigid3, Snake5, Spacecraft7 };

const char* robot_kind_name(RobotKind k);
RobotKind robot_kind_from_name(const std::string& name);

// Joint range in radians for one non-workspace coordinate. Normalized
// coordinate u in [0,1] maps to lo + u * (hi - lo). All ranges are treated
// as bounded intervals; angle differences never wrap.
struct JointRange {
  double lo = 0.0;
  double hi = 0.0;
  double width() const { return hi - lo; }
};

struct RobotModel {
  RobotKind kind = RobotKind::Point2;
  double stick_length = 0.1;  // Rigid3
  double snake_link = 0.05;   // Snake5, three links
  double body_edge = 0.08;    // Spacecraft7 cuboid body
  double arm_link = 0.05;     // Spacecraft7, two links per arm

  int dof() const;
  int workspace_dims() const;
  std::vector<JointRange> joint_ranges() const;
  // Upper bound on how far any robot point moves per unit change of the
  // given normalized coordinate; used to pick the collision interpolation
  // step.
  double motion_gain(std::size_t coord) const;
};

RobotModel make_robot(RobotKind kind);

// A workspace segment; points are represented as degenerate segments.
struct WSegment {
  std::array<double, 3> a{0, 0, 0};
  std::array<double, 3> b{0, 0, 0};
};

struct PlanningProblem {
  RobotModel robot;
  std::optional<OccupancyGrid> grid;
  std::optional<CuboidSet> cuboids;
  Config start;
  Config goal_center;
  double goal_radius = 0.05;
  double w_len = 1.0;
  double w_rot = 0.1;
  std::uint64_t seed = 0;

  bool is_3d() const { return robot.workspace_dims() == 3; }
};

// --- generators ---------------------------------------------------------

// Perfect maze (every pair of free cells connected by exactly one corridor
// path) on an odd lattice: rooms at odd (row, col), walls in between,
// carved with an iterative recursive-backtracker walk. side must be odd and
// >= 1; side == 1 yields a single free cell.
OccupancyGrid generate_maze(std::uint64_t seed, int side);

// Samples axis-aligned boxes i.i.d. until the accumulated box volume
// reaches `density` (fraction of the unit cube). Boxes are kept fully
// inside the cube with edges in [0.05, 0.30]. Requires 0 <= density < 0.5.
CuboidSet generate_blocks3d(std::uint64_t seed, double density);

// Complete random problem: map + free start/goal (start outside the goal
// region).
PlanningProblem generate_problem(RobotKind kind, std::uint64_t seed,
                                 int maze_side = 15, double density = 0.2);

// --- geometry & collision -----------------------------------------------

// Workspace realization of the robot at configuration s.
std::vector<WSegment> robot_segments(const RobotModel& robot, const Config& s);

// Single-configuration collision test (robot geometry vs obstacles).
bool config_free(const PlanningProblem& p, const Config& s);

// True iff the straight-line motion from a to b stays free at the
// interpolation resolution (no robot point moves more than half a grid cell,
// or half the smallest box edge, between consecutive checked
// configurations). One call counts as one collision check for metrics
// regardless of how many interior configurations are tested.
bool collision_free(const PlanningProblem& p, const Config& a, const Config& b);

// w_len * |a_w - b_w| + w_rot * sum_j |delta angle_j| (radians).
double segment_cost(const PlanningProblem& p, const Config& a, const Config& b);

Config interpolate(const Config& a, const Config& b, double t);

// Number of interior interpolation steps collision_free(p, a, b) uses.
int interpolation_steps(const PlanningProblem& p, const Config& a,
                        const Config& b);

// Rejection sampling over [0,1]^q until config_free; throws
// std::runtime_error after 10^4 draws. If attempts_out is non-null it
// receives the number of draws made (each draw is one point collision
// test).
Config sample_free(const PlanningProblem& p, Rng& rng,
                   int* attempts_out = nullptr);

// Closed goal region: |s - goal_center|_2 <= goal_radius.
bool in_goal(const PlanningProblem& p, const Config& s);

}  // namespace nextmp
