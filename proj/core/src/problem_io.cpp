#include "nextmp/problem_io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace nextmp {

using nlohmann::json;

std::string problem_to_json(const PlanningProblem& p) {
  json j;
  j["version"] = 1;
  j["robot"] = robot_kind_name(p.robot.kind);
  if (p.grid) {
    std::string cells;
    cells.reserve(p.grid->cells.size());
    for (auto c : p.grid->cells) cells.push_back(c ? '1' : '0');
    j["grid"] = {{"side", p.grid->side}, {"cells", cells}};
  } else if (p.cuboids) {
    json boxes = json::array();
    for (const auto& b : p.cuboids->boxes) {
      boxes.push_back(json::array(
          {json::array({b.lo[0], b.lo[1], b.lo[2]}),
           json::array({b.hi[0], b.hi[1], b.hi[2]})}));
    }
    j["cuboids"] = boxes;
  }
  j["start"] = p.start.coords;
  j["goal"] = p.goal_center.coords;
  j["goal_radius"] = p.goal_radius;
  j["w_len"] = p.w_len;
  j["w_rot"] = p.w_rot;
  j["seed"] = p.seed;
  return j.dump(2) + "\n";
}

PlanningProblem problem_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("problem file is not valid JSON: ") +
                                e.what());
  }
  if (!j.contains("version") || j["version"].get<int>() != 1)
    throw std::invalid_argument("problem file: unsupported version");

  PlanningProblem p;
  p.robot = make_robot(robot_kind_from_name(j.at("robot").get<std::string>()));

  const bool has_grid = j.contains("grid");
  const bool has_cuboids = j.contains("cuboids");
  if (has_grid == has_cuboids)
    throw std::invalid_argument(
        "problem file: exactly one of grid/cuboids required");
  if (has_grid) {
    OccupancyGrid g;
    g.side = j["grid"].at("side").get<int>();
    const auto cells = j["grid"].at("cells").get<std::string>();
    if (static_cast<int>(cells.size()) != g.side * g.side)
      throw std::invalid_argument("problem file: cells length != side^2");
    g.cells.reserve(cells.size());
    for (char c : cells) {
      if (c != '0' && c != '1')
        throw std::invalid_argument("problem file: cells must be 0/1");
      g.cells.push_back(c == '1' ? 1 : 0);
    }
    p.grid = std::move(g);
  } else {
    CuboidSet cs;
    for (const auto& jb : j["cuboids"]) {
      Aabb b;
      for (int ax = 0; ax < 3; ++ax) {
        b.lo[ax] = jb.at(0).at(ax).get<double>();
        b.hi[ax] = jb.at(1).at(ax).get<double>();
        if (b.lo[ax] > b.hi[ax])
          throw std::invalid_argument("problem file: box min > max");
      }
      cs.boxes.push_back(b);
    }
    p.cuboids = std::move(cs);
  }

  p.start = Config(j.at("start").get<std::vector<double>>());
  p.goal_center = Config(j.at("goal").get<std::vector<double>>());
  const auto q = static_cast<std::size_t>(p.robot.dof());
  if (p.start.size() != q || p.goal_center.size() != q)
    throw std::invalid_argument("problem file: start/goal dimension mismatch");
  for (double v : p.start.coords)
    if (v < 0.0 || v > 1.0)
      throw std::invalid_argument("problem file: start outside [0,1]^q");
  for (double v : p.goal_center.coords)
    if (v < 0.0 || v > 1.0)
      throw std::invalid_argument("problem file: goal outside [0,1]^q");

  p.goal_radius = j.at("goal_radius").get<double>();
  p.w_len = j.at("w_len").get<double>();
  p.w_rot = j.at("w_rot").get<double>();
  p.seed = j.at("seed").get<std::uint64_t>();
  return p;
}

void save_problem(const PlanningProblem& p, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  out << problem_to_json(p);
}

PlanningProblem load_problem(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return problem_from_json(ss.str());
}

}  // namespace nextmp
