#pragma once

#include <string>

#include "nextmp/env.hpp"

namespace nextmp {

// Problem files are UTF-8 JSON:
//   {"version": 1, "robot": "point2|rigid3|snake5|spacecraft7",
//    "grid": {"side": N, "cells": "0101..."}   (2d workspaces)
//    "cuboids": [[[x,y,z],[x,y,z]], ...]        (3d workspaces)
//    "start": [...], "goal": [...], "goal_radius": r,
//    "w_len": w, "w_rot": w, "seed": n}
// Exactly one of "grid"/"cuboids" is present; "cells" is the row-major
// 0/1 string of the occupancy grid.
std::string problem_to_json(const PlanningProblem& p);
PlanningProblem problem_from_json(const std::string& text);

void save_problem(const PlanningProblem& p, const std::string& path);
PlanningProblem load_problem(const std::string& path);

}  // namespace nextmp
