#include <algorithm>
#include <stdexcept>
#include <vector>

#include "nextmp/env.hpp"

namespace nextmp {

OccupancyGrid generate_maze(std::uint64_t seed, int side) {
  if (side < 1) throw std::invalid_argument("generate_maze: side must be >= 1");
  if (side % 2 == 0)
    throw std::invalid_argument("generate_maze: side must be odd");

  OccupancyGrid g;
  g.side = side;
  if (side == 1) {
    g.cells.assign(1, 0);
    return g;
  }

  g.cells.assign(static_cast<std::size_t>(side) * side, 1);
  auto at = [&](int r, int c) -> std::uint8_t& {
    return g.cells[static_cast<std::size_t>(r) * side + c];
  };

  // Rooms sit at odd coordinates; the backtracker carves the wall between a
  // room and an unvisited room two cells away.
  const int rooms = (side - 1) / 2;
  std::vector<std::uint8_t> visited(static_cast<std::size_t>(rooms) * rooms, 0);
  auto seen = [&](int rr, int rc) -> std::uint8_t& {
    return visited[static_cast<std::size_t>(rr) * rooms + rc];
  };

  Rng rng(seed);
  std::vector<std::pair<int, int>> stack;
  stack.emplace_back(0, 0);
  seen(0, 0) = 1;
  at(1, 1) = 0;

  const int dr[4] = {-1, 1, 0, 0};
  const int dc[4] = {0, 0, -1, 1};
  while (!stack.empty()) {
    const auto [rr, rc] = stack.back();
    int options[4];
    int n_opts = 0;
    for (int k = 0; k < 4; ++k) {
      const int nr = rr + dr[k], nc = rc + dc[k];
      if (nr < 0 || nc < 0 || nr >= rooms || nc >= rooms) continue;
      if (!seen(nr, nc)) options[n_opts++] = k;
    }
    if (n_opts == 0) {
      stack.pop_back();
      continue;
    }
    const int k = options[rng.uniform_index(static_cast<std::uint64_t>(n_opts))];
    const int nr = rr + dr[k], nc = rc + dc[k];
    // Carve the wall between (rr, rc) and (nr, nc), then the room itself.
    at(1 + rr + nr, 1 + rc + nc) = 0;
    at(1 + 2 * nr, 1 + 2 * nc) = 0;
    seen(nr, nc) = 1;
    stack.emplace_back(nr, nc);
  }
  return g;
}

CuboidSet generate_blocks3d(std::uint64_t seed, double density) {
  if (density < 0.0 || density >= 0.5)
    throw std::invalid_argument(
        "generate_blocks3d: density must be in [0, 0.5)");

  CuboidSet out;
  Rng rng(seed);
  double volume = 0.0;
  while (volume < density) {
    Aabb box;
    double edges[3];
    for (int ax = 0; ax < 3; ++ax) edges[ax] = rng.uniform(0.05, 0.30);
    for (int ax = 0; ax < 3; ++ax) {
      const double lo = rng.uniform() * (1.0 - edges[ax]);
      box.lo[ax] = lo;
      box.hi[ax] = lo + edges[ax];
    }
    out.boxes.push_back(box);
    volume += edges[0] * edges[1] * edges[2];
  }
  return out;
}

}  // namespace nextmp
