#include "pcv2/gridio.hpp"

#include <fstream>
#include <sstream>

namespace pcv2 {

std::string token_grid_to_text(const TokenGrid& grid) {
  grid.validate();
  std::ostringstream os;
  os << grid.h << ' ' << grid.w << ' ' << grid.V << '\n';
  for (int i = 0; i < grid.h; ++i) {
    for (int j = 0; j < grid.w; ++j) {
      if (j) os << ' ';
      os << grid.at(i, j);
    }
    os << '\n';
  }
  return os.str();
}

TokenGrid token_grid_from_text(const std::string& text) {
  std::istringstream is(text);
  long h = 0, w = 0, v = 0;
  require(static_cast<bool>(is >> h >> w >> v), "token grid: cannot parse header line 'h w V'");
  require(h >= 1 && w >= 1, "token grid: bad dims ", h, "x", w);
  require(v >= 2 && v <= 0xFFFF, "token grid: V out of range: ", v);
  TokenGrid grid(static_cast<int>(h), static_cast<int>(w), static_cast<u32>(v));
  for (std::size_t n = 0; n < grid.positions(); ++n) {
    long val = -1;
    require(static_cast<bool>(is >> val), "token grid: too few indices (expected ",
            grid.positions(), ")");
    require(val >= 0 && static_cast<u32>(val) < grid.V, "token grid: index ", val,
            " out of range [0,", grid.V, ")");
    grid.indices[n] = static_cast<u32>(val);
  }
  long extra;
  require(!(is >> extra), "token grid: trailing data after ", grid.positions(), " indices");
  return grid;
}

void save_token_grid(const TokenGrid& grid, const std::string& path) {
  std::ofstream f(path);
  require(f.good(), "save_token_grid: cannot open ", path);
  f << token_grid_to_text(grid);
  require(f.good(), "save_token_grid: write failed for ", path);
}

TokenGrid load_token_grid(const std::string& path) {
  std::ifstream f(path);
  require(f.good(), "load_token_grid: cannot open ", path);
  std::stringstream ss;
  ss << f.rdbuf();
  return token_grid_from_text(ss.str());
}

}  // namespace pcv2
