#pragma once

#include <string>

#include "pcv2/tokens.hpp"

namespace pcv2 {

// Token grid text format: first line "h w V", then h lines of w integers.
std::string token_grid_to_text(const TokenGrid& grid);
TokenGrid token_grid_from_text(const std::string& text);
void save_token_grid(const TokenGrid& grid, const std::string& path);
TokenGrid load_token_grid(const std::string& path);

}  // namespace pcv2
