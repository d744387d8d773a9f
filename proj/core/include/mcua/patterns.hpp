#pragma once

#include <string>
#include <vector>

#include "mcua/patches.hpp"

namespace mcua {

enum class Direction { up, down, left, right };

Direction parse_direction(const std::string& word);
const char* direction_name(Direction d);

// A neighborhood template: g grid cells joined by g-1 unit steps. A spec may
// carry several alternative shapes; each contributes placements independently.
struct PatternSpec {
  std::string id;                                 // e.g. "P4_S2"
  int g = 0;                                      // member count
  std::vector<std::vector<Direction>> shapes;     // each of length g-1
};

// One concrete placement: the anchor's grid index followed by the walked
// members, in walk order. Members never repeat and never leave the grid.
struct PatternPlacement {
  int anchor = 0;
  std::vector<int> members;
};

// Walks every shape of `spec` from `anchor` on `grid`. Shapes that step out of
// the grid or revisit a cell yield nothing; an empty result is legal.
std::vector<PatternPlacement> get_pattern_indices(const PatchGrid& grid, const PatternSpec& spec,
                                                  int anchor);

// All placements of `spec` over every anchor of `grid`, deduplicated by member
// sequence (first occurrence wins; anchors scanned in grid order).
std::vector<PatternPlacement> enumerate_placements(const PatchGrid& grid,
                                                   const PatternSpec& spec);

// The seven built-in pattern ids.
std::vector<PatternSpec> default_pattern_library();

// Plain-text library format, one pattern per line:
//   pattern_id: dir,dir,...; dir,dir,...
// Direction words are up/down/left/right; ';' separates alternative shapes.
// Blank lines and lines starting with '#' are ignored.
std::vector<PatternSpec> load_pattern_library(const std::string& path);
std::vector<PatternSpec> parse_pattern_library(const std::string& text,
                                               const std::string& origin);

const PatternSpec& find_pattern(const std::vector<PatternSpec>& lib, const std::string& id);

}  // namespace mcua
