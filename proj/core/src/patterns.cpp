#include "mcua/patterns.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "mcua/errors.hpp"

namespace mcua {

Direction parse_direction(const std::string& word) {
  if (word == "up") return Direction::up;
  if (word == "down") return Direction::down;
  if (word == "left") return Direction::left;
  if (word == "right") return Direction::right;
  throw ValidationError("unknown direction word: '" + word + "'");
}

const char* direction_name(Direction d) {
  switch (d) {
    case Direction::up: return "up";
    case Direction::down: return "down";
    case Direction::left: return "left";
    case Direction::right: return "right";
  }
  return "?";
}

std::vector<PatternPlacement> get_pattern_indices(const PatchGrid& grid,
                                                  const PatternSpec& spec, int anchor) {
  const int cells = grid.cols * grid.rows;
  if (anchor < 0 || anchor >= cells)
    throw ValidationError("pattern anchor " + std::to_string(anchor) + " outside grid of " +
                          std::to_string(cells));
  if (spec.g < 2) throw ValidationError("pattern " + spec.id + ": g must be >= 2");
  for (const auto& shape : spec.shapes)
    if (static_cast<int>(shape.size()) != spec.g - 1)
      throw ValidationError("pattern " + spec.id + ": shape length must be g-1");

  std::vector<PatternPlacement> out;
  for (const auto& shape : spec.shapes) {
    int c = anchor % grid.cols;
    int r = anchor / grid.cols;
    PatternPlacement pl;
    pl.anchor = anchor;
    pl.members.push_back(anchor);
    bool ok = true;
    for (Direction d : shape) {
      switch (d) {
        case Direction::up: --r; break;
        case Direction::down: ++r; break;
        case Direction::left: --c; break;
        case Direction::right: ++c; break;
      }
      if (c < 0 || c >= grid.cols || r < 0 || r >= grid.rows) {
        ok = false;  // walked off the grid; this shape contributes nothing here
        break;
      }
      const int idx = r * grid.cols + c;
      bool revisit = false;
      for (int m : pl.members)
        if (m == idx) revisit = true;
      if (revisit) {
        ok = false;  // self-crossing walk; placement would repeat a member
        break;
      }
      pl.members.push_back(idx);
    }
    if (ok) out.push_back(std::move(pl));
  }
  return out;
}

std::vector<PatternPlacement> enumerate_placements(const PatchGrid& grid,
                                                   const PatternSpec& spec) {
  std::vector<PatternPlacement> out;
  std::set<std::vector<int>> seen;
  const int cells = grid.cols * grid.rows;
  for (int anchor = 0; anchor < cells; ++anchor) {
    for (auto& pl : get_pattern_indices(grid, spec, anchor)) {
      if (seen.insert(pl.members).second) out.push_back(std::move(pl));
    }
  }
  return out;
}

std::vector<PatternSpec> default_pattern_library() {
  auto mk = [](const std::string& id, int g,
               std::vector<std::vector<Direction>> shapes) {
    PatternSpec s;
    s.id = id;
    s.g = g;
    s.shapes = std::move(shapes);
    return s;
  };
  using D = Direction;
  return {
      mk("P2_S1", 2, {{D::right}, {D::down}}),
      mk("P3_S1", 3, {{D::right, D::right}, {D::down, D::right}}),
      mk("P4_S1", 4, {{D::right, D::down, D::left}}),
      mk("P4_S2", 4, {{D::down, D::left, D::left}}),
      mk("P5_S1", 5, {{D::right, D::right, D::down, D::left}}),
      mk("P6_S1", 6, {{D::right, D::right, D::down, D::left, D::left}}),
      mk("P8_S1", 8, {{D::right, D::right, D::down, D::left, D::left, D::down, D::right}}),
  };
}

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

std::vector<PatternSpec> parse_pattern_library(const std::string& text,
                                               const std::string& origin) {
  std::vector<PatternSpec> out;
  std::set<std::string> ids;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto where = origin + ":" + std::to_string(lineno);
    const size_t colon = t.find(':');
    if (colon == std::string::npos)
      throw ValidationError("pattern library " + where + ": missing ':'");
    PatternSpec spec;
    spec.id = trim(t.substr(0, colon));
    if (spec.id.empty()) throw ValidationError("pattern library " + where + ": empty id");
    if (!ids.insert(spec.id).second)
      throw ValidationError("pattern library " + where + ": duplicate id " + spec.id);

    std::istringstream shapes_in(t.substr(colon + 1));
    std::string shape_str;
    int g = -1;
    while (std::getline(shapes_in, shape_str, ';')) {
      const std::string st = trim(shape_str);
      if (st.empty()) throw ValidationError("pattern library " + where + ": empty shape");
      std::vector<Direction> shape;
      std::istringstream dirs_in(st);
      std::string word;
      while (std::getline(dirs_in, word, ',')) {
        const std::string w = trim(word);
        if (w.empty()) throw ValidationError("pattern library " + where + ": empty direction");
        shape.push_back(parse_direction(w));
      }
      if (shape.empty()) throw ValidationError("pattern library " + where + ": empty shape");
      const int this_g = static_cast<int>(shape.size()) + 1;
      if (g == -1) g = this_g;
      if (this_g != g)
        throw ValidationError("pattern library " + where +
                              ": shapes of one pattern must share a length");
      spec.shapes.push_back(std::move(shape));
    }
    if (spec.shapes.empty())
      throw ValidationError("pattern library " + where + ": no shapes");
    spec.g = g;
    out.push_back(std::move(spec));
  }
  if (out.empty()) throw ValidationError("pattern library " + origin + ": no patterns");
  return out;
}

std::vector<PatternSpec> load_pattern_library(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open pattern library: " + path);
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return parse_pattern_library(text, path);
}

const PatternSpec& find_pattern(const std::vector<PatternSpec>& lib, const std::string& id) {
  for (const auto& p : lib)
    if (p.id == id) return p;
  throw ValidationError("pattern id not in library: " + id);
}

}  // namespace mcua
