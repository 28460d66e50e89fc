#include "hevs/pattern.hpp"

#include "hevs/error.hpp"

namespace hevs {
namespace {

CfaColor quad_color(int row, int col) {
  const bool top = row < 2;
  const bool left = col < 2;
  if (top && left) return CfaColor::Red;
  if (!top && !left) return CfaColor::Blue;
  return CfaColor::Green;
}

void check_coord(const PatternSpec::Coord& c) {
  require(c.first >= 0 && c.first < 4 && c.second >= 0 && c.second < 4, ErrorCode::Config,
          "event coordinate (" + std::to_string(c.first) + "," + std::to_string(c.second) +
              ") lies outside the 4x4 tile");
}

}  // namespace

char cfa_char(CfaColor c) noexcept {
  switch (c) {
    case CfaColor::Red: return 'R';
    case CfaColor::Green: return 'G';
    case CfaColor::Blue: return 'B';
    case CfaColor::Event: return 'E';
  }
  return '?';
}

int channel_of(CfaColor c) noexcept {
  switch (c) {
    case CfaColor::Red: return 0;
    case CfaColor::Green: return 1;
    case CfaColor::Blue: return 2;
    case CfaColor::Event: return -1;
  }
  return -1;
}

PatternSpec::PatternSpec() : PatternSpec(with_events({1, 1}, {2, 2})) {}

PatternSpec PatternSpec::with_events(Coord first, Coord second) {
  check_coord(first);
  check_coord(second);
  require(first != second, ErrorCode::Config, "event coordinates must be distinct");
  PatternSpec p{Blank{}};
  for (int r = 0; r < kPeriod; ++r)
    for (int c = 0; c < kPeriod; ++c) p.tile_[static_cast<std::size_t>(r * kPeriod + c)] = quad_color(r, c);
  for (const auto& e : {first, second})
    p.tile_[static_cast<std::size_t>(e.first * kPeriod + e.second)] = CfaColor::Event;
  p.events_ = {first, second};
  return p;
}

PatternSpec PatternSpec::parse(std::string_view tile, Coord first, Coord second) {
  require(tile.size() == 16, ErrorCode::Config,
          "pattern tile must have 16 characters, got " + std::to_string(tile.size()));
  PatternSpec expected = with_events(first, second);
  for (std::size_t i = 0; i < 16; ++i) {
    const char want = cfa_char(expected.tile_[i]);
    require(tile[i] == want, ErrorCode::Config,
            "pattern tile '" + std::string(tile) + "' disagrees with Quad Bayer + events at index " +
                std::to_string(i) + " (expected '" + want + "')");
  }
  return expected;
}

std::string PatternSpec::tile_string() const {
  std::string s;
  s.reserve(16);
  for (CfaColor c : tile_) s.push_back(cfa_char(c));
  return s;
}

}  // namespace hevs
