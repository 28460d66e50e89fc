#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>

namespace hevs {

enum class CfaColor : std::uint8_t { Red, Green, Blue, Event };

char cfa_char(CfaColor c) noexcept;

// Index of the RGB channel a color samples. Event has none and returns -1.
int channel_of(CfaColor c) noexcept;

// 4x4 HybridEVS tile: Quad Bayer (R quad top-left, G top-right and
// bottom-left, B bottom-right) with exactly two positions replaced by event
// pixels.
class PatternSpec {
 public:
  static constexpr int kPeriod = 4;
  using Coord = std::pair<int, int>;

  // Quad Bayer with events at (1,1) and (2,2).
  PatternSpec();

  static PatternSpec with_events(Coord first, Coord second);

  // Parses the 16-character row-major tile (R/G/B/E) and checks it against
  // the listed event coordinates. Throws Error(Config) on any mismatch.
  static PatternSpec parse(std::string_view tile, Coord first, Coord second);

  CfaColor at(int row, int col) const noexcept {
    return tile_[static_cast<std::size_t>((row & 3) * kPeriod + (col & 3))];
  }
  const std::array<Coord, 2>& event_coords() const noexcept { return events_; }
  bool is_event(int row, int col) const noexcept { return at(row, col) == CfaColor::Event; }

  std::string tile_string() const;

  friend bool operator==(const PatternSpec&, const PatternSpec&) = default;

 private:
  struct Blank {};
  explicit PatternSpec(Blank) {}

  std::array<CfaColor, 16> tile_{};
  std::array<Coord, 2> events_{};
};

inline CfaColor color_at(const PatternSpec& pattern, int row, int col) noexcept {
  return pattern.at(row, col);
}

}  // namespace hevs
