#pragma once

#include <cstddef>
#include <cstdint>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "lifenet/errors.hpp"

namespace lifenet {

/// Rectangular Life configuration. Cells are stored row-major, 1 = alive.
/// Everything outside the grid is permanently dead.
class Board {
 public:
  Board(std::size_t height, std::size_t width)
      : height_(height), width_(width), cells_(height * width, 0) {
    if (height == 0 || width == 0) throw InvalidShape("Board: height and width must be >= 1");
  }

  Board(std::size_t height, std::size_t width, std::vector<std::uint8_t> cells)
      : height_(height), width_(width), cells_(std::move(cells)) {
    if (height == 0 || width == 0) throw InvalidShape("Board: height and width must be >= 1");
    if (cells_.size() != height * width)
      throw InvalidShape("Board: expected " + std::to_string(height * width) + " cells, got " +
                         std::to_string(cells_.size()));
    for (auto c : cells_)
      if (c > 1) throw InvalidArgument("Board: cell values must be 0 or 1");
  }

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t size() const { return cells_.size(); }

  std::uint8_t operator()(std::size_t y, std::size_t x) const { return cells_[y * width_ + x]; }
  void set(std::size_t y, std::size_t x, bool alive) { cells_[y * width_ + x] = alive ? 1 : 0; }

  const std::vector<std::uint8_t>& cells() const { return cells_; }

  std::size_t alive_count() const {
    std::size_t n = 0;
    for (auto c : cells_) n += c;
    return n;
  }

  friend bool operator==(const Board&, const Board&) = default;

 private:
  std::size_t height_;
  std::size_t width_;
  std::vector<std::uint8_t> cells_;
};

/// Number of live cells among the (up to) eight neighbours of (y, x).
inline int live_neighbors(const Board& board, std::size_t y, std::size_t x) {
  int count = 0;
  const auto h = static_cast<std::ptrdiff_t>(board.height());
  const auto w = static_cast<std::ptrdiff_t>(board.width());
  for (std::ptrdiff_t dy = -1; dy <= 1; ++dy) {
    for (std::ptrdiff_t dx = -1; dx <= 1; ++dx) {
      if (dy == 0 && dx == 0) continue;
      const auto yy = static_cast<std::ptrdiff_t>(y) + dy;
      const auto xx = static_cast<std::ptrdiff_t>(x) + dx;
      if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
      count += board(static_cast<std::size_t>(yy), static_cast<std::size_t>(xx));
    }
  }
  return count;
}

/// The Life rule for one cell.
constexpr bool next_state(bool alive, int neighbors) {
  return neighbors == 3 || (neighbors == 2 && alive);
}

/// Per-cell evaluation of the rule. Slow; kept as the oracle for step().
inline Board step_reference(const Board& board) {
  const std::size_t h = board.height(), w = board.width();
  std::vector<std::uint8_t> next(h * w, 0);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      next[y * w + x] = next_state(board(y, x) != 0, live_neighbors(board, y, x)) ? 1 : 0;
  return Board(h, w, std::move(next));
}

/// One Life step. Works on a zero-bordered copy with separable 3x3 window sums.
inline Board step(const Board& board) {
  const std::size_t h = board.height(), w = board.width();
  const std::size_t wp = w + 2;
  std::vector<std::uint8_t> padded((h + 2) * wp, 0);
  for (std::size_t y = 0; y < h; ++y)
    std::copy_n(board.cells().data() + y * w, w, padded.data() + (y + 1) * wp + 1);
  // Horizontal 3-sums of every padded row.
  std::vector<std::uint8_t> rows((h + 2) * w);
  for (std::size_t y = 0; y < h + 2; ++y) {
    const std::uint8_t* r = padded.data() + y * wp;
    std::uint8_t* out = rows.data() + y * w;
    for (std::size_t x = 0; x < w; ++x) out[x] = static_cast<std::uint8_t>(r[x] + r[x + 1] + r[x + 2]);
  }
  std::vector<std::uint8_t> next(h * w);
  for (std::size_t y = 0; y < h; ++y) {
    const std::uint8_t* a = rows.data() + y * w;
    const std::uint8_t* b = a + w;
    const std::uint8_t* c = b + w;
    const std::uint8_t* self = board.cells().data() + y * w;
    std::uint8_t* out = next.data() + y * w;
    for (std::size_t x = 0; x < w; ++x) {
      // Window total includes the cell itself: alive next iff total == 3, or total == 4 and alive.
      const int total = a[x] + b[x] + c[x];
      out[x] = static_cast<std::uint8_t>((total == 3) | ((total == 4) & self[x]));
    }
  }
  return Board(h, w, std::move(next));
}

inline Board step_n(Board board, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) board = step(board);
  return board;
}

/// Parses the fixture format: one row per line, '0'/'1' characters.
/// Blank lines and trailing whitespace are ignored.
inline Board parse_board(std::string_view text) {
  std::vector<std::uint8_t> cells;
  std::size_t width = 0, height = 0;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t'))
      line.pop_back();
    if (line.empty()) continue;
    if (height == 0) width = line.size();
    if (line.size() != width)
      throw ParseError("board: row " + std::to_string(height + 1) + " has " +
                       std::to_string(line.size()) + " cells, expected " + std::to_string(width));
    for (char ch : line) {
      if (ch != '0' && ch != '1')
        throw ParseError("board: row " + std::to_string(height + 1) +
                         " contains invalid character '" + std::string(1, ch) + "'");
      cells.push_back(ch == '1' ? 1 : 0);
    }
    ++height;
  }
  if (height == 0) throw ParseError("board: no rows");
  return Board(height, width, std::move(cells));
}

inline std::string format_board(const Board& board) {
  std::string out;
  out.reserve(board.height() * (board.width() + 1));
  for (std::size_t y = 0; y < board.height(); ++y) {
    for (std::size_t x = 0; x < board.width(); ++x) out.push_back(board(y, x) ? '1' : '0');
    out.push_back('\n');
  }
  return out;
}

}  // namespace lifenet
