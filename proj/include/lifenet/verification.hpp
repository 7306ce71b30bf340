#pragma once

#include <cstdint>
#include <vector>

#include "lifenet/board.hpp"
#include "lifenet/datasets.hpp"
#include "lifenet/network.hpp"

namespace lifenet {

struct HandWeightReport {
  int n = 0;
  std::size_t local_cases = 0;
  std::size_t local_passed = 0;
  std::size_t boards = 0;
  std::size_t boards_passed = 0;
  std::size_t wrong_cells = 0;

  bool passed() const { return local_passed == local_cases && boards_passed == boards; }
};

/// Checks hand_engineered_weights(n) against the Life engine: every one of the
/// 512 3x3 boards (all cells, dead outside), then `random_boards` 32x32 boards.
inline HandWeightReport verify_hand_weights(int n, std::size_t random_boards = 1000, std::uint64_t seed = 1) {
  HandWeightReport rep;
  rep.n = n;
  const auto net = hand_engineered_weights<float>(n);
  const auto steps = static_cast<std::size_t>(n);

  std::vector<Board> local;
  for (unsigned mask = 0; mask < 512; ++mask) {
    std::vector<std::uint8_t> cells(9);
    for (unsigned i = 0; i < 9; ++i) cells[i] = (mask >> i) & 1u;
    local.emplace_back(3, 3, std::move(cells));
  }
  const auto out = forward_batch(net, boards_to_tensor<float>(local));
  for (std::size_t i = 0; i < local.size(); ++i) {
    ++rep.local_cases;
    if (threshold_board(out, i) == step_n(local[i], steps)) ++rep.local_passed;
  }

  Rng rng(seed);
  constexpr std::size_t kChunk = 50;
  for (std::size_t done = 0; done < random_boards; done += kChunk) {
    const std::size_t len = std::min(kChunk, random_boards - done);
    std::vector<Board> boards;
    for (std::size_t i = 0; i < len; ++i) boards.push_back(sample_board(DensitySpec::uniform(), rng));
    const auto probs = forward_batch(net, boards_to_tensor<float>(boards));
    for (std::size_t i = 0; i < len; ++i) {
      ++rep.boards;
      const auto predicted = threshold_board(probs, i);
      const auto truth = step_n(boards[i], steps);
      std::size_t wrong = 0;
      for (std::size_t c = 0; c < truth.size(); ++c) wrong += predicted.cells()[c] != truth.cells()[c];
      rep.wrong_cells += wrong;
      if (wrong == 0) ++rep.boards_passed;
    }
  }
  return rep;
}

}  // namespace lifenet
