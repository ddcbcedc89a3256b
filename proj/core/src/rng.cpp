#include "ita/rng.hpp"

namespace ita {

std::uint64_t Rng::next_below(std::uint64_t bound) {
  // Rejection sampling on the top of the range to stay unbiased.
  const std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    std::uint64_t r = next_u64();
    if (r >= threshold) return r % bound;
  }
}

Rng Rng::fork(std::string_view label) const {
  // FNV-1a over the label, mixed with the current state.
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (char c : label) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ull;
  }
  return Rng(state_ ^ (h | 1ull));
}

}  // namespace ita
