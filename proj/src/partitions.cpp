#include "kmarket/partitions.hpp"

#include <algorithm>
#include <numeric>

#include "kmarket/error.hpp"

namespace kmarket {

std::vector<IntegerPartition> enumerate_partitions(std::size_t n, std::size_t min_part) {
  if (min_part < 1) throw Error(Errc::invalid_argument, "min_part must be at least 1");
  if (n < min_part)
    throw Error(Errc::infeasible_partition,
                "cannot partition " + std::to_string(n) + " into parts of at least " + std::to_string(min_part));

  std::vector<IntegerPartition> out;
  IntegerPartition current;
  auto extend = [&](auto&& self, std::size_t remaining, std::size_t largest) -> void {
    if (remaining == 0) {
      out.push_back(current);
      return;
    }
    for (std::size_t part = std::min(remaining, largest); part >= min_part; --part) {
      // A remainder smaller than min_part can never be completed.
      if (remaining - part != 0 && remaining - part < min_part) continue;
      current.push_back(part);
      self(self, remaining - part, part);
      current.pop_back();
    }
  };
  extend(extend, n, n);
  return out;
}

void for_each_set_partition(std::span<const std::size_t> shape,
                            const std::function<void(const std::vector<std::vector<std::size_t>>&)>& visit) {
  const std::size_t n = std::accumulate(shape.begin(), shape.end(), std::size_t{0});
  if (n == 0) return;

  // Remaining block sizes, as counts per size so equal sizes are not permuted.
  const std::size_t largest = *std::max_element(shape.begin(), shape.end());
  std::vector<std::size_t> remaining(largest + 1, 0);
  for (std::size_t s : shape) {
    if (s == 0) throw Error(Errc::invalid_argument, "zero-size block in shape");
    ++remaining[s];
  }

  std::vector<bool> used(n, false);
  std::vector<std::vector<std::size_t>> blocks;

  // Fill the block started by `first` with members chosen above `next`.
  auto recurse = [&](auto&& self) -> void {
    auto first_free = std::find(used.begin(), used.end(), false);
    if (first_free == used.end()) {
      visit(blocks);
      return;
    }
    const auto first = static_cast<std::size_t>(first_free - used.begin());
    for (std::size_t size = 1; size <= largest; ++size) {
      if (remaining[size] == 0) continue;
      --remaining[size];
      used[first] = true;
      blocks.push_back({first});
      auto choose = [&](auto&& pick, std::size_t from) -> void {
        if (blocks.back().size() == size) {
          self(self);
          return;
        }
        for (std::size_t i = from; i < n; ++i) {
          if (used[i]) continue;
          used[i] = true;
          blocks.back().push_back(i);
          pick(pick, i + 1);
          blocks.back().pop_back();
          used[i] = false;
        }
      };
      choose(choose, first + 1);
      blocks.pop_back();
      used[first] = false;
      ++remaining[size];
    }
  };
  recurse(recurse);
}

}  // namespace kmarket
