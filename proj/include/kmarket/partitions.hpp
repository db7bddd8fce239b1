#pragma once
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace kmarket {

// Parts listed in non-increasing order.
using IntegerPartition = std::vector<std::size_t>;

// All partitions of n with every part >= min_part, in descending lexicographic order
// ({n} first, the most even split of the smallest parts last).
std::vector<IntegerPartition> enumerate_partitions(std::size_t n, std::size_t min_part = 2);

// Calls `visit` once per set partition of {0..n-1} whose block sizes form `shape`
// (n = sum of shape). Blocks are ordered by their smallest element and each block is
// sorted ascending, so the block index of each element is a restricted growth string.
void for_each_set_partition(std::span<const std::size_t> shape,
                            const std::function<void(const std::vector<std::vector<std::size_t>>&)>& visit);

}  // namespace kmarket
