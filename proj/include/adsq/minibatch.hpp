#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "adsq/data_model.hpp"

namespace adsq {

// Seed for an independent random stream identified by (base seed, phase, round, epoch).
inline std::uint64_t stream_seed(std::uint64_t base, std::uint64_t phase, std::uint64_t round = 0,
                                 std::uint64_t epoch = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32),
                    static_cast<std::uint32_t>(phase), static_cast<std::uint32_t>(round),
                    static_cast<std::uint32_t>(epoch)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (std::uint64_t{out[0]} << 32) | out[1];
}

// Shuffled partition of 0..n-1 into batches of batch_size. A trailing batch
// with fewer than two items is merged into the previous one, since pair
// losses need at least two items.
inline std::vector<std::vector<Index>> make_batches(Index n, int batch_size, std::uint64_t seed) {
  std::vector<Index> order(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::mt19937_64 rng(seed);
  for (std::size_t i = order.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(order[i - 1], order[pick(rng)]);
  }
  std::vector<std::vector<Index>> batches;
  const auto bs = static_cast<std::size_t>(std::max(batch_size, 2));
  for (std::size_t start = 0; start < order.size(); start += bs) {
    const std::size_t end = std::min(order.size(), start + bs);
    if (end - start < 2 && !batches.empty()) {
      batches.back().insert(batches.back().end(), order.begin() + static_cast<std::ptrdiff_t>(start), order.end());
      break;
    }
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

inline Matrix gather_rows(const Matrix& m, const std::vector<Index>& idx) {
  Matrix out(static_cast<Index>(idx.size()), m.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) out.row(static_cast<Index>(k)) = m.row(idx[k]);
  return out;
}

}  // namespace adsq
