#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "cite/datagen.hpp"

namespace cite {

/// Draws exactly `shots` rows per requested class, without replacement, from
/// `pool` (row indices into ds). Output is grouped by the order of `classes`
/// and sorted within each class. Deterministic per seed.
std::vector<std::size_t> sample_fewshot(const SynthDataset& ds, std::span<const std::size_t> pool, std::size_t shots,
                                        std::span<const std::size_t> classes, std::uint64_t seed);
std::vector<std::size_t> sample_fewshot(const SynthDataset& ds, std::size_t shots, std::span<const std::size_t> classes,
                                        std::uint64_t seed);

/// Shuffles positions 0..n-1 with a generator seeded by (seed, epoch) and
/// slices contiguous batches. A tail shorter than 2 rows is merged into the
/// previous batch.
std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size, std::uint64_t seed,
                                                   std::size_t epoch);

}  // namespace cite
