#include "cite/sampling.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <string>

#include "cite/error.hpp"

namespace cite {

std::vector<std::size_t> sample_fewshot(const SynthDataset& ds, std::span<const std::size_t> pool, std::size_t shots,
                                        std::span<const std::size_t> classes, std::uint64_t seed) {
  if (shots == 0) fail(ErrorCode::kInvalidArgument, "shots must be >= 1");
  std::vector<std::size_t> out;
  out.reserve(shots * classes.size());
  for (std::size_t cls : classes) {
    std::vector<std::size_t> rows;
    for (std::size_t r : pool) {
      if (r >= ds.rows()) fail(ErrorCode::kInvalidArgument, "pool row " + std::to_string(r) + " outside dataset");
      if (ds.class_ids[r] == cls) rows.push_back(r);
    }
    std::sort(rows.begin(), rows.end());
    if (rows.size() < shots) {
      fail(ErrorCode::kInsufficientExamples, "class " + std::to_string(cls) + " has " + std::to_string(rows.size()) +
                                                 " rows, need " + std::to_string(shots));
    }
    if (rows.size() > shots) {
      std::seed_seq seq{seed, static_cast<std::uint64_t>(cls), std::uint64_t{0xf5}};
      std::mt19937_64 rng(seq);
      std::shuffle(rows.begin(), rows.end(), rng);
      rows.resize(shots);
      std::sort(rows.begin(), rows.end());
    }
    out.insert(out.end(), rows.begin(), rows.end());
  }
  return out;
}

std::vector<std::size_t> sample_fewshot(const SynthDataset& ds, std::size_t shots, std::span<const std::size_t> classes,
                                        std::uint64_t seed) {
  std::vector<std::size_t> all(ds.rows());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return sample_fewshot(ds, all, shots, classes, seed);
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size, std::uint64_t seed,
                                                   std::size_t epoch) {
  if (n < 2) fail(ErrorCode::kBatchTooSmall, "need at least 2 rows to form a batch");
  if (batch_size < 2) fail(ErrorCode::kBatchTooSmall, "batch_size must be >= 2");
  if (batch_size > n) {
    fail(ErrorCode::kInvalidArgument,
         "batch_size " + std::to_string(batch_size) + " exceeds subset size " + std::to_string(n));
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::seed_seq seq{seed, static_cast<std::uint64_t>(epoch), std::uint64_t{0xba7c4}};
  std::mt19937_64 rng(seq);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    if (end - start < 2) {
      batches.back().insert(batches.back().end(), order.begin() + static_cast<std::ptrdiff_t>(start), order.end());
      break;
    }
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start), order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

}  // namespace cite
