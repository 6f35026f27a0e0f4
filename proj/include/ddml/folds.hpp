#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace ddml {

// Random partition of {0..n-1} into K folds whose sizes differ by at most one.
// Folds are 0-based internally; exported files use 1-based fold labels.
struct FoldAssignment {
  std::size_t n = 0;
  int k = 0;
  std::vector<int> fold_of;
  std::uint64_t seed = 0;

  std::vector<int> members(int fold) const;      // I_k, ascending
  std::vector<int> complement(int fold) const;   // T_k = I \ I_k, ascending
  std::vector<std::size_t> sizes() const;
};

// Shuffles the indices and deals position t to fold t mod K, so the first
// n mod K folds receive the extra observation. Throws ConfigError unless
// 2 <= K <= n.
FoldAssignment make_folds(std::size_t n, int k, std::uint64_t seed);

// Same dealing rule applied to each stratum in turn, continuing the position
// counter across strata: sizes still differ by at most one and every stratum
// is spread over the folds as evenly as possible.
FoldAssignment make_stratified_folds(const std::vector<int>& strata, int k, std::uint64_t seed);

// R distinct per-repetition seeds; the first equals base_seed.
std::vector<std::uint64_t> repeat_plan(int repetitions, std::uint64_t base_seed);

}  // namespace ddml
