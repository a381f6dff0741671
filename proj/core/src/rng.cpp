#include "fedsim/rng.hpp"

#include <algorithm>
#include <stdexcept>

namespace fedsim {

std::vector<int> sample_without_replacement(const std::vector<int>& pool, std::size_t k,
                                            Rng& rng) {
  if (k > pool.size()) {
    throw std::invalid_argument("sample_without_replacement: k exceeds pool size");
  }
  std::vector<int> scratch = pool;
  // Partial Fisher-Yates: the first k slots end up holding the sample.
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(scratch.size() - i));
    std::swap(scratch[i], scratch[j]);
  }
  scratch.resize(k);
  std::sort(scratch.begin(), scratch.end());
  return scratch;
}

}  // namespace fedsim
