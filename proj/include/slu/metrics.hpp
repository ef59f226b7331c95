#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

namespace slu {

struct AlignmentCounts {
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;
  std::size_t ref_len = 0;

  std::size_t errors() const noexcept { return substitutions + deletions + insertions; }

  AlignmentCounts& operator+=(const AlignmentCounts& other) noexcept {
    substitutions += other.substitutions;
    deletions += other.deletions;
    insertions += other.insertions;
    ref_len += other.ref_len;
    return *this;
  }

  friend bool operator==(const AlignmentCounts&, const AlignmentCounts&) = default;
};

// Unit-cost Levenshtein alignment of hyp against ref. Among optimal alignments the
// backtrace prefers substitution (or match), then insertion, then deletion.
template <typename T>
AlignmentCounts align(std::span<const T> ref, std::span<const T> hyp) {
  const std::size_t n = ref.size();
  const std::size_t m = hyp.size();
  std::vector<std::size_t> cost((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return cost[i * (m + 1) + j]; };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = i;
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = j;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t diag = at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      at(i, j) = std::min({diag, at(i, j - 1) + 1, at(i - 1, j) + 1});
    }
  }

  AlignmentCounts counts;
  counts.ref_len = n;
  std::size_t i = n;
  std::size_t j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0) {
      const bool match = ref[i - 1] == hyp[j - 1];
      if (at(i, j) == at(i - 1, j - 1) + (match ? 0 : 1)) {
        if (!match) ++counts.substitutions;
        --i;
        --j;
        continue;
      }
    }
    if (j > 0 && at(i, j) == at(i, j - 1) + 1) {
      ++counts.insertions;
      --j;
    } else {
      ++counts.deletions;
      --i;
    }
  }
  return counts;
}

template <typename T>
AlignmentCounts align(const std::vector<T>& ref, const std::vector<T>& hyp) {
  return align(std::span<const T>(ref), std::span<const T>(hyp));
}

// (S + D + I) / N as a fraction; not clamped, so it can exceed 1.
// Throws DomainError when N is zero.
double error_rate(const AlignmentCounts& corpus_counts);

}  // namespace slu
