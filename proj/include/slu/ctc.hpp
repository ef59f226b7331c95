#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "slu/numerics.hpp"

namespace slu {

inline constexpr int kBlank = 0;

struct CtcResult {
  double nll = 0.0;
  // d nll / d logits, same shape as the input matrix.
  Matrix grad;
};

// Frames needed to emit `target`: one per label plus one blank between each pair of
// identical neighbours.
std::size_t ctc_min_frames(std::span<const int> target);

// CTC negative log-likelihood of `target` under per-frame log-distributions
// (M x V, column 0 is the blank). Rows must be normalized within 1e-9.
// The gradient is taken with respect to the logits that produced log_probs.
CtcResult ctc_loss(const Matrix& log_probs, std::span<const int> target);

// Same objective, starting from unnormalized logits.
CtcResult ctc_loss_from_logits(const Matrix& logits, std::span<const int> target);

// Row-wise log_softmax.
Matrix log_softmax_rows(const Matrix& logits);

// Per-frame argmax, merge repeats, drop blanks.
std::vector<int> ctc_greedy_decode(const Matrix& log_probs);

}  // namespace slu
