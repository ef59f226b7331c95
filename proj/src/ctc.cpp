#include "slu/ctc.hpp"

#include <cmath>
#include <string>

#include "slu/errors.hpp"

namespace slu {

std::size_t ctc_min_frames(std::span<const int> target) {
  std::size_t frames = target.size();
  for (std::size_t i = 1; i < target.size(); ++i) {
    if (target[i] == target[i - 1]) ++frames;
  }
  return frames;
}

Matrix log_softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (std::size_t t = 0; t < logits.rows(); ++t) {
    const Vector row = log_softmax(logits.row(t));
    std::copy(row.begin(), row.end(), out.row(t).begin());
  }
  return out;
}

namespace {

void validate(const Matrix& log_probs, std::span<const int> target) {
  const std::size_t vocab = log_probs.cols();
  if (vocab < 2) throw ShapeError("ctc: vocabulary must contain blank plus one label");
  for (int label : target) {
    if (label <= kBlank || static_cast<std::size_t>(label) >= vocab) {
      throw DomainError("ctc: target label " + std::to_string(label) + " outside [1, " +
                        std::to_string(vocab - 1) + "]");
    }
  }
  const std::size_t needed = ctc_min_frames(target);
  if (needed > log_probs.rows()) {
    throw InfeasibleAlignmentError("ctc: target needs " + std::to_string(needed) +
                                   " frames, only " + std::to_string(log_probs.rows()) +
                                   " available");
  }
}

}  // namespace

CtcResult ctc_loss(const Matrix& log_probs, std::span<const int> target) {
  validate(log_probs, target);
  const std::size_t frames = log_probs.rows();
  const std::size_t vocab = log_probs.cols();
  for (std::size_t t = 0; t < frames; ++t) {
    const double mass = logsumexp(log_probs.row(t));
    if (!(std::abs(mass) <= 1e-9)) {
      throw DomainError("ctc: row " + std::to_string(t) + " is not a normalized log-distribution");
    }
  }

  // Blank-interleaved target: blank, l1, blank, l2, ..., lL, blank.
  const std::size_t states = 2 * target.size() + 1;
  std::vector<int> ext(states, kBlank);
  for (std::size_t i = 0; i < target.size(); ++i) ext[2 * i + 1] = target[i];
  auto can_skip = [&](std::size_t s) { return s >= 2 && ext[s] != kBlank && ext[s] != ext[s - 2]; };

  // alpha includes the emission at t; beta covers frames after t only.
  Matrix alpha(frames, states, kNegInf);
  Matrix beta(frames, states, kNegInf);

  alpha(0, 0) = log_probs(0, ext[0]);
  if (states > 1) alpha(0, 1) = log_probs(0, ext[1]);
  for (std::size_t t = 1; t < frames; ++t) {
    for (std::size_t s = 0; s < states; ++s) {
      double acc = alpha(t - 1, s);
      if (s >= 1) acc = log_add(acc, alpha(t - 1, s - 1));
      if (can_skip(s)) acc = log_add(acc, alpha(t - 1, s - 2));
      alpha(t, s) = acc == kNegInf ? kNegInf : acc + log_probs(t, ext[s]);
    }
  }

  beta(frames - 1, states - 1) = 0.0;
  if (states > 1) beta(frames - 1, states - 2) = 0.0;
  for (std::size_t t = frames - 1; t-- > 0;) {
    for (std::size_t s = 0; s < states; ++s) {
      double acc = beta(t + 1, s) + log_probs(t + 1, ext[s]);
      if (s + 1 < states) acc = log_add(acc, beta(t + 1, s + 1) + log_probs(t + 1, ext[s + 1]));
      if (s + 2 < states && can_skip(s + 2)) {
        acc = log_add(acc, beta(t + 1, s + 2) + log_probs(t + 1, ext[s + 2]));
      }
      beta(t, s) = acc;
    }
  }

  double log_likelihood = alpha(frames - 1, states - 1);
  if (states > 1) log_likelihood = log_add(log_likelihood, alpha(frames - 1, states - 2));
  if (log_likelihood == kNegInf) {
    throw InfeasibleAlignmentError("ctc: target has zero probability under the given frames");
  }

  CtcResult result;
  result.nll = -log_likelihood;
  result.grad = Matrix(frames, vocab);
  Vector occupancy(vocab);
  for (std::size_t t = 0; t < frames; ++t) {
    std::fill(occupancy.begin(), occupancy.end(), kNegInf);
    for (std::size_t s = 0; s < states; ++s) {
      occupancy[ext[s]] = log_add(occupancy[ext[s]], alpha(t, s) + beta(t, s));
    }
    for (std::size_t k = 0; k < vocab; ++k) {
      const double posterior = std::exp(occupancy[k] - log_likelihood);
      result.grad(t, k) = std::exp(log_probs(t, k)) - posterior;
    }
  }
  return result;
}

CtcResult ctc_loss_from_logits(const Matrix& logits, std::span<const int> target) {
  return ctc_loss(log_softmax_rows(logits), target);
}

std::vector<int> ctc_greedy_decode(const Matrix& log_probs) {
  std::vector<int> out;
  int previous = -1;
  for (std::size_t t = 0; t < log_probs.rows(); ++t) {
    const int best = static_cast<int>(argmax(log_probs.row(t)));
    if (best != previous && best != kBlank) out.push_back(best);
    previous = best;
  }
  return out;
}

}  // namespace slu
