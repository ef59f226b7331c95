#pragma once

#include <cstddef>

#include "slu/numerics.hpp"

namespace slu {

// T x F frames plus the duration each frame covers.
struct FeatureSequence {
  Matrix frames;
  double frame_duration_s = 0.01;

  std::size_t length() const noexcept { return frames.rows(); }
  std::size_t dim() const noexcept { return frames.cols(); }
  double duration_s() const noexcept {
    return static_cast<double>(frames.rows()) * frame_duration_s;
  }

  friend bool operator==(const FeatureSequence&, const FeatureSequence&) = default;
};

}  // namespace slu
