#include "slu/metrics.hpp"

#include "slu/errors.hpp"

namespace slu {

double error_rate(const AlignmentCounts& corpus_counts) {
  if (corpus_counts.ref_len == 0) {
    throw DomainError("error rate undefined for an empty reference");
  }
  return static_cast<double>(corpus_counts.errors()) /
         static_cast<double>(corpus_counts.ref_len);
}

}  // namespace slu
