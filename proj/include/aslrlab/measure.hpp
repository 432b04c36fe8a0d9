#pragma once

#include <string>

#include "aslrlab/prober.hpp"
#include "aslrlab/types.hpp"

namespace aslrlab {

// Noise discipline for a single address measurement. SecondOfTwo throws
// away the first sample (cold-walk absorber); MedianOfK takes the median
// of k samples, k odd.
struct MeasurePolicy {
  enum class Kind { SecondOfTwo, MedianOfK };
  Kind kind = Kind::MedianOfK;
  int k = 7;

  static MeasurePolicy second_of_two() { return {Kind::SecondOfTwo, 2}; }
  static MeasurePolicy median_of_k(int k);
  int probes_per_measure() const { return kind == Kind::SecondOfTwo ? 2 : k; }
};

Cycles measure(Prober& p, MaskedOp op, VirtAddr addr, bool mask_zero,
               const MeasurePolicy& policy);

// Mapped/unmapped decision threshold. Strict compare: latency < value
// means mapped; ties are unmapped.
struct Threshold {
  Cycles value = 0;
  std::string source;
  int sample_count = 0;
};

// Mean latency of n all-zero-mask stores to a fresh clean writable page,
// after one warm-up store. The zero mask never sets the dirty bit, so
// every sample pays the dirty-tracking assist and the mean lands strictly
// between a cached mapped probe and the cheapest unmapped probe.
Threshold calibrate_threshold(Prober& p, int n = 1000);

}  // namespace aslrlab
