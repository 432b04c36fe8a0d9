#include "aslrlab/measure.hpp"

#include <algorithm>
#include <cmath>

namespace aslrlab {

MeasurePolicy MeasurePolicy::median_of_k(int k) {
  if (k < 3 || k % 2 == 0) throw ConfigError("median_of_k needs odd k >= 3");
  return {Kind::MedianOfK, k};
}

Cycles measure(Prober& p, MaskedOp op, VirtAddr addr, bool mask_zero,
               const MeasurePolicy& policy) {
  if (policy.kind == MeasurePolicy::Kind::SecondOfTwo) {
    p.probe(op, addr, mask_zero);
    return p.probe(op, addr, mask_zero).latency;
  }
  if (policy.k < 3 || policy.k % 2 == 0)
    throw ConfigError("median_of_k needs odd k >= 3");
  std::vector<Cycles> v(static_cast<size_t>(policy.k));
  for (auto& x : v) x = p.probe(op, addr, mask_zero).latency;
  auto mid = v.begin() + policy.k / 2;
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

Threshold calibrate_threshold(Prober& p, int n) {
  if (n < 100) throw ConfigError("threshold calibration needs at least 100 samples");
  const VirtAddr page = p.calibration_page(PagePerms::Rw);
  // Warm-up absorbs the one cold walk; the zero mask leaves the page clean,
  // so every subsequent store pays the dirty-tracking assist.
  p.probe(MaskedOp::Store, page, true);
  uint64_t sum = 0;
  for (int i = 0; i < n; i++) sum += p.probe(MaskedOp::Store, page, true).latency;
  Threshold t;
  t.value = static_cast<Cycles>(std::llround(static_cast<double>(sum) / n));
  t.source = "zero-mask-store-mean";
  t.sample_count = n;
  return t;
}

}  // namespace aslrlab
