#include "aslrlab/prober.hpp"

namespace aslrlab {

SimProber::SimProber(MicroarchSim* sim) : sim_(sim) {}

ProbeSample SimProber::probe(MaskedOp op, VirtAddr addr, bool mask_zero) {
  return sim_->probe(op, addr, mask_zero);
}

void SimProber::evict_tlb() {
  using namespace layout;
  // 32 chunks x 64 pages = 2048 distinct 4-KiB translations, 1.33x the TLB,
  // in 32 distinct top-level slots: rolls over the TLB and every
  // upper-level cache regardless of prior contents (exact LRU).
  for (int c = 0; c < kEvictChunks; c++) {
    const VirtAddr base = kEvictChunkBase + static_cast<uint64_t>(c) * kEvictChunkStride;
    for (int i = 0; i < kEvictChunkPages; i++)
      sim_->probe(MaskedOp::Load, base + static_cast<uint64_t>(i) * kPage4K, false);
  }
}

VirtAddr SimProber::calibration_page(PagePerms perms) {
  using namespace layout;
  const int cap = kCalibPagesPerClass;
  auto slot = [&](VirtAddr base, int idx) { return base + static_cast<uint64_t>(idx) * kPage4K; };
  switch (perms) {
    case PagePerms::Rw: {
      if (rw_next_ + rw_dirty_next_ >= cap)
        throw ConfigError("calibration pool exhausted (rw)");
      return slot(kCalibArenaBase, rw_next_++);
    }
    case PagePerms::RwDirty: {
      if (rw_next_ + rw_dirty_next_ >= cap)
        throw ConfigError("calibration pool exhausted (rw)");
      const VirtAddr page = slot(kCalibArenaBase, cap - 1 - rw_dirty_next_++);
      sim_->probe(MaskedOp::Store, page, false);  // nonzero mask commits the dirty bit
      return page;
    }
    case PagePerms::Ro:
      return slot(kCalibArenaBase + 0x10000, ro_next_++ % cap);
    case PagePerms::Rx:
      return slot(kCalibArenaBase + 0x20000, rx_next_++ % cap);
    case PagePerms::None:
      return slot(kCalibArenaBase + 0x30000, none_next_++ % cap);
  }
  throw ConfigError("bad calibration page class");
}

uint64_t SimProber::probes_issued() const { return sim_->probes_issued(); }

ProfileHints SimProber::hints() const {
  const TimingProfile& p = sim_->profile();
  ProfileHints h;
  h.profile_name = p.name;
  h.amd_mode = p.amd_mode;
  h.walk_per_level = p.walk_per_level;
  h.pt_extra = p.pt_extra;
  h.nonpresent_extra = p.nonpresent_extra;
  return h;
}

}  // namespace aslrlab
