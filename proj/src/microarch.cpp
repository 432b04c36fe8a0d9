#include "aslrlab/microarch.hpp"

#include <algorithm>
#include <cmath>

namespace aslrlab {

const char* name(WalkLevel l) {
  switch (l) {
    case WalkLevel::PT: return "PT";
    case WalkLevel::PD: return "PD";
    case WalkLevel::PDPT: return "PDPT";
    case WalkLevel::PML4: return "PML4";
  }
  return "?";
}

int walk_rank(WalkLevel l) {
  // Behavioral ranks reproducing the measured ordering: walks that
  // terminate deeper in a mapped structure resolve faster, and shallow
  // terminals (nothing mapped nearby) are the slowest.
  switch (l) {
    case WalkLevel::PT: return 2;
    case WalkLevel::PD: return 2;
    case WalkLevel::PDPT: return 3;
    case WalkLevel::PML4: return 4;
  }
  return 4;
}

bool TlbModel::lookup(VirtAddr page_base) {
  auto it = map_.find(page_base);
  if (it == map_.end()) return false;
  lru_.splice(lru_.begin(), lru_, it->second);
  return true;
}

void TlbModel::insert(VirtAddr page_base) {
  auto it = map_.find(page_base);
  if (it != map_.end()) {
    lru_.splice(lru_.begin(), lru_, it->second);
    return;
  }
  if (map_.size() >= capacity_) {
    map_.erase(lru_.back());
    lru_.pop_back();
  }
  lru_.push_front(page_base);
  map_[page_base] = lru_.begin();
}

void TlbModel::flush() {
  lru_.clear();
  map_.clear();
}

namespace {

constexpr uint64_t kPdMask = ~(kPage2M - 1);
constexpr uint64_t kPdptMask = ~((1ull << 30) - 1);
constexpr uint64_t kPml4Mask = ~((1ull << 39) - 1);

}  // namespace

int PagingStructureCache::covered(VirtAddr addr) {
  if (pde_.lookup(addr & kPdMask)) return 3;
  if (pdpte_.lookup(addr & kPdptMask)) return 2;
  if (pml4e_.lookup(addr & kPml4Mask)) return 1;
  return 0;
}

void PagingStructureCache::insert_path(VirtAddr addr, bool pml4e, bool pdpte, bool pde) {
  if (pml4e) pml4e_.insert(addr & kPml4Mask);
  if (pdpte) pdpte_.insert(addr & kPdptMask);
  if (pde) pde_.insert(addr & kPdMask);
}

void PagingStructureCache::flush() {
  pml4e_.flush();
  pdpte_.flush();
  pde_.flush();
}

MicroarchSim::MicroarchSim(const AddressSpace* space, TimingProfile profile,
                           uint64_t noise_seed)
    : space_(space),
      profile_(std::move(profile)),
      partition_(space->spec().has_mitigation(Mitigation::TlbPartition)),
      nop_mitigation_(space->spec().has_mitigation(Mitigation::MaskedOpNop)),
      tlb_(kTlbEntries),
      kernel_tlb_(kTlbEntries),
      psc_(kPscEntriesPerLevel),
      rng_(noise_seed) {
  profile_.validate();
}

bool MicroarchSim::any_region_overlaps(VirtAddr lo, VirtAddr hi) const {
  const auto& rs = space_->regions();
  auto it = std::upper_bound(rs.begin(), rs.end(), lo,
                             [](VirtAddr a, const Region& r) { return a < r.base; });
  if (it != rs.begin() && std::prev(it)->end() > lo) return true;
  return it != rs.end() && it->base < hi;
}

MicroarchSim::Translation MicroarchSim::translate(VirtAddr addr) const {
  Translation t{};
  t.region = space_->find_region(addr);
  t.present = t.region && t.region->attrs.present;
  if (t.present) {
    const uint64_t sz = bytes(t.region->attrs.size_class);
    t.page_base = addr & ~(sz - 1);
    switch (t.region->attrs.size_class) {
      case PageSize::k4K: t.terminal = WalkLevel::PT; break;
      case PageSize::k2M: t.terminal = WalkLevel::PD; break;
      case PageSize::k1G: t.terminal = WalkLevel::PDPT; break;
    }
    t.pml4e_present = true;
    t.pdpte_present = t.terminal != WalkLevel::PDPT;
    t.pde_present = t.terminal == WalkLevel::PT;
    return t;
  }
  // Unmapped (or present-bit-clear region): the walk descends as far as
  // neighboring mappings have materialized the structures. Any region in a
  // block implies that block's pointer entry exists.
  t.page_base = addr & ~(kPage4K - 1);
  t.pde_present = any_region_overlaps(addr & kPdMask, (addr & kPdMask) + kPage2M);
  t.pdpte_present =
      t.pde_present || any_region_overlaps(addr & kPdptMask, (addr & kPdptMask) + (1ull << 30));
  t.pml4e_present =
      t.pdpte_present ||
      any_region_overlaps(addr & kPml4Mask, (addr & kPml4Mask) + (1ull << 39));
  if (t.pde_present) t.terminal = WalkLevel::PT;
  else if (t.pdpte_present) t.terminal = WalkLevel::PD;
  else if (t.pml4e_present) t.terminal = WalkLevel::PDPT;
  else t.terminal = WalkLevel::PML4;
  return t;
}

TlbModel& MicroarchSim::tlb_for(VirtAddr addr) {
  return (partition_ && is_kernel_half(addr)) ? kernel_tlb_ : tlb_;
}

Cycles MicroarchSim::noise() {
  Cycles n = 0;
  if (profile_.noise_sigma > 0.0) {
    const double g = rng_.next_gaussian(profile_.noise_sigma);
    if (g > 0.0) n += static_cast<Cycles>(std::llround(g));
  }
  if (profile_.outlier_prob > 0.0 && rng_.next_unit() < profile_.outlier_prob)
    n += profile_.outlier_cost;
  return n;
}

ProbeSample MicroarchSim::probe(MaskedOp op, VirtAddr addr, bool mask_zero) {
  probes_++;
  const Translation t = translate(addr);
  ProbeSample s;
  s.terminal = t.terminal;

  const bool supervisor = t.present && !t.region->attrs.user_accessible;
  if (!t.present) s.would_fault = true;
  else if (op == MaskedOp::Load) s.would_fault = supervisor;
  else s.would_fault = supervisor || !t.region->attrs.writable;
  s.fault = s.would_fault && !mask_zero && !nop_mitigation_;

  const Cycles base = op == MaskedOp::Load ? profile_.base_load : profile_.base_store;
  if (nop_mitigation_) {
    // The masked op is retired as a no-op: no translation, no assists, no
    // cache movement; only issue cost and noise remain.
    s.latency = base + noise();
    return s;
  }

  Cycles assist = 0;
  if (op == MaskedOp::Load) {
    if (!t.present || supervisor) assist = profile_.assist_load;
  } else {
    if (!t.present || supervisor || !t.region->attrs.writable) {
      assist = profile_.assist_store;
    } else {
      auto it = dirty_overlay_.find(t.page_base);
      const bool dirty = it != dirty_overlay_.end() ? it->second : t.region->attrs.dirty;
      if (!dirty) assist = profile_.dirty_assist;
    }
  }
  s.assisted = assist != 0;

  // AMD-style policy: user-initiated accesses may consult cached kernel
  // translations but never install them (neither TLB nor upper levels).
  const bool amd_restrict =
      profile_.amd_mode && (supervisor || (!t.present && is_kernel_half(addr)));

  // Under a partitioned TLB, user-initiated probes run in a translation
  // domain that can neither hit nor fill kernel entries; the kernel's own
  // domain (filled by touch_kernel_pages) stays invisible to them.
  const bool tlb_blind = partition_ && is_kernel_half(addr);

  Cycles walk = 0;
  if (t.present) {
    if (!tlb_blind && tlb_.lookup(t.page_base)) {
      s.tlb_hit = true;
    } else {
      const int levels = std::max(1, walk_rank(t.terminal) - psc_.covered(addr));
      walk = profile_.walk_per_level * static_cast<Cycles>(levels);
      if (t.terminal == WalkLevel::PT) walk += profile_.pt_extra;
      if (!amd_restrict) {
        psc_.insert_path(addr, t.pml4e_present, t.pdpte_present, t.pde_present);
        if (!tlb_blind) tlb_.insert(t.page_base);
      }
    }
  } else {
    const int levels = std::max(1, walk_rank(t.terminal) - psc_.covered(addr));
    walk = profile_.walk_per_level * static_cast<Cycles>(levels);
    if (t.terminal == WalkLevel::PT) walk += profile_.pt_extra;
    walk += profile_.nonpresent_extra;
    if (!amd_restrict)
      psc_.insert_path(addr, t.pml4e_present, t.pdpte_present, t.pde_present);
  }

  s.latency = base + assist + walk + noise();

  if (!mask_zero && !s.fault && op == MaskedOp::Store && t.present &&
      t.region->attrs.writable && t.region->attrs.user_accessible) {
    dirty_overlay_[t.page_base] = true;
  }
  return s;
}

void MicroarchSim::touch_kernel_pages(std::span<const VirtAddr> pages) {
  for (VirtAddr addr : pages) {
    const Translation t = translate(addr);
    if (!t.present) continue;
    tlb_for(addr).insert(t.page_base);
    psc_.insert_path(addr, t.pml4e_present, t.pdpte_present, t.pde_present);
  }
}

void MicroarchSim::flush_tlb() {
  tlb_.flush();
  kernel_tlb_.flush();
  psc_.flush();
}

bool MicroarchSim::page_dirty(VirtAddr addr) const {
  const Translation t = translate(addr);
  if (!t.present) return false;
  auto it = dirty_overlay_.find(t.page_base);
  if (it != dirty_overlay_.end()) return it->second;
  return t.region->attrs.dirty;
}

bool MicroarchSim::tlb_holds(VirtAddr addr) {
  const Translation t = translate(addr);
  if (!t.present) return false;
  // Peek without recency side effects is not needed by any campaign; the
  // test hook tolerates the refresh.
  return tlb_for(addr).lookup(t.page_base);
}

}  // namespace aslrlab
