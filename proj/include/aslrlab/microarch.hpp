#pragma once

#include <cstdint>
#include <list>
#include <span>
#include <unordered_map>
#include <vector>

#include "aslrlab/address_space.hpp"
#include "aslrlab/rng.hpp"
#include "aslrlab/timing_profile.hpp"
#include "aslrlab/types.hpp"

namespace aslrlab {

enum class MaskedOp { Load, Store };

// Level at which a page walk terminates. The cost ranks are behavioral,
// chosen to reproduce the observed latency ordering (deeper mapped
// structure probes faster), not physical read counts.
enum class WalkLevel : uint8_t { PT, PD, PDPT, PML4 };
const char* name(WalkLevel l);
int walk_rank(WalkLevel l);  // PT=2, PD=2, PDPT=3, PML4=4

struct ProbeSample {
  Cycles latency = 0;
  bool fault = false;        // architectural fault was raised (nonzero mask only)
  bool would_fault = false;  // an unmasked access here would fault
  bool tlb_hit = false;
  bool assisted = false;
  WalkLevel terminal = WalkLevel::PT;
};

// Fully associative, exact-LRU translation cache keyed by page base.
class TlbModel {
 public:
  explicit TlbModel(size_t capacity) : capacity_(capacity) {}
  bool lookup(VirtAddr page_base);   // hit refreshes recency
  void insert(VirtAddr page_base);   // evicts LRU at capacity
  void flush();
  size_t size() const { return map_.size(); }
  size_t capacity() const { return capacity_; }

 private:
  size_t capacity_;
  std::list<VirtAddr> lru_;  // front = most recent
  std::unordered_map<VirtAddr, std::list<VirtAddr>::iterator> map_;
};

// Per-level caches for upper page-table entries (PML4E/PDPTE/PDE). A walk
// starts below the deepest cached entry covering the address; PTEs are
// never cached here.
class PagingStructureCache {
 public:
  explicit PagingStructureCache(size_t per_level_capacity)
      : pml4e_(per_level_capacity), pdpte_(per_level_capacity), pde_(per_level_capacity) {}

  // Number of top levels the walk may skip: 3 if the PDE is cached, else 2
  // if the PDPTE is, else 1 if the PML4E is, else 0.
  int covered(VirtAddr addr);
  void insert_path(VirtAddr addr, bool pml4e, bool pdpte, bool pde);
  void flush();

 private:
  TlbModel pml4e_, pdpte_, pde_;
};

inline constexpr size_t kTlbEntries = 1536;
inline constexpr size_t kPscEntriesPerLevel = 16;

// Executes masked probes against an address space and produces latencies:
//   base op + microcode assists + page walk + non-negative noise.
// An all-zero mask performs the full translation (and its cache effects)
// but never faults and never commits a dirty bit; that asymmetry is what
// keeps calibration pages clean and the timing channel open.
class MicroarchSim {
 public:
  MicroarchSim(const AddressSpace* space, TimingProfile profile, uint64_t noise_seed);

  ProbeSample probe(MaskedOp op, VirtAddr addr, bool mask_zero);

  // Victim-side activity: the kernel touching its own pages caches their
  // translations (TLB and upper-level entries), even where user-initiated
  // probes could not install them.
  void touch_kernel_pages(std::span<const VirtAddr> pages);

  void flush_tlb();  // test hook; attackers use eviction buffers instead
  uint64_t probes_issued() const { return probes_; }
  const TimingProfile& profile() const { return profile_; }
  const AddressSpace& space() const { return *space_; }

  // Introspection for tests.
  bool page_dirty(VirtAddr addr) const;
  bool tlb_holds(VirtAddr addr);

 private:
  struct Translation {
    const Region* region;  // null when no region covers the address
    bool present;
    VirtAddr page_base;
    WalkLevel terminal;
    bool pml4e_present, pdpte_present, pde_present;
  };
  Translation translate(VirtAddr addr) const;
  bool any_region_overlaps(VirtAddr lo, VirtAddr hi) const;
  TlbModel& tlb_for(VirtAddr addr);
  Cycles noise();

  const AddressSpace* space_;
  TimingProfile profile_;
  bool partition_;
  bool nop_mitigation_;
  TlbModel tlb_;
  TlbModel kernel_tlb_;  // separate translation domain under TlbPartition
  PagingStructureCache psc_;
  std::unordered_map<VirtAddr, bool> dirty_overlay_;
  Rng rng_;
  uint64_t probes_ = 0;
};

inline bool is_kernel_half(VirtAddr a) { return (a >> 63) != 0; }

}  // namespace aslrlab
