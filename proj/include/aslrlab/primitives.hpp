#pragma once

#include <functional>
#include <span>
#include <vector>

#include "aslrlab/measure.hpp"
#include "aslrlab/prober.hpp"

namespace aslrlab {

enum class MappingVerdict { Mapped, Unmapped };
enum class WalkVerdict { PD, PT, NonPresent };
enum class TlbVerdict { Hit, Miss };
enum class PermissionVerdict { ReadWrite, ReadNoWrite, NoAccess, Unmapped };

const char* name(MappingVerdict v);
const char* name(WalkVerdict v);
const char* name(TlbVerdict v);
const char* name(PermissionVerdict v);

// Decides mapped vs unmapped from one measured zero-mask load.
MappingVerdict page_table_attack(Prober& p, VirtAddr addr, const Threshold& thr,
                                 const MeasurePolicy& policy);

// Latency cutoffs separating walk terminals on AMD-style parts, derived
// from the fastest observed kernel probe plus CPU-documented surcharges.
struct LevelBands {
  Cycles pd_max = 0;  // below: 2-MiB-mapped (PD-terminal)
  Cycles pt_max = 0;  // below: 4-KiB-mapped (PT-terminal); at or above: unmapped
};
LevelBands derive_level_bands(Cycles min_mapped_latency, const ProfileHints& hints);

WalkVerdict walk_level_attack(Prober& p, VirtAddr addr, const LevelBands& bands,
                              const MeasurePolicy& policy);

// Probes each address once per round and compares against the separator.
// Addresses are processed in chunks of at most a quarter of the TLB so the
// probe pass cannot evict its own working set; prepare_chunk runs before
// each chunk (callers evict and trigger victim activity there).
std::vector<TlbVerdict> tlb_attack(Prober& p, std::span<const VirtAddr> addrs,
                                   Cycles separator,
                                   const std::function<void(size_t chunk)>& prepare_chunk);

// Load pass then store pass. A slow load is reported as NoAccess when the
// caller asserts the surrounding context is mapped (e.g. a hole inside a
// matched library), otherwise as Unmapped.
PermissionVerdict permission_attack(Prober& p, VirtAddr addr, const Threshold& thr,
                                    Cycles store_separator, const MeasurePolicy& policy,
                                    bool assume_mapped);

// Midpoint between a store to an attacker page that is already dirty and a
// store to a read-only attacker page.
Cycles calibrate_store_separator(Prober& p);

inline constexpr size_t kTlbChunk = kTlbEntries / 4;

}  // namespace aslrlab
