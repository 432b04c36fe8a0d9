#pragma once

#include <optional>
#include <string>
#include <vector>

#include "aslrlab/types.hpp"

namespace aslrlab {

// Layout constants for the simulated x86-64 address spaces.
namespace layout {
// Linux kernel text randomization window: 1 GiB, 2-MiB aligned -> 512 slots.
constexpr VirtAddr kLinuxTextBase = 0xffffffff80000000ull;
constexpr VirtAddr kLinuxTextEnd = 0xffffffffc0000000ull;
constexpr int kLinuxTextSlots = 512;
// Module area: 64 MiB, 4-KiB aligned -> 16384 slots.
constexpr VirtAddr kLinuxModuleBase = 0xffffffffc0000000ull;
constexpr VirtAddr kLinuxModuleEnd = 0xffffffffc4000000ull;
constexpr int kLinuxModuleSlots = 16384;
// Fixed base used when kaslr is off.
constexpr VirtAddr kLinuxNokaslrBase = 0xffffffff81000000ull;
// Windows kernel randomization window: 512 GiB, 2-MiB aligned -> 262144 slots.
constexpr VirtAddr kWindowsTextBase = 0xfffff80000000000ull;
constexpr VirtAddr kWindowsTextEnd = 0xfffff88000000000ull;
constexpr int kWindowsTextSlots = 262144;
constexpr int kWindowsImageSlots = 5;  // five consecutive 2-MiB pages
// KVAS keeps three consecutive 4-KiB transition pages at this image offset.
constexpr uint64_t kKvasOffsetDefault = 0x298000ull;
constexpr int kKvasPages = 3;
// Desk-scale randomization window used by the KVAS scenario so a 4-KiB sweep
// stays tractable: 4 GiB -> 2048 2-MiB base slots.
constexpr int kKvasWindowSlots = 2048;
// Kernel entry trampoline offset from the image base under page-table
// isolation; cloud images commonly relocate it to 0xe00000.
constexpr uint64_t kTrampolineOffsetDefault = 0xc00000ull;
constexpr int kTrampolinePages = 2;
// Userspace anchors: main executable near 0x55.., libraries near 0x7f..
constexpr VirtAddr kUserCodeAnchor = 0x555500000000ull;
constexpr VirtAddr kUserLibAnchor = 0x7f0000000000ull;
// Kernel image span in 2-MiB slots (text + data as one mapped run).
constexpr int kKernelImageSlots = 16;
// Fixed 4-KiB page offsets embedded in the AMD-style kernel image; these are
// the PT-terminal pages a stride-4K walk-level scan is expected to flag.
constexpr uint64_t kAmdPtPageOffsets[5] = {0x0ull, 0x4000ull, 0x201000ull,
                                           0x600000ull, 0xa04000ull};

// Attacker-owned fixtures present in every scenario. The eviction buffer is
// spread over 32 distinct PML4 slots so touching it cycles the page-walk
// caches as well as the TLB.
constexpr int kEvictChunks = 32;
constexpr int kEvictChunkPages = 64;
constexpr VirtAddr kEvictChunkBase = 0x100000000000ull;
constexpr VirtAddr kEvictChunkStride = 0x8000000000ull;  // one PML4 slot
constexpr VirtAddr kCalibArenaBase = 0x7c0000000000ull;
constexpr int kCalibPagesPerClass = 16;
}  // namespace layout

enum class ScenarioKind : uint8_t {
  LinuxDefault,
  LinuxKpti,
  LinuxFlare,
  LinuxNokaslr,
  AmdLinux,
  Windows,
  WindowsKvas,
  Userspace,
  Custom,
};

const char* name(ScenarioKind k);
ScenarioKind scenario_kind_from_name(const std::string& s);

enum class Mitigation : uint8_t { FlareDummyMap, TlbPartition, MaskedOpNop };

const char* name(Mitigation m);
Mitigation mitigation_from_name(const std::string& s);

struct ModuleEntry {
  std::string name;
  uint64_t size = 0;  // bytes, 4-KiB multiple
};
using ModuleCatalog = std::vector<ModuleEntry>;

struct LibraryEntry {
  std::string name;
  // Section byte lengths in mapped order: r-x, ---, r--, rw-.
  uint64_t section_sizes[4] = {0, 0, 0, 0};
};
using LibraryCatalog = std::vector<LibraryEntry>;

struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::LinuxDefault;
  uint64_t seed = 0;
  std::vector<Mitigation> mitigations;
  ModuleCatalog module_catalog;    // empty -> built-in default for Linux kinds
  LibraryCatalog library_catalog;  // empty -> built-in default for Userspace
  uint64_t trampoline_offset = layout::kTrampolineOffsetDefault;
  uint64_t kvas_offset = layout::kKvasOffsetDefault;
  int userspace_window_bits = 20;  // randomization window, in 4-KiB pages
  bool kpti = false;               // combineable with LinuxNokaslr
  int kernel_image_slots = layout::kKernelImageSlots;
  std::vector<Region> custom_regions;  // used only by ScenarioKind::Custom

  bool has_mitigation(Mitigation m) const;
};

struct ModulePlacement {
  std::string name;
  VirtAddr base = 0;
  uint64_t size = 0;
};

struct LibraryPlacement {
  std::string name;
  VirtAddr base = 0;
  uint64_t section_sizes[4] = {0, 0, 0, 0};
};

struct GroundTruth {
  std::optional<VirtAddr> kernel_base;
  std::vector<ModulePlacement> module_placements;
  std::vector<LibraryPlacement> library_placements;
  std::optional<VirtAddr> trampoline_base;
  std::optional<VirtAddr> kvas_base;
};

// Immutable snapshot of one simulated address space. Regions are sorted by
// base and never overlap; lookup is a binary search.
class AddressSpace {
 public:
  AddressSpace(ScenarioSpec spec, std::vector<Region> regions, GroundTruth truth);

  // Attributes of the page containing addr, or nullopt when no region covers
  // it. Throws DomainError on non-canonical addresses.
  std::optional<PageAttributes> lookup(VirtAddr addr) const;

  // The region covering addr, if any. Same canonicality rule as lookup.
  const Region* find_region(VirtAddr addr) const;

  const std::vector<Region>& regions() const { return regions_; }
  const GroundTruth& truth() const { return truth_; }
  const ScenarioSpec& spec() const { return spec_; }

 private:
  ScenarioSpec spec_;
  std::vector<Region> regions_;
  GroundTruth truth_;
};

// Builds the scenario deterministically from spec.seed. Throws ConfigError on
// invalid specs (overlapping custom regions, catalogs that cannot fit, bad
// alignment).
AddressSpace build_address_space(const ScenarioSpec& spec);

// Convenience: the ground truth that build_address_space(spec) would record.
GroundTruth enumerate_truth(const ScenarioSpec& spec);

}  // namespace aslrlab
