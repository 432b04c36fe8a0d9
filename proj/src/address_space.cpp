#include "aslrlab/address_space.hpp"

#include <algorithm>
#include <cmath>

#include "aslrlab/catalogs.hpp"
#include "aslrlab/rng.hpp"

namespace aslrlab {

const char* name(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::LinuxDefault: return "LinuxDefault";
    case ScenarioKind::LinuxKpti: return "LinuxKpti";
    case ScenarioKind::LinuxFlare: return "LinuxFlare";
    case ScenarioKind::LinuxNokaslr: return "LinuxNokaslr";
    case ScenarioKind::AmdLinux: return "AmdLinux";
    case ScenarioKind::Windows: return "Windows";
    case ScenarioKind::WindowsKvas: return "WindowsKvas";
    case ScenarioKind::Userspace: return "Userspace";
    case ScenarioKind::Custom: return "Custom";
  }
  return "?";
}

ScenarioKind scenario_kind_from_name(const std::string& s) {
  for (auto k : {ScenarioKind::LinuxDefault, ScenarioKind::LinuxKpti,
                 ScenarioKind::LinuxFlare, ScenarioKind::LinuxNokaslr,
                 ScenarioKind::AmdLinux, ScenarioKind::Windows,
                 ScenarioKind::WindowsKvas, ScenarioKind::Userspace,
                 ScenarioKind::Custom}) {
    if (s == name(k)) return k;
  }
  throw ConfigError("unknown scenario kind: " + s);
}

const char* name(Mitigation m) {
  switch (m) {
    case Mitigation::FlareDummyMap: return "FlareDummyMap";
    case Mitigation::TlbPartition: return "TlbPartition";
    case Mitigation::MaskedOpNop: return "MaskedOpNop";
  }
  return "?";
}

Mitigation mitigation_from_name(const std::string& s) {
  for (auto m : {Mitigation::FlareDummyMap, Mitigation::TlbPartition,
                 Mitigation::MaskedOpNop}) {
    if (s == name(m)) return m;
  }
  throw ConfigError("unknown mitigation: " + s);
}

bool ScenarioSpec::has_mitigation(Mitigation m) const {
  return std::find(mitigations.begin(), mitigations.end(), m) != mitigations.end();
}

namespace {

PageAttributes attrs(bool present, bool user, bool writable, bool exec,
                     bool dirty, PageSize size) {
  PageAttributes a;
  a.present = present;
  a.user_accessible = user;
  a.writable = writable;
  a.executable = exec;
  a.dirty = dirty;
  a.size_class = size;
  return a;
}

PageAttributes kernel_text_attrs(PageSize size) {
  return attrs(true, false, false, true, true, size);
}

void add_attacker_fixtures(std::vector<Region>& out) {
  using namespace layout;
  // Eviction buffer: 32 chunks of 64 pages, one chunk per PML4 slot, so a
  // full touch pass cycles every level of the paging-structure caches.
  for (int i = 0; i < kEvictChunks; i++) {
    out.push_back({kEvictChunkBase + static_cast<uint64_t>(i) * kEvictChunkStride,
                   static_cast<uint64_t>(kEvictChunkPages) * kPage4K,
                   attrs(true, true, true, false, true, PageSize::k4K),
                   "evict-chunk"});
  }
  // Calibration arena: one run of pages per permission class. The rw pages
  // start out clean on purpose; the threshold calibration depends on it.
  out.push_back({kCalibArenaBase, kCalibPagesPerClass * kPage4K,
                 attrs(true, true, true, false, false, PageSize::k4K), "calib-rw"});
  out.push_back({kCalibArenaBase + 0x10000, kCalibPagesPerClass * kPage4K,
                 attrs(true, true, false, false, false, PageSize::k4K), "calib-ro"});
  out.push_back({kCalibArenaBase + 0x20000, kCalibPagesPerClass * kPage4K,
                 attrs(true, true, false, true, false, PageSize::k4K), "calib-rx"});
  out.push_back({kCalibArenaBase + 0x30000, kCalibPagesPerClass * kPage4K,
                 attrs(false, true, false, false, false, PageSize::k4K), "calib-none"});
  // One huge page for walk-level band fixtures.
  out.push_back({kCalibArenaBase + 0x200000, kPage2M,
                 attrs(true, true, true, false, true, PageSize::k2M), "calib-2m"});
}

// Places every catalog module in the module window at 4-KiB granularity with
// at least one unmapped page before, between and after. Gap slack is spread
// with exponential weights so layouts differ meaningfully across seeds.
std::vector<ModulePlacement> place_modules(const ModuleCatalog& catalog, Rng& rng,
                                           std::vector<Region>& out) {
  using namespace layout;
  const int n = static_cast<int>(catalog.size());
  uint64_t total_pages = 0;
  for (const auto& m : catalog) {
    if (m.size == 0 || m.size % kPage4K != 0)
      throw ConfigError("module size must be a nonzero 4-KiB multiple: " + m.name);
    total_pages += m.size / kPage4K;
  }
  const uint64_t window_pages = kLinuxModuleSlots;
  if (total_pages + n + 1 > window_pages)
    throw ConfigError("module catalog does not fit the module window");

  std::vector<int> order(n);
  for (int i = 0; i < n; i++) order[i] = i;
  for (int i = n - 1; i > 0; i--)
    std::swap(order[i], order[rng.next_below(static_cast<uint64_t>(i) + 1)]);

  const uint64_t extra = window_pages - total_pages - (n + 1);
  std::vector<double> w(n + 1);
  double wsum = 0.0;
  for (auto& x : w) {
    x = -std::log(1.0 - rng.next_unit());
    wsum += x;
  }
  std::vector<uint64_t> gap(n + 1, 1);
  uint64_t assigned = 0;
  for (int i = 0; i <= n; i++) {
    uint64_t g = static_cast<uint64_t>(extra * (w[i] / wsum));
    gap[i] += g;
    assigned += g;
  }
  for (uint64_t r = 0; r < extra - assigned; r++) gap[r % (n + 1)] += 1;

  std::vector<ModulePlacement> placed;
  VirtAddr cursor = kLinuxModuleBase;
  for (int i = 0; i < n; i++) {
    const auto& m = catalog[order[i]];
    cursor += gap[i] * kPage4K;
    out.push_back({cursor, m.size, attrs(true, false, false, true, true, PageSize::k4K),
                   "module:" + m.name});
    placed.push_back({m.name, cursor, m.size});
    cursor += m.size;
  }
  std::sort(placed.begin(), placed.end(),
            [](const ModulePlacement& a, const ModulePlacement& b) { return a.base < b.base; });
  return placed;
}

// The AMD-style image embeds five 4-KiB pages at fixed offsets; blocks that
// contain one are mapped sparsely (just those pages), all other blocks are
// plain 2-MiB pages.
void place_amd_image(VirtAddr base, int image_slots, std::vector<Region>& out) {
  using namespace layout;
  for (int s = 0; s < image_slots; s++) {
    VirtAddr block = base + static_cast<uint64_t>(s) * kPage2M;
    bool sparse = false;
    for (uint64_t fo : kAmdPtPageOffsets) {
      if (static_cast<int>(fo >> 21) == s) {
        if (!sparse) sparse = true;
        out.push_back({base + fo, kPage4K, kernel_text_attrs(PageSize::k4K),
                       "kernel-text-4k"});
      }
    }
    if (!sparse)
      out.push_back({block, kPage2M, kernel_text_attrs(PageSize::k2M), "kernel-text"});
  }
}

void validate(std::vector<Region>& regions) {
  std::sort(regions.begin(), regions.end(),
            [](const Region& a, const Region& b) { return a.base < b.base; });
  VirtAddr prev_end = 0;
  const Region* prev = nullptr;
  for (const auto& r : regions) {
    const uint64_t align = bytes(r.attrs.size_class);
    if (r.length == 0 || r.length % align != 0 || r.base % align != 0)
      throw ConfigError("region '" + r.label + "' is misaligned for its page size");
    if (!is_canonical(r.base) || !is_canonical(r.end() - 1))
      throw ConfigError("region '" + r.label + "' is not canonical");
    if (prev && r.base < prev_end)
      throw ConfigError("regions overlap: '" + prev->label + "' and '" + r.label + "'");
    prev_end = r.end();
    prev = &r;
  }
}

}  // namespace

AddressSpace::AddressSpace(ScenarioSpec spec, std::vector<Region> regions,
                           GroundTruth truth)
    : spec_(std::move(spec)), regions_(std::move(regions)), truth_(std::move(truth)) {}

std::optional<PageAttributes> AddressSpace::lookup(VirtAddr addr) const {
  const Region* r = find_region(addr);
  if (!r) return std::nullopt;
  return r->attrs;
}

const Region* AddressSpace::find_region(VirtAddr addr) const {
  if (!is_canonical(addr)) throw DomainError("non-canonical address " + hex(addr));
  auto it = std::upper_bound(
      regions_.begin(), regions_.end(), addr,
      [](VirtAddr a, const Region& r) { return a < r.base; });
  if (it == regions_.begin()) return nullptr;
  --it;
  return it->contains(addr) ? &*it : nullptr;
}

AddressSpace build_address_space(const ScenarioSpec& spec_in) {
  using namespace layout;
  ScenarioSpec spec = spec_in;
  Rng rng(spec.seed);
  std::vector<Region> regions;
  GroundTruth truth;
  add_attacker_fixtures(regions);

  const bool linux_kind = spec.kind == ScenarioKind::LinuxDefault ||
                          spec.kind == ScenarioKind::LinuxKpti ||
                          spec.kind == ScenarioKind::LinuxFlare ||
                          spec.kind == ScenarioKind::LinuxNokaslr ||
                          spec.kind == ScenarioKind::AmdLinux;
  if (linux_kind && spec.module_catalog.empty())
    spec.module_catalog = default_module_catalog();
  if (spec.kind == ScenarioKind::Userspace && spec.library_catalog.empty())
    spec.library_catalog = default_library_catalog();
  if (spec.kind == ScenarioKind::LinuxFlare &&
      !spec.has_mitigation(Mitigation::FlareDummyMap))
    spec.mitigations.push_back(Mitigation::FlareDummyMap);
  if (spec.kernel_image_slots < 1 || spec.kernel_image_slots > kLinuxTextSlots)
    throw ConfigError("kernel_image_slots out of range");

  switch (spec.kind) {
    case ScenarioKind::LinuxDefault:
    case ScenarioKind::LinuxKpti:
    case ScenarioKind::LinuxFlare:
    case ScenarioKind::LinuxNokaslr:
    case ScenarioKind::AmdLinux: {
      const bool kpti = spec.kpti || spec.kind == ScenarioKind::LinuxKpti;
      if (spec.trampoline_offset % kPage2M != 0)
        throw ConfigError("trampoline_offset must be 2-MiB aligned");

      int slot;
      int image_slots = spec.kernel_image_slots;
      if (spec.kind == ScenarioKind::LinuxNokaslr) {
        slot = static_cast<int>((kLinuxNokaslrBase - kLinuxTextBase) / kPage2M);
        image_slots = std::min<int>(image_slots, kLinuxTextSlots - slot);
      } else if (spec.kind == ScenarioKind::AmdLinux) {
        // Keep the embedded 4-KiB fixture pages inside the window; the scan
        // asserts on seeing all five.
        slot = static_cast<int>(rng.next_below(kLinuxTextSlots - image_slots + 1));
      } else if (kpti) {
        // The trampoline must itself land in the probe window.
        const int tramp_slots = static_cast<int>(spec.trampoline_offset / kPage2M);
        slot = static_cast<int>(rng.next_below(kLinuxTextSlots - tramp_slots - 1));
      } else {
        // All 512 offsets stay possible (the offset distribution is part of
        // the contract); images near the top of the window are truncated.
        slot = static_cast<int>(rng.next_below(kLinuxTextSlots));
        image_slots = std::min<int>(image_slots, kLinuxTextSlots - slot);
      }
      const VirtAddr base = kLinuxTextBase + static_cast<uint64_t>(slot) * kPage2M;
      truth.kernel_base = base;

      if (kpti) {
        // Only the entry trampoline is visible in the attacked page tables.
        truth.trampoline_base = base + spec.trampoline_offset;
        regions.push_back({*truth.trampoline_base, kTrampolinePages * kPage4K,
                           kernel_text_attrs(PageSize::k4K), "kpti-trampoline"});
        break;
      }

      if (spec.kind == ScenarioKind::AmdLinux)
        place_amd_image(base, image_slots, regions);
      else
        regions.push_back({base, static_cast<uint64_t>(image_slots) * kPage2M,
                           kernel_text_attrs(PageSize::k2M), "kernel-text"});

      if (spec.kind == ScenarioKind::LinuxFlare) {
        for (int s = 0; s < kLinuxTextSlots; s++) {
          if (s >= slot && s < slot + image_slots) continue;
          regions.push_back({kLinuxTextBase + static_cast<uint64_t>(s) * kPage2M,
                             kPage2M, attrs(true, false, false, false, false, PageSize::k2M),
                             "flare-dummy"});
        }
      }

      truth.module_placements = place_modules(spec.module_catalog, rng, regions);
      break;
    }

    case ScenarioKind::Windows: {
      const int usable = kWindowsTextSlots - kWindowsImageSlots + 1;
      const int slot = static_cast<int>(rng.next_below(usable));
      const VirtAddr base = kWindowsTextBase + static_cast<uint64_t>(slot) * kPage2M;
      truth.kernel_base = base;
      regions.push_back({base, static_cast<uint64_t>(kWindowsImageSlots) * kPage2M,
                         kernel_text_attrs(PageSize::k2M), "nt-image"});
      break;
    }

    case ScenarioKind::WindowsKvas: {
      if (spec.kvas_offset % kPage4K != 0)
        throw ConfigError("kvas_offset must be 4-KiB aligned");
      // Desk-scale window: the 4-KiB sweep covers it exhaustively.
      const int last_needed =
          static_cast<int>((spec.kvas_offset + kKvasPages * kPage4K) / kPage2M) + 1;
      const int slot = static_cast<int>(rng.next_below(kKvasWindowSlots - last_needed));
      const VirtAddr base = kWindowsTextBase + static_cast<uint64_t>(slot) * kPage2M;
      truth.kernel_base = base;
      truth.kvas_base = base + spec.kvas_offset;
      regions.push_back({*truth.kvas_base, kKvasPages * kPage4K,
                         kernel_text_attrs(PageSize::k4K), "kvas-transition"});
      break;
    }

    case ScenarioKind::Userspace: {
      const uint64_t window = 1ull << spec.userspace_window_bits;
      const VirtAddr code_base = kUserCodeAnchor + rng.next_below(window) * kPage4K;
      const uint64_t code_pages = 128;
      regions.push_back({code_base, code_pages * kPage4K,
                         attrs(true, true, false, true, false, PageSize::k4K), "app-text"});

      auto collides = [&](VirtAddr b, uint64_t len) {
        for (const auto& r : regions) {
          if (b < r.end() + kPage4K && r.base < b + len + kPage4K) return true;
        }
        return false;
      };
      for (const auto& lib : spec.library_catalog) {
        uint64_t len = 0;
        for (uint64_t s : lib.section_sizes) {
          if (s == 0 || s % kPage4K != 0)
            throw ConfigError("library section size must be a nonzero 4-KiB multiple: " +
                              lib.name);
          len += s;
        }
        VirtAddr b = 0;
        bool ok = false;
        for (int attempt = 0; attempt < 1000; attempt++) {
          b = kUserLibAnchor + rng.next_below(window) * kPage4K;
          if (!collides(b, len)) {
            ok = true;
            break;
          }
        }
        if (!ok) throw ConfigError("library catalog does not fit the window: " + lib.name);
        VirtAddr cur = b;
        // Section order is fixed: r-x, ---, r--, rw-. The --- section is a
        // placed region whose hardware present bit is clear.
        regions.push_back({cur, lib.section_sizes[0],
                           attrs(true, true, false, true, false, PageSize::k4K),
                           lib.name + ".rx"});
        cur += lib.section_sizes[0];
        regions.push_back({cur, lib.section_sizes[1],
                           attrs(false, true, false, false, false, PageSize::k4K),
                           lib.name + ".none"});
        cur += lib.section_sizes[1];
        regions.push_back({cur, lib.section_sizes[2],
                           attrs(true, true, false, false, false, PageSize::k4K),
                           lib.name + ".ro"});
        cur += lib.section_sizes[2];
        regions.push_back({cur, lib.section_sizes[3],
                           attrs(true, true, true, false, true, PageSize::k4K),
                           lib.name + ".rw"});
        LibraryPlacement lp;
        lp.name = lib.name;
        lp.base = b;
        for (int i = 0; i < 4; i++) lp.section_sizes[i] = lib.section_sizes[i];
        truth.library_placements.push_back(lp);
      }

      // Pages a process's self-reported map would omit but that are present
      // in the page tables; sweeps are expected to find them anyway.
      VirtAddr h1 = code_base + (code_pages + 2) * kPage4K;
      while (collides(h1, kPage4K)) h1 += 8 * kPage4K;
      regions.push_back({h1, kPage4K, attrs(true, true, true, false, true, PageSize::k4K),
                         "hidden-anon"});
      if (!truth.library_placements.empty()) {
        const auto& lp = truth.library_placements.front();
        uint64_t lib_len = 0;
        for (uint64_t s : lp.section_sizes) lib_len += s;
        VirtAddr h2 = lp.base + lib_len + 3 * kPage4K;
        while (collides(h2, kPage4K)) h2 += 8 * kPage4K;
        regions.push_back({h2, kPage4K, attrs(true, true, true, false, true, PageSize::k4K),
                           "hidden-anon"});
      }
      std::sort(truth.library_placements.begin(), truth.library_placements.end(),
                [](const LibraryPlacement& a, const LibraryPlacement& b) {
                  return a.base < b.base;
                });
      break;
    }

    case ScenarioKind::Custom: {
      for (const auto& r : spec.custom_regions) regions.push_back(r);
      break;
    }
  }

  validate(regions);
  return AddressSpace(std::move(spec), std::move(regions), std::move(truth));
}

GroundTruth enumerate_truth(const ScenarioSpec& spec) {
  return build_address_space(spec).truth();
}

}  // namespace aslrlab
