#pragma once

#include <cstdint>
#include <string>

#include "aslrlab/microarch.hpp"
#include "aslrlab/types.hpp"

namespace aslrlab {

// Permission class of a calibration page owned by the attacker.
enum class PagePerms { Rw, RwDirty, Ro, Rx, None };

// What an attacker legitimately knows about the target CPU (from public
// documentation), as opposed to anything about the victim layout.
struct ProfileHints {
  std::string profile_name;
  bool amd_mode = false;
  Cycles walk_per_level = 0;
  Cycles pt_extra = 0;
  Cycles nonpresent_extra = 0;
};

// Attacker-side measurement interface. Campaigns are written against this;
// backends execute probes in simulation or (opt-in) on real hardware.
class Prober {
 public:
  virtual ~Prober() = default;

  virtual ProbeSample probe(MaskedOp op, VirtAddr addr, bool mask_zero) = 0;

  // Cycles the translation caches by touching an attacker-owned buffer
  // sized and spread to roll over every cache level deterministically.
  virtual void evict_tlb() = 0;

  // Hands out a fresh attacker-owned page of the requested class.
  virtual VirtAddr calibration_page(PagePerms perms) = 0;

  virtual uint64_t probes_issued() const = 0;
  virtual ProfileHints hints() const = 0;
  virtual std::string backend_name() const = 0;
};

// Simulation backend: drives a MicroarchSim owned elsewhere (the owner may
// also inject victim activity through it between probes).
class SimProber : public Prober {
 public:
  explicit SimProber(MicroarchSim* sim);

  ProbeSample probe(MaskedOp op, VirtAddr addr, bool mask_zero) override;
  void evict_tlb() override;
  VirtAddr calibration_page(PagePerms perms) override;
  uint64_t probes_issued() const override;
  ProfileHints hints() const override;
  std::string backend_name() const override { return "sim"; }

  MicroarchSim& sim() { return *sim_; }

 private:
  MicroarchSim* sim_;
  int rw_next_ = 0;        // clean pages served from the front of the pool
  int rw_dirty_next_ = 0;  // dirtied pages served from the back
  int ro_next_ = 0;
  int rx_next_ = 0;
  int none_next_ = 0;
};

}  // namespace aslrlab
