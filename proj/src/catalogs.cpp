#include "aslrlab/catalogs.hpp"

#include <fstream>

#include <json.hpp>

#include "aslrlab/types.hpp"

namespace aslrlab {

namespace {

constexpr uint64_t pages(uint64_t n) { return n * kPage4K; }

}  // namespace

namespace {

// 125 modules. 19 sizes belong to exactly one module; autofs4 and x_tables
// share 45056 bytes with each other and nobody else; every other size is
// used by at least two modules, so size alone cannot identify them.
ModuleCatalog make_module_catalog() {
  ModuleCatalog c;
  auto add = [&](const char* name, uint64_t p) { c.push_back({name, pages(p)}); };

  // Unique sizes.
  add("btrfs", 345);
  add("i915", 289);
  add("kvm", 257);
  add("mac80211", 201);
  add("bluetooth", 161);
  add("iwlmvm", 131);
  add("cfg80211", 129);
  add("drm", 117);
  add("thunderbolt", 93);
  add("usbcore", 77);
  add("drm_kms_helper", 69);
  add("e1000e", 61);
  add("xhci_hcd", 57);
  add("mei", 45);
  add("snd_pcm", 41);
  add("nvme_core", 37);
  add("pinctrl_icelake", 17);
  add("video", 14);
  add("mac_hid", 13);

  // The only size shared by exactly two modules.
  add("autofs4", 11);
  add("x_tables", 11);

  // Ambiguous pool: each size below is used by at least two modules.
  add("nf_tables", 64);
  add("snd_hda_codec", 64);
  add("snd_soc_core", 64);
  add("iwlwifi", 64);
  add("raid6_pq", 64);
  add("spi_nor", 64);
  add("uvcvideo", 50);
  add("r8169", 50);
  add("igb", 50);
  add("ath9k", 50);
  add("rtw88_core", 50);
  add("snd_usb_audio", 50);
  add("dm_mod", 40);
  add("fuse", 40);
  add("fat", 40);
  add("hid", 40);
  add("usbhid", 40);
  add("psmouse", 40);
  add("ip_tables", 32);
  add("nf_conntrack", 32);
  add("bridge", 32);
  add("overlay", 32);
  add("squashfs", 32);
  add("isofs", 32);
  add("udf", 32);
  add("configfs", 32);
  add("xhci_pci", 28);
  add("ahci", 28);
  add("libahci", 28);
  add("nvme", 28);
  add("uas", 28);
  add("usb_storage", 28);
  add("e1000", 24);
  add("r8152", 24);
  add("cdc_ether", 24);
  add("usbnet", 24);
  add("mii", 24);
  add("tun", 24);
  add("veth", 24);
  add("snd_hda_codec_realtek", 20);
  add("snd_hda_codec_hdmi", 20);
  add("snd_hwdep", 20);
  add("snd_seq", 20);
  add("snd_timer", 20);
  add("snd_rawmidi", 20);
  add("soundcore", 20);
  add("aesni_intel", 16);
  add("cryptd", 16);
  add("crypto_simd", 16);
  add("dm_crypt", 16);
  add("dm_mirror", 16);
  add("dm_log", 16);
  add("dm_region_hash", 16);
  add("raid1", 16);
  add("kvm_intel", 12);
  add("irqbypass", 12);
  add("coretemp", 12);
  add("intel_cstate", 12);
  add("intel_uncore", 12);
  add("intel_rapl_msr", 12);
  add("intel_rapl_common", 12);
  add("intel_powerclamp", 12);
  add("i2c_i801", 10);
  add("i2c_smbus", 10);
  add("i2c_algo_bit", 10);
  add("i2c_hid", 10);
  add("lpc_ich", 10);
  add("mei_me", 10);
  add("mei_hdcp", 10);
  add("intel_lpss", 10);
  add("af_alg", 8);
  add("algif_skcipher", 8);
  add("algif_hash", 8);
  add("bnep", 8);
  add("llc", 8);
  add("stp", 8);
  add("garp", 8);
  add("mrp", 8);
  add("crc32_pclmul", 7);
  add("crct10dif_pclmul", 7);
  add("ghash_clmulni_intel", 7);
  add("crc16", 7);
  add("libcrc32c", 7);
  add("libarc4", 7);
  add("ecdh_generic", 7);
  add("input_leds", 6);
  add("joydev", 6);
  add("serio_raw", 6);
  add("pcspkr", 6);
  add("mousedev", 6);
  add("wmi_bmof", 6);
  add("mxm_wmi", 6);
  add("binfmt_misc", 5);
  add("efi_pstore", 5);
  add("efivarfs", 5);
  add("dmi_sysfs", 5);
  add("ee1004", 5);
  add("gpio_keys", 5);
  add("cmac", 4);
  add("ccm", 4);
  add("ecb", 4);
  add("xts", 4);
  add("ctr", 4);
  add("gf128mul", 4);
  return c;
}

LibraryCatalog make_library_catalog() {
  LibraryCatalog c;
  auto add = [&](const char* name, uint64_t rx, uint64_t none, uint64_t ro, uint64_t rw) {
    LibraryEntry e;
    e.name = name;
    e.section_sizes[0] = pages(rx);
    e.section_sizes[1] = pages(none);
    e.section_sizes[2] = pages(ro);
    e.section_sizes[3] = pages(rw);
    c.push_back(e);
  };
  // Distinct r-x sizes, so the executable extent identifies each library.
  add("libc", 433, 3, 17, 6);
  add("libssl", 143, 2, 11, 9);
  add("ld_linux", 42, 1, 2, 2);
  return c;
}

}  // namespace

const ModuleCatalog& default_module_catalog() {
  static const ModuleCatalog c = make_module_catalog();
  return c;
}

const LibraryCatalog& default_library_catalog() {
  static const LibraryCatalog c = make_library_catalog();
  return c;
}

ModuleCatalog load_module_catalog(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open module catalog: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("bad module catalog JSON: " + std::string(e.what()));
  }
  if (!j.is_object() || !j.contains("modules") || !j["modules"].is_array())
    throw ConfigError("module catalog must be {\"modules\": [...]}");
  ModuleCatalog c;
  for (const auto& m : j["modules"]) {
    if (!m.contains("name") || !m.contains("size"))
      throw ConfigError("module entry needs name and size");
    c.push_back({m["name"].get<std::string>(), m["size"].get<uint64_t>()});
  }
  return c;
}

LibraryCatalog load_library_catalog(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open library catalog: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("bad library catalog JSON: " + std::string(e.what()));
  }
  if (!j.is_object() || !j.contains("libraries") || !j["libraries"].is_array())
    throw ConfigError("library catalog must be {\"libraries\": [...]}");
  LibraryCatalog c;
  for (const auto& l : j["libraries"]) {
    if (!l.contains("name") || !l.contains("section_sizes") ||
        !l["section_sizes"].is_array() || l["section_sizes"].size() != 4)
      throw ConfigError("library entry needs name and four section_sizes");
    LibraryEntry e;
    e.name = l["name"].get<std::string>();
    for (int i = 0; i < 4; i++) e.section_sizes[i] = l["section_sizes"][i].get<uint64_t>();
    c.push_back(e);
  }
  return c;
}

namespace {

uint64_t json_u64(const nlohmann::json& v, const std::string& key) {
  if (v.is_number_unsigned() || v.is_number_integer()) return v.get<uint64_t>();
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    try {
      return std::stoull(s, nullptr, 0);  // accepts 0x-prefixed hex
    } catch (const std::exception&) {
      throw ConfigError("bad integer for " + key + ": " + s);
    }
  }
  throw ConfigError(key + " must be an integer or a hex string");
}

}  // namespace

ScenarioSpec scenario_from_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("bad scenario JSON: " + std::string(e.what()));
  }
  if (!j.is_object() || !j.contains("kind"))
    throw ConfigError("scenario file needs a \"kind\" field");

  ScenarioSpec spec;
  for (const auto& [key, value] : j.items()) {
    if (key == "kind") spec.kind = scenario_kind_from_name(value.get<std::string>());
    else if (key == "seed") spec.seed = json_u64(value, key);
    else if (key == "mitigations") {
      for (const auto& m : value)
        spec.mitigations.push_back(mitigation_from_name(m.get<std::string>()));
    } else if (key == "trampoline_offset") spec.trampoline_offset = json_u64(value, key);
    else if (key == "kvas_offset") spec.kvas_offset = json_u64(value, key);
    else if (key == "userspace_window_bits") spec.userspace_window_bits = static_cast<int>(json_u64(value, key));
    else if (key == "kpti") spec.kpti = value.get<bool>();
    else if (key == "kernel_image_slots") spec.kernel_image_slots = static_cast<int>(json_u64(value, key));
    else if (key == "module_catalog") spec.module_catalog = load_module_catalog(value.get<std::string>());
    else if (key == "library_catalog") spec.library_catalog = load_library_catalog(value.get<std::string>());
    else throw ConfigError("unknown scenario field: " + key);
  }
  return spec;
}

}  // namespace aslrlab
