#pragma once

// End-to-end pipeline: separation, Gaussianity/phase tests, scale-wise and
// patch-wise MI and GLCM-MI profiles, serialized as ordered JSON.

#include <nlohmann/json.hpp>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "nst/core.hpp"
#include "nst/diffusion.hpp"
#include "nst/glcm.hpp"
#include "nst/io.hpp"
#include "nst/mi.hpp"
#include "nst/stats.hpp"

namespace nst {

using Json = nlohmann::ordered_json;

/// Error raised inside a named pipeline stage; keeps the original category.
class StageError : public Error {
 public:
  StageError(std::string stage, const Error& cause)
      : Error(cause.kind(), cause.what()), stage_(std::move(stage)) {}

  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

template <typename F>
auto run_stage(const std::string& stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(stage, e);
  }
}

struct ReportConfig {
  DiffusionSettings diffusion;
  double alpha = 0.05;
  bool lilliefors = false;
  std::uint32_t bins = 256;
  std::size_t scale_levels = 4;
  std::size_t patch = 32;
  std::size_t patch_levels = 3;
  std::uint32_t glcm_levels = 32;
  int d_max = 30;

  void validate() const {
    diffusion.validate();
    if (!(alpha > 0.0 && alpha < 1.0)) throw UsageError("alpha must lie in (0, 1)");
    HistogramSpec{bins}.validate();
    if (scale_levels < 2) throw UsageError("scale_levels must be >= 2");
    if (patch < 8) throw UsageError("patch must be >= 8");
    if (patch_levels < 1) throw UsageError("patch_levels must be >= 1");
    if (glcm_levels < 2) throw UsageError("glcm_levels must be >= 2");
    if (d_max < 1) throw UsageError("d_max must be >= 1");
  }
};

// Config file keys (all optional): iterations, kappa (number or "auto"), dt,
// conductance ("exp"|"rat"), alpha, lilliefors, bins, scale_levels, patch,
// patch_levels, glcm_levels, d_max.
inline void apply_config_json(ReportConfig& cfg, const Json& j) {
  if (!j.is_object()) throw UsageError("config file must hold a JSON object");
  static const std::vector<std::string> known = {"iterations", "kappa", "dt", "conductance", "alpha", "lilliefors",
                                                 "bins", "scale_levels", "patch", "patch_levels", "glcm_levels",
                                                 "d_max"};
  for (const auto& [key, value] : j.items())
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw UsageError("unknown config key '" + key + "'");
  try {
    if (j.contains("iterations")) cfg.diffusion.iterations = j.at("iterations").get<int>();
    if (j.contains("kappa")) {
      const auto& k = j.at("kappa");
      if (k.is_string() && k.get<std::string>() == "auto")
        cfg.diffusion.kappa.reset();
      else
        cfg.diffusion.kappa = k.get<double>();
    }
    if (j.contains("dt")) cfg.diffusion.dt = j.at("dt").get<double>();
    if (j.contains("conductance")) cfg.diffusion.conductance = parse_conductance(j.at("conductance").get<std::string>());
    if (j.contains("alpha")) cfg.alpha = j.at("alpha").get<double>();
    if (j.contains("lilliefors")) cfg.lilliefors = j.at("lilliefors").get<bool>();
    if (j.contains("bins")) cfg.bins = j.at("bins").get<std::uint32_t>();
    if (j.contains("scale_levels")) cfg.scale_levels = j.at("scale_levels").get<std::size_t>();
    if (j.contains("patch")) cfg.patch = j.at("patch").get<std::size_t>();
    if (j.contains("patch_levels")) cfg.patch_levels = j.at("patch_levels").get<std::size_t>();
    if (j.contains("glcm_levels")) cfg.glcm_levels = j.at("glcm_levels").get<std::uint32_t>();
    if (j.contains("d_max")) cfg.d_max = j.at("d_max").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("bad config value: ") + e.what());
  }
}

inline void load_config_file(ReportConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  apply_config_json(cfg, j);
}

/// 64-bit FNV-1a, used as the input checksum.
inline std::uint64_t fnv1a64(const std::vector<unsigned char>& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xf];
  return s;
}

inline Json to_json(const DiffusionSettings& s) {
  Json j;
  j["iterations"] = s.iterations;
  j["kappa"] = s.kappa ? Json(*s.kappa) : Json("auto");
  j["dt"] = s.dt;
  j["conductance"] = to_string(s.conductance);
  return j;
}

inline Json to_json(const KsOutcome& k) {
  return Json{{"statistic", k.statistic}, {"critical", k.critical}, {"alpha", k.alpha},
              {"accepted", k.accepted},   {"n", k.n}};
}

inline Json to_json(const Kurtosis& k) { return Json{{"plain", k.plain}, {"excess", k.excess}}; }

inline Json to_json(const ReportConfig& c) {
  Json j;
  j["diffusion"] = to_json(c.diffusion);
  j["alpha"] = c.alpha;
  j["lilliefors"] = c.lilliefors;
  j["bins"] = c.bins;
  j["scale_levels"] = c.scale_levels;
  j["patch"] = c.patch;
  j["patch_levels"] = c.patch_levels;
  j["glcm_levels"] = c.glcm_levels;
  j["d_max"] = c.d_max;
  return j;
}

inline Json to_json(const GaussianityReport& r) {
  Json j;
  j["diffusion"] = to_json(r.settings);
  j["raw"] = Json::object();
  j["raw"]["degenerate"] = r.degenerate_raw;
  if (r.raw) j["raw"]["ks"] = to_json(*r.raw);
  if (r.raw_kurtosis) j["raw"]["kurtosis"] = to_json(*r.raw_kurtosis);
  j["texture"] = Json::object();
  j["texture"]["degenerate"] = r.degenerate_texture;
  if (r.texture) j["texture"]["ks"] = to_json(*r.texture);
  if (r.texture_kurtosis) j["texture"]["kurtosis"] = to_json(*r.texture_kurtosis);
  if (r.texture_phase) j["texture"]["phase"] = to_json(*r.texture_phase);
  return j;
}

inline Json to_json(const MiScaleReport& r) {
  Json j;
  j["levels"] = r.levels;
  j["bins"] = r.spec.bins;
  j["pairs"] = Json::array();
  for (const auto& e : r.entries)
    j["pairs"].push_back(Json{{"n", e.n},
                              {"mi", e.mi},
                              {"entropy_fine", e.entropy_fine},
                              {"entropy_coarse", e.entropy_coarse},
                              {"conditional_entropy", e.conditional}});
  return j;
}

inline Json summary_json(const MiPatchReport& r) {
  Json j;
  j["patch"] = r.patch;
  j["bins"] = r.spec.bins;
  j["levels"] = Json::array();
  for (const auto& level : r.levels) {
    Json l{{"level", level.level},
           {"width", level.width},
           {"height", level.height},
           {"patches", level.patches_x * level.patches_y}};
    if (level.off_diagonal.empty()) {
      l["median"] = nullptr;
      l["iqr"] = nullptr;
    } else {
      const auto s = summarize(level.off_diagonal);
      l["median"] = s.median;
      l["iqr"] = s.iqr;
    }
    j["levels"].push_back(std::move(l));
  }
  return j;
}

inline Json to_json(const GlcmMiProfile& p, Sweep sweep) {
  Json j;
  j["sweep"] = to_string(sweep);
  j["levels"] = p.levels;
  j["points"] = Json::array();
  for (const auto& pt : p.points)
    j["points"].push_back(Json{{"dx", pt.offset.dx}, {"dy", pt.offset.dy}, {"mi", pt.mi}, {"pairs", pt.pairs}});
  return j;
}

/// Largest sweep distance that fits the image, capped at d_max.
inline int fitting_d_max(const GrayImage& img, int d_max) {
  const auto limit = static_cast<int>(std::min(img.width(), img.height())) - 1;
  return std::min(d_max, limit);
}

inline Json run_report(const GrayImage& img, const ReportConfig& config) {
  config.validate();
  Json doc;
  doc["settings"] = to_json(config);

  const SeparationResult sep = run_stage("separate", [&] { return separate(img, config.diffusion); });
  doc["settings"]["diffusion"]["kappa_resolved"] = *sep.settings.kappa;

  const GaussianityReport g =
      run_stage("stats", [&] { return gaussianity_report(img, sep, config.alpha, config.lilliefors); });
  doc["gaussianity"] = to_json(g);
  doc["degenerate_texture_layer"] = g.degenerate_texture;

  const HistogramSpec spec{config.bins};
  doc["mi_scales"] = run_stage("mi-scales", [&] { return to_json(mi_scales(sep.texture, config.scale_levels, spec)); });
  doc["mi_patches"] =
      run_stage("mi-patches", [&] { return summary_json(mi_patches(sep.texture, config.patch, config.patch_levels, spec)); });

  doc["glcm_mi"] = run_stage("glcm-mi", [&] {
    const int d = fitting_d_max(sep.texture, config.d_max);
    if (d < 1) throw UsageError("image too small for any GLCM offset");
    Json j = Json::array();
    for (Sweep s : {Sweep::Horizontal, Sweep::Diagonal})
      j.push_back(to_json(glcm_mi_profile(sep.texture, config.glcm_levels, sweep_offsets(s, d)), s));
    return j;
  });
  return doc;
}

inline Json run_report(const std::filesystem::path& path, const ReportConfig& config) {
  const auto bytes = run_stage("load", [&] { return io_detail::read_file(path); });
  const GrayImage img = run_stage("load", [&] { return decode_image(bytes); });
  Json doc;
  doc["input"] = Json{{"path", path.string()},
                      {"width", img.width()},
                      {"height", img.height()},
                      {"checksum_fnv1a64", hex64(fnv1a64(bytes))}};
  const Json body = run_report(img, config);
  for (const auto& [key, value] : body.items()) doc[key] = value;
  return doc;
}

inline bool is_image_path(const std::filesystem::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".pgm" || ext == ".png" || ext == ".txf";
}

/// Worker count from NST_WORKERS, else the hardware concurrency (at least 1).
inline std::size_t default_workers() {
  if (const char* env = std::getenv("NST_WORKERS")) {
    char* end = nullptr;
    const unsigned long v = std::strtoul(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return v;
    throw UsageError(std::string("NST_WORKERS must be a positive integer, got '") + env + "'");
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

struct BatchItem {
  std::filesystem::path path;
  std::optional<Json> report;
  std::string error;  // "kind: stage: message" when report is empty
};

inline double percent(std::size_t k, std::size_t n) {
  return n == 0 ? 0.0 : 100.0 * static_cast<double>(k) / static_cast<double>(n);
}

/// Reports for every image file directly inside `dir` (sorted by name), run on
/// at most `workers` threads, plus pass-rate percentages across the batch.
inline Json run_batch(const std::filesystem::path& dir, const ReportConfig& config, std::size_t workers,
                      std::vector<BatchItem>* items_out = nullptr) {
  config.validate();
  if (!std::filesystem::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<BatchItem> items;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file() && is_image_path(entry.path())) items.push_back({entry.path(), {}, {}});
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.path < b.path; });

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < items.size(); i = next++) {
      try {
        items[i].report = run_report(items[i].path, config);
      } catch (const StageError& e) {
        items[i].error = std::string(to_string(e.kind())) + ": " + e.stage() + ": " + e.what();
      } catch (const Error& e) {
        items[i].error = std::string(to_string(e.kind())) + ": " + e.what();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    const std::size_t n = std::max<std::size_t>(1, std::min(workers, items.size()));
    for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
  }

  std::size_t ok = 0, raw_pass = 0, tex_pass = 0, phase_pass = 0, degenerate = 0;
  Json failures = Json::array();
  for (const auto& item : items) {
    if (!item.report) {
      failures.push_back(Json{{"path", item.path.string()}, {"error", item.error}});
      continue;
    }
    ++ok;
    const auto& g = (*item.report)["gaussianity"];
    if (g["raw"].contains("ks") && g["raw"]["ks"]["accepted"].get<bool>()) ++raw_pass;
    if (g["texture"]["degenerate"].get<bool>()) ++degenerate;
    if (g["texture"].contains("ks") && g["texture"]["ks"]["accepted"].get<bool>()) ++tex_pass;
    if (g["texture"].contains("phase") && g["texture"]["phase"]["accepted"].get<bool>()) ++phase_pass;
  }
  Json agg;
  agg["directory"] = dir.string();
  agg["settings"] = to_json(config);
  agg["images"] = items.size();
  agg["succeeded"] = ok;
  agg["degenerate_texture_layers"] = degenerate;
  agg["gaussian_pass_rate_percent"] = Json{{"entire_image", percent(raw_pass, ok)}, {"texture_layer", percent(tex_pass, ok)}};
  agg["uniform_phase_pass_rate_percent"] = Json{{"texture_layer", percent(phase_pass, ok)}};
  agg["failures"] = std::move(failures);
  if (items_out) *items_out = std::move(items);
  return agg;
}

}  // namespace nst
