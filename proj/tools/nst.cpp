// nst: command-line front end for the texture self-similarity library.
//
// Every failure prints one line "error[<kind>]: <stage>: <message>" on stderr
// and exits 2 (usage), 3 (I/O) or 4 (numeric).

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include "nst/composite.hpp"
#include "nst/diffusion.hpp"
#include "nst/fbm.hpp"
#include "nst/glcm.hpp"
#include "nst/io.hpp"
#include "nst/mi.hpp"
#include "nst/report.hpp"
#include "nst/stats.hpp"

namespace fs = std::filesystem;
using nst::Json;

namespace {

struct DiffusionFlags {
  int iterations = 50;
  std::string kappa = "auto";
  double dt = 0.2;
  std::string cond = "exp";
  CLI::Option* iterations_opt = nullptr;
  CLI::Option* kappa_opt = nullptr;
  CLI::Option* dt_opt = nullptr;
  CLI::Option* cond_opt = nullptr;

  void attach(CLI::App* app) {
    iterations_opt = app->add_option("--iters", iterations, "Diffusion iterations N")->capture_default_str();
    kappa_opt = app->add_option("--kappa", kappa, "Edge threshold K, or 'auto'")->capture_default_str();
    dt_opt = app->add_option("--dt", dt, "Diffusion time step (<= 0.25)")->capture_default_str();
    cond_opt = app->add_option("--cond", cond, "Conductance: exp or rat")->capture_default_str();
  }

  // Only flags given on the command line override `base`.
  nst::DiffusionSettings apply(nst::DiffusionSettings base) const {
    if (iterations_opt->count()) base.iterations = iterations;
    if (dt_opt->count()) base.dt = dt;
    if (cond_opt->count()) base.conductance = nst::parse_conductance(cond);
    if (kappa_opt->count()) {
      if (kappa == "auto") {
        base.kappa.reset();
      } else {
        try {
          std::size_t used = 0;
          base.kappa = std::stod(kappa, &used);
          if (used != kappa.size()) throw std::invalid_argument(kappa);
        } catch (const std::logic_error&) {
          throw nst::UsageError("--kappa expects a number or 'auto', got '" + kappa + "'");
        }
      }
    }
    base.validate();
    return base;
  }
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) throw nst::IoError("cannot write " + path.string());
}

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty())
    std::cout << text;
  else
    write_text(out_path, text);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string ks_line(const std::string& label, const nst::KsOutcome& k) {
  std::ostringstream s;
  s << label << ": D=" << fmt(k.statistic) << " critical=" << fmt(k.critical) << " alpha=" << k.alpha
    << " n=" << k.n << (k.accepted ? " accepted" : " rejected") << "\n";
  return s.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Statistical self-similarity analysis of natural stochastic textures"};
  app.require_subcommand(1);
  std::string stage = "cli";

  // synth-fbm
  auto* synth = app.add_subcommand("synth-fbm", "Synthesize a 2D fBm field by exact Cholesky factorization");
  double hurst = 0.5, sigma2 = 1.0;
  std::size_t size = 64;
  std::uint64_t seed = 0;
  std::string out_path;
  synth->add_option("--hurst", hurst, "Hurst exponent in (0, 1)")->required();
  synth->add_option("--sigma2", sigma2, "Base variance sigma_w^2")->capture_default_str();
  synth->add_option("--size", size, "Side length in pixels (<= 128)")->required();
  synth->add_option("--seed", seed, "RNG seed")->capture_default_str();
  synth->add_option("--out", out_path, "Output .txf or .pgm (pgm is min/max normalized)")->required();

  // separate
  auto* sep = app.add_subcommand("separate", "Split an image into structure and texture layers");
  std::string input;
  std::string out_structure, out_texture;
  DiffusionFlags sep_flags;
  sep->add_option("input", input, "Input image")->required();
  sep_flags.attach(sep);
  sep->add_option("--out-structure", out_structure, "Structure layer (.txf or .pgm)");
  sep->add_option("--out-texture", out_texture, "Texture layer, always written as TXF")->required();

  // stats
  auto* stats = app.add_subcommand("stats", "Gaussianity, phase-uniformity and kurtosis tests");
  std::string test;
  double alpha = 0.05;
  bool lilliefors = false, as_json = false;
  DiffusionFlags stats_flags;
  stats->add_option("test", test, "gaussianity | phase | kurtosis")
      ->required()
      ->check(CLI::IsMember({"gaussianity", "phase", "kurtosis"}));
  stats->add_option("input", input, "Input image")->required();
  stats->add_option("--alpha", alpha, "Significance level")->capture_default_str();
  stats->add_flag("--lilliefors", lilliefors, "Lilliefors critical values for the Gaussianity test");
  stats->add_flag("--json", as_json, "JSON output");
  stats_flags.attach(stats);

  // phase-randomize
  auto* phase = app.add_subcommand("phase-randomize", "Replace Fourier phases by i.i.d. uniform draws");
  phase->add_option("input", input, "Input image")->required();
  phase->add_option("--seed", seed, "RNG seed")->capture_default_str();
  phase->add_option("-o,--out", out_path, "Output .txf or .pgm")->required();

  // mi-scales
  auto* scales = app.add_subcommand("mi-scales", "MI between consecutive pyramid levels");
  std::size_t levels = 4;
  std::uint32_t bins = 256;
  bool as_csv = false;
  scales->add_option("input", input, "Input image")->required();
  scales->add_option("--levels", levels, "Pyramid levels")->capture_default_str();
  scales->add_option("--bins", bins, "Histogram bins")->capture_default_str();
  auto* scales_json = scales->add_flag("--json", as_json, "JSON output (default)");
  scales->add_flag("--csv", as_csv, "CSV output")->excludes(scales_json);
  scales->add_option("-o,--out", out_path, "Write to file instead of stdout");

  // mi-patches
  auto* patches = app.add_subcommand("mi-patches", "Normalized MI between same-level patches");
  std::size_t patch = 32, patch_levels = 3;
  std::string out_dir = ".";
  patches->add_option("input", input, "Input image")->required();
  patches->add_option("--patch", patch, "Patch side in pixels")->capture_default_str();
  patches->add_option("--levels", patch_levels, "Pyramid levels")->capture_default_str();
  patches->add_option("--bins", bins, "Histogram bins")->capture_default_str();
  patches->add_flag("--csv", as_csv, "Write level<k>_matrix.csv and level<k>_hist.csv per level");
  patches->add_option("--out-dir", out_dir, "Directory for CSV files")->capture_default_str();

  // glcm-mi
  auto* glcm = app.add_subcommand("glcm-mi", "GLCM mutual information as a function of offset");
  std::uint32_t glcm_levels = 32;
  std::string sweep = "horizontal";
  int d_max = 30;
  glcm->add_option("input", input, "Input image")->required();
  glcm->add_option("--levels", glcm_levels, "Gray levels")->capture_default_str();
  glcm->add_option("--sweep", sweep, "horizontal or diagonal")
      ->check(CLI::IsMember({"horizontal", "diagonal"}))
      ->capture_default_str();
  glcm->add_option("--d-max", d_max, "Largest offset")->capture_default_str();
  glcm->add_flag("--csv", as_csv, "CSV output (default JSON)");
  glcm->add_option("-o,--out", out_path, "Write to file instead of stdout");

  // report / batch share the configuration flags
  nst::ReportConfig defaults;
  std::string config_path;
  std::map<CLI::App*, DiffusionFlags> report_flags;
  std::size_t workers = 0;
  auto* report = app.add_subcommand("report", "Full pipeline on one image, JSON output");
  auto* batch = app.add_subcommand("batch", "Full pipeline on every image in a directory");
  report->add_option("input", input, "Input image")->required();
  batch->add_option("input", input, "Input directory")->required();
  report->add_option("-o,--out", out_path, "Write the report to a file");
  batch->add_option("--out-dir", out_dir, "Directory for per-image reports")->capture_default_str();
  batch->add_option("--workers", workers, "Worker threads (default: NST_WORKERS or hardware threads)");
  std::map<CLI::App*, std::map<std::string, CLI::Option*>> cfg_opts_by_sub;
  for (auto* sub : {report, batch}) {
    auto& cfg_opts = cfg_opts_by_sub[sub];
    sub->add_option("--config", config_path, "JSON config file");
    report_flags[sub].attach(sub);
    cfg_opts["alpha"] = sub->add_option("--alpha", defaults.alpha, "Significance level");
    cfg_opts["lilliefors"] = sub->add_flag("--lilliefors", defaults.lilliefors, "Lilliefors critical values");
    cfg_opts["bins"] = sub->add_option("--bins", defaults.bins, "Histogram bins for MI");
    cfg_opts["scale_levels"] = sub->add_option("--scale-levels", defaults.scale_levels, "Pyramid levels for mi-scales");
    cfg_opts["patch"] = sub->add_option("--patch", defaults.patch, "Patch side for mi-patches");
    cfg_opts["patch_levels"] = sub->add_option("--patch-levels", defaults.patch_levels, "Pyramid levels for mi-patches");
    cfg_opts["glcm_levels"] = sub->add_option("--glcm-levels", defaults.glcm_levels, "Gray levels for GLCM");
    cfg_opts["d_max"] = sub->add_option("--d-max", defaults.d_max, "Largest GLCM offset");
  }

  // composite fixture generator
  auto* comp = app.add_subcommand("composite", "fBm texture plus a step, disk or checker overlay");
  std::string structure = "step";
  double amplitude = 0.5;
  comp->add_option("--hurst", hurst, "Hurst exponent")->required();
  comp->add_option("--size", size, "Side length (<= 128)")->required();
  comp->add_option("--structure", structure, "step | disk | checker")->capture_default_str();
  comp->add_option("--amplitude", amplitude, "Overlay amplitude")->capture_default_str();
  comp->add_option("--seed", seed, "RNG seed")->capture_default_str();
  comp->add_option("--out", out_path, "Output .txf or .pgm")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    std::cerr << "error[usage]: cli: " << msg << "\n";
    return static_cast<int>(nst::ErrorKind::Usage);
  }

  try {
    if (*synth) {
      stage = "synth-fbm";
      const nst::FbmParams params{hurst, sigma2};
      params.validate();
      const auto format = nst::format_from_extension(out_path);
      const auto field = nst::synth_field(params, size, seed);
      nst::save_image(format == nst::ImageFormat::Pgm8 ? nst::normalize_unit(field.grid) : field.grid, out_path,
                      format);
    } else if (*comp) {
      stage = "composite";
      const auto kind = nst::parse_structure_kind(structure);
      const auto format = nst::format_from_extension(out_path);
      const auto c = nst::make_composite(hurst, size, kind, amplitude, seed);
      nst::save_image(c.image, out_path, format);
    } else if (*sep) {
      stage = "load";
      const auto img = nst::load_image(input);
      stage = "separate";
      const auto r = nst::separate(img, sep_flags.apply({}));
      stage = "save";
      nst::save_image(r.texture, out_texture, nst::ImageFormat::Txf);
      if (!out_structure.empty()) nst::save_image(r.structure, out_structure);
      std::cout << "kappa " << fmt(*r.settings.kappa) << "\n";
    } else if (*stats) {
      stage = "load";
      const auto img = nst::load_image(input);
      stage = "stats";
      if (!(alpha > 0.0 && alpha < 1.0)) throw nst::UsageError("--alpha must lie in (0, 1)");
      const auto g = nst::gaussianity_report(img, stats_flags.apply({}), alpha, lilliefors);
      Json j;
      j["test"] = test;
      j["input"] = input;
      j["diffusion"] = nst::to_json(g.settings);
      std::string text;
      auto section = [&](const char* layer, bool degenerate, const auto& ks, const auto& kurt) {
        Json& s = j[layer];
        s["degenerate"] = degenerate;
        if (degenerate) {
          text += std::string(layer) + ": degenerate layer\n";
          return;
        }
        if (test == "gaussianity" && ks) {
          s["ks"] = nst::to_json(*ks);
          text += ks_line(std::string(layer) + " gaussianity", *ks);
        }
        if (test == "kurtosis" && kurt) {
          s["kurtosis"] = nst::to_json(*kurt);
          text += std::string(layer) + " kurtosis: plain=" + fmt(kurt->plain) + " excess=" + fmt(kurt->excess) + "\n";
        }
      };
      if (test == "phase") {
        j["texture"]["degenerate"] = g.degenerate_texture;
        if (g.texture_phase) {
          j["texture"]["phase"] = nst::to_json(*g.texture_phase);
          text += ks_line("texture phase", *g.texture_phase);
        } else {
          text += "texture: degenerate layer\n";
        }
      } else {
        section("raw", g.degenerate_raw, g.raw, g.raw_kurtosis);
        section("texture", g.degenerate_texture, g.texture, g.texture_kurtosis);
      }
      std::cout << (as_json ? j.dump(2) + "\n" : text);
    } else if (*phase) {
      stage = "load";
      const auto img = nst::load_image(input);
      stage = "phase-randomize";
      const auto format = nst::format_from_extension(out_path);
      const auto out = nst::randomize_phase(img, seed);
      nst::save_image(format == nst::ImageFormat::Pgm8 ? nst::normalize_unit(out) : out, out_path, format);
    } else if (*scales) {
      stage = "load";
      const auto img = nst::load_image(input);
      stage = "mi-scales";
      const auto r = nst::mi_scales(img, levels, nst::HistogramSpec{bins});
      if (as_csv) {
        std::string csv = "n,mi_bits,entropy_fine,entropy_coarse,conditional_entropy\n";
        for (const auto& e : r.entries)
          csv += std::to_string(e.n) + "," + fmt(e.mi) + "," + fmt(e.entropy_fine) + "," + fmt(e.entropy_coarse) +
                 "," + fmt(e.conditional) + "\n";
        emit(csv, out_path);
      } else {
        emit(nst::to_json(r).dump(2) + "\n", out_path);
      }
    } else if (*patches) {
      stage = "load";
      const auto img = nst::load_image(input);
      stage = "mi-patches";
      const auto r = nst::mi_patches(img, patch, patch_levels, nst::HistogramSpec{bins});
      if (as_csv) {
        fs::create_directories(out_dir);
        for (const auto& level : r.levels) {
          const std::size_t count = level.patches_x * level.patches_y;
          std::string matrix;
          for (std::size_t i = 0; i < count; ++i)
            for (std::size_t k = 0; k < count; ++k)
              matrix += fmt(level.matrix[i * count + k]) + (k + 1 < count ? "," : "\n");
          const auto stem = fs::path(out_dir) / ("level" + std::to_string(level.level));
          write_text(stem.string() + "_matrix.csv", matrix);
          const std::size_t hist_bins = 20;
          const auto hist = nst::unit_histogram(level.off_diagonal, hist_bins);
          std::string h = "bin_lo,bin_hi,count\n";
          for (std::size_t b = 0; b < hist_bins; ++b)
            h += fmt(static_cast<double>(b) / hist_bins) + "," + fmt(static_cast<double>(b + 1) / hist_bins) + "," +
                 std::to_string(hist[b]) + "\n";
          write_text(stem.string() + "_hist.csv", h);
        }
      }
      std::cout << nst::summary_json(r).dump(2) << "\n";
    } else if (*glcm) {
      stage = "load";
      const auto img = nst::load_image(input);
      stage = "glcm-mi";
      const auto s = sweep == "horizontal" ? nst::Sweep::Horizontal : nst::Sweep::Diagonal;
      const auto profile = nst::glcm_mi_profile(img, glcm_levels, nst::sweep_offsets(s, d_max));
      if (as_csv) {
        std::string csv = "dx,dy,mi_bits,pairs\n";
        for (const auto& p : profile.points)
          csv += std::to_string(p.offset.dx) + "," + std::to_string(p.offset.dy) + "," + fmt(p.mi) + "," +
                 std::to_string(p.pairs) + "\n";
        emit(csv, out_path);
      } else {
        emit(nst::to_json(profile, s).dump(2) + "\n", out_path);
      }
    } else if (*report || *batch) {
      stage = "config";
      nst::ReportConfig cfg;
      if (!config_path.empty()) nst::load_config_file(cfg, config_path);
      CLI::App* sub = *report ? report : batch;
      for (const auto& [key, opt] : cfg_opts_by_sub[sub]) {
        if (!opt->count()) continue;
        if (key == "alpha") cfg.alpha = defaults.alpha;
        if (key == "lilliefors") cfg.lilliefors = defaults.lilliefors;
        if (key == "bins") cfg.bins = defaults.bins;
        if (key == "scale_levels") cfg.scale_levels = defaults.scale_levels;
        if (key == "patch") cfg.patch = defaults.patch;
        if (key == "patch_levels") cfg.patch_levels = defaults.patch_levels;
        if (key == "glcm_levels") cfg.glcm_levels = defaults.glcm_levels;
        if (key == "d_max") cfg.d_max = defaults.d_max;
      }
      cfg.diffusion = report_flags[sub].apply(cfg.diffusion);
      cfg.validate();
      if (*report) {
        const Json doc = nst::run_report(fs::path(input), cfg);
        stage = "save";
        emit(doc.dump(2) + "\n", out_path);
      } else {
        const std::size_t n = workers > 0 ? workers : nst::default_workers();
        std::vector<nst::BatchItem> items;
        stage = "batch";
        Json agg = nst::run_batch(input, cfg, n, &items);
        stage = "save";
        fs::create_directories(out_dir);
        for (const auto& item : items)
          if (item.report)
            write_text(fs::path(out_dir) / (item.path.filename().string() + ".json"), item.report->dump(2) + "\n");
        agg["workers"] = n;
        write_text(fs::path(out_dir) / "aggregate.json", agg.dump(2) + "\n");
        std::cout << agg.dump(2) << "\n";
      }
    }
  } catch (const nst::StageError& e) {
    std::cerr << "error[" << nst::to_string(e.kind()) << "]: " << e.stage() << ": " << e.what() << "\n";
    return static_cast<int>(e.kind());
  } catch (const nst::Error& e) {
    std::cerr << "error[" << nst::to_string(e.kind()) << "]: " << stage << ": " << e.what() << "\n";
    return static_cast<int>(e.kind());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error[io]: " << stage << ": " << e.what() << "\n";
    return static_cast<int>(nst::ErrorKind::Io);
  } catch (const std::bad_alloc&) {
    std::cerr << "error[numeric]: " << stage << ": out of memory\n";
    return static_cast<int>(nst::ErrorKind::Numeric);
  }
  return 0;
}
