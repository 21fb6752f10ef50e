// Command-line driver: simulate coded captures, reconstruct, denoise,
// inpaint, and evaluate, all from flat key=value configs or flags.

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>

#include "bcs/errors.hpp"
#include "bcs/evalkit.hpp"
#include "bcs/io.hpp"
#include "bcs/randmath.hpp"
#include "bcs/recon.hpp"
#include "bcs/rng.hpp"

namespace fs = std::filesystem;

namespace {

struct InferenceFlags {
  std::string inference = "gibbs";
  int iters = 200;
  int burn_in = 100;
  int k = 64;
  int patch = 0;
  int stride = 2;
  std::uint64_t seed = 0;
  double prune = 0.0;
  bool final_sample_only = false;
  bool vb_phi_inverse = false;
  int threads = 1;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--inference", inference, "gibbs or vb")
        ->check(CLI::IsMember({"gibbs", "vb"}));
    cmd->add_option("--iters", iters, "iterations / sweeps");
    cmd->add_option("--burn-in", burn_in, "burn-in sweeps (gibbs)");
    cmd->add_option("--k", k, "dictionary size K");
    cmd->add_option("--patch", patch, "patch side (0 = task default)");
    cmd->add_option("--stride", stride, "patch stride");
    cmd->add_option("--seed", seed, "rng seed");
    cmd->add_option("--prune", prune, "relative atom-weight prune cutoff");
    cmd->add_flag("--final-sample-only", final_sample_only,
                  "gibbs: report the last sample instead of the mean");
    cmd->add_flag("--vb-phi-inverse", vb_phi_inverse,
                  "vb: use <1/Phi> in the local-shrinkage update");
    cmd->add_option("--threads", threads, "worker thread cap");
  }

  bcs::InferenceOpts opts() const {
    bcs::InferenceOpts o;
    o.kind = inference == "vb" ? bcs::InferenceKind::vb
                               : bcs::InferenceKind::gibbs;
    o.iterations = iters;
    o.burn_in = inference == "vb" ? 0 : burn_in;
    o.K = k;
    o.seed = seed;
    o.prune_threshold = prune;
    o.final_sample_only = final_sample_only;
    o.vb_phi_inverse = vb_phi_inverse;
    o.threads = threads;
    return o;
  }

  void record(bcs::RunConfig& cfg) const {
    cfg["inference"] = inference;
    cfg["iters"] = std::to_string(iters);
    cfg["burn-in"] = std::to_string(burn_in);
    cfg["k"] = std::to_string(k);
    cfg["patch"] = std::to_string(patch);
    cfg["stride"] = std::to_string(stride);
    cfg["seed"] = std::to_string(seed);
    cfg["prune"] = std::to_string(prune);
    cfg["final-sample-only"] = final_sample_only ? "true" : "false";
    cfg["vb-phi-inverse"] = vb_phi_inverse ? "true" : "false";
    cfg["threads"] = std::to_string(threads);
  }
};

std::string prepare_out(const std::string& out) {
  fs::create_directories(out);
  return out;
}

bcs::Datacube load_image(const std::string& path) {
  if (path.size() > 4 && path.substr(path.size() - 4) == ".png")
    return bcs::read_png_rgb(path);
  return bcs::read_cube(path);
}

void save_image(const std::string& stem, const bcs::Datacube& img,
                bool as_png) {
  bcs::write_cube(stem + ".hsdc", img);
  if (as_png && img.nl == 3) bcs::write_png_rgb(stem + ".png", img);
}

void write_report(const std::string& dir, const bcs::EvalReport& rep) {
  std::ofstream csv(dir + "/report.csv");
  if (!csv) throw bcs::IoError("cannot open " + dir + "/report.csv");
  csv << "metric,index,value\n";
  csv.precision(10);
  for (std::size_t j = 0; j < rep.psnr_per_channel.size(); ++j)
    csv << "psnr_channel," << j << "," << rep.psnr_per_channel[j] << "\n";
  csv << "psnr_mean,," << rep.psnr_mean << "\n";
  csv << "psnr_std,," << rep.psnr_std << "\n";
  for (std::size_t i = 0; i < rep.spectral_corr.size(); ++i)
    csv << "spectral_corr," << rep.regions[i].name << ","
        << rep.spectral_corr[i] << "\n";

  std::ofstream txt(dir + "/report.txt");
  if (!txt) throw bcs::IoError("cannot open " + dir + "/report.txt");
  txt << "PSNR (dB) per channel:\n";
  txt.precision(4);
  txt.setf(std::ios::fixed);
  for (std::size_t j = 0; j < rep.psnr_per_channel.size(); ++j) {
    txt << "  channel " << j << ": ";
    if (std::isinf(rep.psnr_per_channel[j]))
      txt << "inf (exact)\n";
    else
      txt << rep.psnr_per_channel[j] << "\n";
  }
  txt << "PSNR mean±std: " << rep.summary() << "\n";
  for (std::size_t i = 0; i < rep.spectral_corr.size(); ++i)
    txt << "spectral corr [" << rep.regions[i].name
        << "]: " << rep.spectral_corr[i] << "\n";
  std::cout << "PSNR: " << rep.summary() << "\n";
}

bcs::Region parse_region(const std::string& s) {
  bcs::Region r;
  std::istringstream is(s);
  std::string tok;
  std::vector<std::string> parts;
  while (std::getline(is, tok, ':')) parts.push_back(tok);
  if (parts.size() != 5)
    throw bcs::ValidationError("region '" + s +
                               "' must be name:x0:y0:h:w");
  r.name = parts[0];
  r.x0 = std::stoi(parts[1]);
  r.y0 = std::stoi(parts[2]);
  r.h = std::stoi(parts[3]);
  r.w = std::stoi(parts[4]);
  return r;
}

// ---- simulate ----

struct SimulateArgs {
  std::string scene = "synthetic";
  int nx = 64, ny = 64, nl = 8;
  std::string code = "cassi-bernoulli";
  std::uint64_t seed = 0;
  double noise_alpha0 = std::numeric_limits<double>::infinity();
  bool with_rgb = false;
  std::string out = "sim_out";
};

void run_simulate(const SimulateArgs& a) {
  const std::string dir = prepare_out(a.out);
  bcs::Datacube truth;
  if (a.scene == "synthetic")
    truth = bcs::synthetic_scene(a.nx, a.ny, a.nl, a.seed);
  else
    truth = bcs::read_cube(a.scene);

  bcs::CodeCube code;
  if (a.code == "cassi-bernoulli") {
    bcs::Rng rng(a.seed + 1);
    Eigen::MatrixXd base(truth.nx + truth.nl - 1, truth.ny);
    for (int r = 0; r < base.rows(); ++r)
      for (int c = 0; c < base.cols(); ++c)
        base(r, c) = rng.uniform() < 0.5 ? 0.0 : 1.0;
    code = bcs::make_cassi_code(base, truth.nl);
  } else if (a.code == "slm") {
    code = bcs::make_slm_code(a.seed + 1, truth.nx, truth.ny, truth.nl,
                              bcs::default_slm_response(truth.nl));
  } else {
    code.codes = bcs::read_cube(a.code);
    code.kind = bcs::CodeKind::custom;
    code.validate();
  }

  bcs::Measurement m = bcs::forward(truth, code);
  m = bcs::add_noise(m, a.noise_alpha0, a.seed + 2);

  bcs::write_cube(dir + "/truth.hsdc", truth);
  bcs::write_cube(dir + "/code.hsdc", code.codes);
  bcs::Datacube meas(truth.nx, truth.ny, 1);
  for (int x = 0; x < truth.nx; ++x)
    for (int y = 0; y < truth.ny; ++y) meas.at(x, y, 0) = m.image(x, y);
  bcs::write_cube(dir + "/measurement.hsdc", meas);

  if (a.with_rgb) {
    // Simple synthetic color camera: three smooth spectral response bands.
    bcs::Datacube rgb(truth.nx, truth.ny, 3);
    for (int c = 0; c < 3; ++c) {
      const double center = (c + 0.5) * truth.nl / 3.0 - 0.5;
      const double width = std::max(1.0, truth.nl / 4.0);
      for (int j = 0; j < truth.nl; ++j) {
        const double w =
            std::exp(-0.5 * (j - center) * (j - center) / (width * width));
        for (int x = 0; x < truth.nx; ++x)
          for (int y = 0; y < truth.ny; ++y)
            rgb.at(x, y, c) += w * truth.at(x, y, j);
      }
    }
    bcs::write_cube(dir + "/side_rgb.hsdc", rgb);
  }

  bcs::RunConfig cfg;
  cfg["command"] = "simulate";
  cfg["scene"] = a.scene;
  cfg["nx"] = std::to_string(truth.nx);
  cfg["ny"] = std::to_string(truth.ny);
  cfg["nl"] = std::to_string(truth.nl);
  cfg["code"] = a.code;
  cfg["seed"] = std::to_string(a.seed);
  cfg["noise-alpha0"] = std::isinf(a.noise_alpha0)
                            ? std::string("inf")
                            : std::to_string(a.noise_alpha0);
  cfg["with-rgb"] = a.with_rgb ? "true" : "false";
  bcs::write_config(dir + "/run_config.txt", cfg);
  std::cout << "wrote " << dir << "/{truth,code,measurement}.hsdc\n";
}

// ---- reconstruct ----

struct ReconstructArgs {
  std::string measurement, code, truth, side_rgb;
  InferenceFlags inf;
  std::string out = "recon_out";
};

void run_reconstruct(const ReconstructArgs& a) {
  const std::string dir = prepare_out(a.out);
  bcs::ReconJob job;
  job.task = bcs::ReconTask::cs_hyperspectral;
  bcs::Datacube meas = bcs::read_cube(a.measurement);
  if (meas.nl != 1)
    throw bcs::ValidationError("measurement file must have a single channel");
  job.measurement.image = meas.channel(0);
  bcs::CodeCube code;
  code.codes = bcs::read_cube(a.code);
  code.kind = bcs::CodeKind::custom;
  job.code = code;
  if (!a.side_rgb.empty())
    job.measurement.side_rgb = bcs::read_cube(a.side_rgb);
  job.patches.patch = a.inf.patch;
  job.patches.stride = a.inf.stride;
  job.opts = a.inf.opts();

  bcs::ReconResult res = bcs::reconstruct_cs(job);
  bcs::write_cube(dir + "/estimate.hsdc", res.estimate);
  bcs::write_trace_csv(
      dir + "/trace.csv",
      res.objective_is_misfit ? "expected_misfit" : "neg_log_posterior",
      res.objective, res.alpha0_trace);
  for (const std::string& w : res.warnings) std::cerr << "warning: " << w << "\n";

  bcs::RunConfig cfg;
  cfg["command"] = "reconstruct";
  cfg["measurement"] = a.measurement;
  cfg["code"] = a.code;
  if (!a.truth.empty()) cfg["truth"] = a.truth;
  if (!a.side_rgb.empty()) cfg["side-rgb"] = a.side_rgb;
  a.inf.record(cfg);
  cfg["compression-ratio"] = std::to_string(res.compression_num) + ":" +
                             std::to_string(res.compression_den);
  bcs::write_config(dir + "/run_config.txt", cfg);

  if (!a.truth.empty()) {
    const bcs::Datacube truth = bcs::read_cube(a.truth);
    write_report(dir, bcs::psnr(res.estimate, truth));
  }
  std::cout << "wrote " << dir << "/estimate.hsdc ("
            << res.compression_num << ":" << res.compression_den
            << " compression, " << res.runtime_seconds << " s)\n";
}

// ---- denoise / inpaint ----

struct RestoreArgs {
  std::string input, truth, mask;
  double sigma = 0.0;
  bool corrupt = false;
  double observed_ratio = -1.0;
  InferenceFlags inf;
  std::string out = "restore_out";
};

bcs::Datacube corrupt_gaussian(const bcs::Datacube& clean, double sigma,
                               std::uint64_t seed) {
  bcs::Datacube noisy = clean;
  bcs::Rng rng(seed ^ 0x6e6f697365ULL);
  for (double& v : noisy.data) v += sigma * bcs::sample_normal(rng);
  return noisy;
}

void run_restore(const RestoreArgs& a, bool inpaint_task) {
  const std::string dir = prepare_out(a.out);
  const bool is_png =
      a.input.size() > 4 && a.input.substr(a.input.size() - 4) == ".png";
  bcs::Datacube input = load_image(a.input);
  bcs::Datacube work = input;
  if (a.corrupt && a.sigma > 0.0)
    work = corrupt_gaussian(input, a.sigma, a.inf.seed);

  bcs::PatchConfig pc;
  pc.patch = a.inf.patch;
  pc.stride = a.inf.stride;
  const bcs::InferenceOpts opts = a.inf.opts();
  bcs::Hyperparams hyper;

  Eigen::MatrixXd mask;
  bcs::ReconResult res;
  if (inpaint_task) {
    if (!a.mask.empty()) {
      bcs::Datacube mc = bcs::read_cube(a.mask);
      if (mc.nl != 1 || mc.nx != work.nx || mc.ny != work.ny)
        throw bcs::ValidationError("mask file must be a one-channel cube "
                                   "matching the input dims");
      mask = mc.channel(0);
    } else if (a.observed_ratio >= 0.0) {
      if (a.observed_ratio > 1.0)
        throw bcs::ValidationError("--observed-ratio must be in [0,1]");
      mask.resize(work.nx, work.ny);
      bcs::Rng rng(a.inf.seed ^ 0x6d61736bULL);
      for (int x = 0; x < work.nx; ++x)
        for (int y = 0; y < work.ny; ++y)
          mask(x, y) = rng.uniform() < a.observed_ratio ? 1.0 : 0.0;
      // Zero out the dropped pixels of the working image.
      for (int j = 0; j < work.nl; ++j)
        for (int x = 0; x < work.nx; ++x)
          for (int y = 0; y < work.ny; ++y)
            if (mask(x, y) == 0.0) work.at(x, y, j) = 0.0;
      bcs::Datacube mc(work.nx, work.ny, 1);
      for (int x = 0; x < work.nx; ++x)
        for (int y = 0; y < work.ny; ++y) mc.at(x, y, 0) = mask(x, y);
      bcs::write_cube(dir + "/mask.hsdc", mc);
    } else {
      throw bcs::ValidationError(
          "inpaint needs --mask or --observed-ratio");
    }
    res = bcs::inpaint(work, mask, pc, opts, hyper);
  } else {
    res = bcs::denoise(work, pc, opts, hyper);
  }

  save_image(dir + "/restored", res.estimate, is_png);
  save_image(dir + "/input_used", work, is_png);
  bcs::write_trace_csv(
      dir + "/trace.csv",
      res.objective_is_misfit ? "expected_misfit" : "neg_log_posterior",
      res.objective, res.alpha0_trace);
  for (const std::string& w : res.warnings) std::cerr << "warning: " << w << "\n";

  bcs::RunConfig cfg;
  cfg["command"] = inpaint_task ? "inpaint" : "denoise";
  cfg["input"] = a.input;
  if (!a.truth.empty()) cfg["truth"] = a.truth;
  if (!a.mask.empty()) cfg["mask"] = a.mask;
  if (a.observed_ratio >= 0.0)
    cfg["observed-ratio"] = std::to_string(a.observed_ratio);
  cfg["sigma"] = std::to_string(a.sigma);
  cfg["corrupt"] = a.corrupt ? "true" : "false";
  a.inf.record(cfg);
  bcs::write_config(dir + "/run_config.txt", cfg);

  // Report against the explicit truth, or against the pre-corruption input
  // when this run did the corrupting.
  const bcs::Datacube* truth = nullptr;
  bcs::Datacube truth_file;
  if (!a.truth.empty()) {
    truth_file = load_image(a.truth);
    truth = &truth_file;
  } else if (a.corrupt || a.observed_ratio >= 0.0) {
    truth = &input;
  }
  if (truth) write_report(dir, bcs::psnr(res.estimate, *truth, 255.0));
  std::cout << "wrote " << dir << "/restored.hsdc (" << res.runtime_seconds
            << " s)\n";
}

// ---- eval ----

struct EvalArgs {
  std::string recon, truth;
  std::vector<std::string> regions;
  double peak = 0.0;
  std::string out = "eval_out";
};

void run_eval(const EvalArgs& a) {
  const std::string dir = prepare_out(a.out);
  const bcs::Datacube recon = bcs::read_cube(a.recon);
  const bcs::Datacube truth = bcs::read_cube(a.truth);
  bcs::EvalReport rep = bcs::psnr(recon, truth, a.peak);
  for (const std::string& rs : a.regions) {
    const bcs::Region r = parse_region(rs);
    rep.regions.push_back(r);
    rep.spectral_corr.push_back(bcs::spectral_correlation(recon, truth, r));
  }
  write_report(dir, rep);
  bcs::RunConfig cfg;
  cfg["command"] = "eval";
  cfg["recon"] = a.recon;
  cfg["truth"] = a.truth;
  cfg["peak"] = std::to_string(a.peak);
  for (std::size_t i = 0; i < a.regions.size(); ++i)
    cfg["region" + std::to_string(i)] = a.regions[i];
  bcs::write_config(dir + "/run_config.txt", cfg);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Blind compressive-sensing engine for coded hyperspectral "
               "capture, denoising, and inpainting"};
  app.require_subcommand(1);

  SimulateArgs sim;
  CLI::App* csim = app.add_subcommand("simulate", "synthesize a coded capture");
  csim->set_config("--config");
  csim->add_option("--scene", sim.scene, "'synthetic' or a truth cube file");
  csim->add_option("--nx", sim.nx);
  csim->add_option("--ny", sim.ny);
  csim->add_option("--nl", sim.nl);
  csim->add_option("--code", sim.code,
                   "cassi-bernoulli, slm, or a code cube file");
  csim->add_option("--seed", sim.seed);
  csim->add_option("--noise-alpha0", sim.noise_alpha0,
                   "measurement noise precision (inf = noiseless)");
  csim->add_flag("--with-rgb", sim.with_rgb,
                 "also write a registered synthetic RGB side image");
  csim->add_option("--out", sim.out);

  ReconstructArgs rec;
  CLI::App* crec =
      app.add_subcommand("reconstruct", "invert a coded capture");
  crec->set_config("--config");
  crec->add_option("--measurement", rec.measurement)->required();
  crec->add_option("--code", rec.code)->required();
  crec->add_option("--truth", rec.truth);
  crec->add_option("--side-rgb", rec.side_rgb);
  rec.inf.add_to(crec);
  crec->add_option("--out", rec.out);

  RestoreArgs den;
  CLI::App* cden = app.add_subcommand("denoise", "restore a noisy image");
  cden->set_config("--config");
  cden->add_option("--input", den.input)->required();
  cden->add_option("--truth", den.truth);
  cden->add_option("--sigma", den.sigma, "noise level for --corrupt");
  cden->add_flag("--corrupt", den.corrupt,
                 "add Gaussian noise before restoring");
  den.inf.add_to(cden);
  cden->add_option("--out", den.out);

  RestoreArgs inp;
  CLI::App* cinp =
      app.add_subcommand("inpaint", "fill missing pixels of an image");
  cinp->set_config("--config");
  cinp->add_option("--input", inp.input)->required();
  cinp->add_option("--truth", inp.truth);
  cinp->add_option("--mask", inp.mask, "one-channel cube of 0/1 flags");
  cinp->add_option("--observed-ratio", inp.observed_ratio,
                   "fraction of pixels kept (dropped uniformly at random)");
  cinp->add_option("--sigma", inp.sigma);
  cinp->add_flag("--corrupt", inp.corrupt);
  inp.inf.add_to(cinp);
  cinp->add_option("--out", inp.out);

  EvalArgs ev;
  CLI::App* cev =
      app.add_subcommand("eval", "score a reconstruction against truth");
  cev->set_config("--config");
  cev->add_option("--recon", ev.recon)->required();
  cev->add_option("--truth", ev.truth)->required();
  cev->add_option("--region", ev.regions,
                  "spectral-correlation region name:x0:y0:h:w");
  cev->add_option("--peak", ev.peak, "PSNR peak (0 = max of truth)");
  cev->add_option("--out", ev.out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*csim) run_simulate(sim);
    if (*crec) run_reconstruct(rec);
    if (*cden) run_restore(den, false);
    if (*cinp) run_restore(inp, true);
    if (*cev) run_eval(ev);
  } catch (const bcs::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const bcs::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const bcs::IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
