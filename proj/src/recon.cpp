#include "bcs/recon.hpp"

#include <chrono>
#include <cmath>

#include "bcs/errors.hpp"
#include "bcs/gibbs.hpp"
#include "bcs/vb.hpp"

namespace bcs {

namespace {

int default_patch(ReconTask task, int requested) {
  if (requested > 0) return requested;
  return task == ReconTask::cs_hyperspectral ? 8 : 7;
}

struct EngineOut {
  Eigen::MatrixXd xhat;
  Eigen::MatrixXd dictionary;
  Eigen::VectorXd atom_weights;
  std::vector<double> objective, alpha0;
  bool misfit = false;
  long clamp_events = 0;
};

EngineOut run_engine(const Eigen::MatrixXd& y,
                     const std::vector<PatchOperator>& ops,
                     const InferenceOpts& opts, const Hyperparams& hyper) {
  EngineOut out;
  if (opts.kind == InferenceKind::gibbs) {
    GibbsResult r = run_gibbs(y, ops, opts, hyper);
    out.xhat = std::move(r.xhat);
    out.dictionary = std::move(r.state.D);
    out.atom_weights = std::move(r.state.nu);
    out.objective = std::move(r.trace.neg_log_posterior);
    out.alpha0 = std::move(r.trace.alpha0);
    out.clamp_events = r.trace.clamp_events;
  } else {
    VbResult r = run_vb(y, ops, opts, hyper);
    out.xhat = std::move(r.xhat);
    out.dictionary = std::move(r.state.d_mean);
    out.atom_weights = std::move(r.state.nu_mean);
    out.objective = std::move(r.trace.expected_misfit);
    out.alpha0 = std::move(r.trace.alpha0);
    out.misfit = true;
  }
  return out;
}

Datacube reassemble_rows(const Eigen::MatrixXd& rows, const PatchGrid& grid,
                         int channels) {
  PatchSet ps;
  ps.vectors = rows;
  ps.grid = grid;
  ps.channels = channels;
  return reassemble(ps);
}

}  // namespace

void ReconJob::validate() const {
  opts.validate();
  hyper.validate();
  if (patches.stride < 1)
    throw ValidationError("ReconJob: stride must be >= 1");
  if (task == ReconTask::cs_hyperspectral) {
    if (!code) throw ValidationError("ReconJob: cs task requires a code");
  } else if (measurement.side_rgb) {
    throw ValidationError("ReconJob: side_rgb only valid for the cs task");
  }
  if (task == ReconTask::inpaint && !observed_mask)
    throw ValidationError("ReconJob: inpaint requires an observed mask");
}

ReconResult reconstruct_cs(const ReconJob& job) {
  const auto t0 = std::chrono::steady_clock::now();
  job.validate();
  if (job.task != ReconTask::cs_hyperspectral)
    throw ValidationError("reconstruct_cs: wrong task kind");
  const CodeCube& code = *job.code;
  code.validate();
  const Eigen::MatrixXd& img = job.measurement.image;
  if (code.codes.nx != img.rows() || code.codes.ny != img.cols())
    throw ValidationError("reconstruct_cs: code/measurement grid mismatch");
  if (!img.array().isFinite().all())
    throw ValidationError("reconstruct_cs: non-finite measurement");
  const int nl = code.codes.nl;
  const int p = default_patch(job.task, job.patches.patch);
  const PatchGrid grid = make_grid(static_cast<int>(img.rows()),
                                   static_cast<int>(img.cols()), p, p,
                                   job.patches.stride, job.patches.stride);

  Eigen::MatrixXd y = extract_image_patches(img, grid);
  std::vector<PatchOperator> ops = build_patch_operators(code, grid);

  ReconResult res;
  if (job.measurement.side_rgb) {
    const Datacube& rgb = *job.measurement.side_rgb;
    if (rgb.nl != 3 || rgb.nx != img.rows() || rgb.ny != img.cols())
      throw ValidationError(
          "reconstruct_cs: RGB side image is not registered to the "
          "measurement grid (dims must match exactly)");
    rgb.validate();
    // Normalize both modalities to [0,1] so the fully observed RGB block
    // does not dominate the shared noise precision.
    const double scale_h = std::max(img.array().abs().maxCoeff(), 1e-300);
    const double scale_rgb = std::max(rgb.max_abs(), 1e-300);
    y /= scale_h;
    Datacube rgb_norm = rgb;
    for (double& v : rgb_norm.data) v /= scale_rgb;
    const PatchSet rgb_patches = extract_patches(rgb_norm, grid);
    StackedModel stacked = stack_side_info(ops, y, rgb_patches);

    EngineOut out = run_engine(stacked.y, stacked.ops, job.opts, job.hyper);
    const int P = grid.area() * nl;
    const int m = grid.area();
    res.estimate =
        reassemble_rows(out.xhat.topRows(P) * scale_h, grid, nl);
    res.side_estimate =
        reassemble_rows(out.xhat.bottomRows(3 * m) * scale_rgb, grid, 3);
    res.dictionary = std::move(out.dictionary);
    res.atom_weights = std::move(out.atom_weights);
    res.objective = std::move(out.objective);
    res.alpha0_trace = std::move(out.alpha0);
    res.objective_is_misfit = out.misfit;
    res.clamp_events = out.clamp_events;
    res.compression_num = nl + 3;
    res.compression_den = 4;
  } else {
    EngineOut out = run_engine(y, ops, job.opts, job.hyper);
    res.estimate = reassemble_rows(out.xhat, grid, nl);
    res.dictionary = std::move(out.dictionary);
    res.atom_weights = std::move(out.atom_weights);
    res.objective = std::move(out.objective);
    res.alpha0_trace = std::move(out.alpha0);
    res.objective_is_misfit = out.misfit;
    res.clamp_events = out.clamp_events;
    res.compression_num = nl;
    res.compression_den = 1;
  }
  res.estimate.wavelengths = code.codes.wavelengths;
  res.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return res;
}

ReconResult inpaint(const Datacube& corrupted,
                    const Eigen::MatrixXd& observed,
                    const PatchConfig& patches, const InferenceOpts& opts,
                    const Hyperparams& hyper) {
  const auto t0 = std::chrono::steady_clock::now();
  opts.validate();
  hyper.validate();
  corrupted.validate();
  if (observed.rows() != corrupted.nx || observed.cols() != corrupted.ny)
    throw ValidationError("inpaint: mask dims mismatch");
  if (!((observed.array() == 0.0) || (observed.array() == 1.0)).all())
    throw ValidationError("inpaint: mask entries must be 0 or 1");

  const int p = default_patch(ReconTask::inpaint, patches.patch);
  const PatchGrid grid = make_grid(corrupted.nx, corrupted.ny, p, p,
                                   patches.stride, patches.stride);
  // Rescale to a reference 8-bit dynamic range: the initial moment magnitudes
  // are absolute, so low-magnitude inputs would otherwise start with
  // variances comparable to the signal itself. Also makes the result
  // covariant under rescaling of the input.
  const double max_abs = corrupted.max_abs();
  const double scale = max_abs > 0.0 ? 255.0 / max_abs : 1.0;
  Datacube work = corrupted;
  for (double& v : work.data) v *= scale;
  PatchSet ps = extract_patches(work, grid);
  const int L = corrupted.nl;
  const int area = grid.area();

  ReconResult res;
  std::vector<PatchOperator> ops;
  ops.reserve(grid.origins.size());
  for (int n = 0; n < grid.count(); ++n) {
    const auto [r0, c0] = grid.origins[n];
    Eigen::VectorXd obs(area);
    for (int a = 0; a < grid.patch_h; ++a)
      for (int b = 0; b < grid.patch_w; ++b)
        obs[a * grid.patch_w + b] = observed(r0 + a, c0 + b);
    if ((obs.array() == 0.0).all())
      res.warnings.push_back("patch " + std::to_string(n) +
                             " has no observed pixels; estimated purely "
                             "from the dictionary");
    ops.push_back(masked_identity_operator(obs, L));
    // Zero unobserved entries so the residual sees only real data.
    for (int j = 0; j < L; ++j)
      for (int a = 0; a < area; ++a)
        if (obs[a] == 0.0) ps.vectors(j * area + a, n) = 0.0;
  }

  EngineOut out = run_engine(ps.vectors, ops, opts, hyper);
  res.estimate = reassemble_rows(out.xhat / scale, grid, L);
  res.estimate.wavelengths = corrupted.wavelengths;
  res.dictionary = std::move(out.dictionary);
  res.atom_weights = std::move(out.atom_weights);
  res.objective = std::move(out.objective);
  res.alpha0_trace = std::move(out.alpha0);
  res.objective_is_misfit = out.misfit;
  res.clamp_events = out.clamp_events;
  res.compression_num = 1;
  res.compression_den = 1;
  res.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return res;
}

ReconResult denoise(const Datacube& noisy, const PatchConfig& patches,
                    const InferenceOpts& opts, const Hyperparams& hyper) {
  // Identity sensing is inpainting with everything observed; routing through
  // the same path keeps the two tasks bit-identical at equal seeds.
  const Eigen::MatrixXd all =
      Eigen::MatrixXd::Ones(noisy.nx, noisy.ny);
  return inpaint(noisy, all, patches, opts, hyper);
}

}  // namespace bcs
