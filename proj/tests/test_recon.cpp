#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "bcs/errors.hpp"
#include "bcs/evalkit.hpp"
#include "bcs/io.hpp"
#include "bcs/randmath.hpp"
#include "bcs/recon.hpp"

using namespace bcs;

namespace {

double rel_err(const Datacube& a, const Datacube& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    num += d * d;
    den += b.data[i] * b.data[i];
  }
  return std::sqrt(num / std::max(den, 1e-300));
}

CodeCube bernoulli_code(int nx, int ny, int nl, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd base(nx + nl - 1, ny);
  for (int r = 0; r < base.rows(); ++r)
    for (int c = 0; c < base.cols(); ++c)
      base(r, c) = rng.uniform() < 0.5 ? 0.0 : 1.0;
  return make_cassi_code(base, nl);
}

InferenceOpts vb_opts(int K, int iters, std::uint64_t seed) {
  InferenceOpts o;
  o.K = K;
  o.kind = InferenceKind::vb;
  o.iterations = iters;
  o.burn_in = 0;
  o.seed = seed;
  return o;
}

}  // namespace

TEST_CASE("job validation enforces the task taxonomy") {
  ReconJob job;
  job.task = ReconTask::cs_hyperspectral;
  job.measurement.image = Eigen::MatrixXd::Zero(8, 8);
  CHECK_THROWS_AS(job.validate(), ValidationError);  // cs needs a code

  ReconJob job2;
  job2.task = ReconTask::inpaint;
  CHECK_THROWS_AS(job2.validate(), ValidationError);  // inpaint needs a mask

  ReconJob job3;
  job3.task = ReconTask::denoise;
  job3.measurement.side_rgb = Datacube(4, 4, 3);
  CHECK_THROWS_AS(job3.validate(), ValidationError);  // side info is cs-only
}

TEST_CASE("identity sensing (all-ones code, one channel) round-trips") {
  const Datacube scene = synthetic_scene(16, 16, 1, 1);
  CodeCube code;
  code.codes = Datacube(16, 16, 1);
  for (double& v : code.codes.data) v = 1.0;
  ReconJob job;
  job.measurement = forward(scene, code);
  job.code = code;
  job.patches.patch = 4;
  job.patches.stride = 2;
  job.opts = vb_opts(16, 30, 2);
  const ReconResult res = reconstruct_cs(job);
  CHECK(res.estimate.nx == 16);
  CHECK(res.estimate.nl == 1);
  CHECK(rel_err(res.estimate, scene) < 0.05);
  CHECK(res.compression_num == 1);
  CHECK(res.compression_den == 1);
}

TEST_CASE("cs reconstruction reports the channel compression ratio") {
  const Datacube scene = synthetic_scene(16, 16, 4, 3);
  const CodeCube code = bernoulli_code(16, 16, 4, 4);
  ReconJob job;
  job.measurement = forward(scene, code);
  job.code = code;
  job.patches.patch = 8;
  job.patches.stride = 4;
  job.opts = vb_opts(16, 5, 5);
  const ReconResult res = reconstruct_cs(job);
  CHECK(res.compression_num == 4);
  CHECK(res.compression_den == 1);
  CHECK(res.estimate.nx == 16);
  CHECK(res.estimate.nl == 4);
  CHECK(res.objective_is_misfit);
  CHECK(res.objective.size() == 5);
  CHECK(res.dictionary.rows() == 8 * 8 * 4);
}

TEST_CASE("side information: registration errors and block integrity") {
  const Datacube scene = synthetic_scene(16, 16, 4, 6);
  const CodeCube code = bernoulli_code(16, 16, 4, 7);
  ReconJob job;
  job.measurement = forward(scene, code);
  job.code = code;
  job.patches.patch = 8;
  job.patches.stride = 2;
  job.opts = vb_opts(24, 30, 8);

  job.measurement.side_rgb = Datacube(8, 8, 3);  // wrong size, no cropping
  CHECK_THROWS_AS(reconstruct_cs(job), ValidationError);

  // Synthetic color camera: three smooth bands over the spectrum.
  Datacube rgb(16, 16, 3);
  for (int c = 0; c < 3; ++c)
    for (int j = 0; j < 4; ++j) {
      const double w = std::exp(-0.5 * std::pow(j - (c + 0.5) * 4.0 / 3.0 + 0.5, 2));
      for (int x = 0; x < 16; ++x)
        for (int y = 0; y < 16; ++y)
          rgb.at(x, y, c) += w * scene.at(x, y, j);
    }
  job.measurement.side_rgb = rgb;
  const ReconResult res = reconstruct_cs(job);
  CHECK(res.compression_num == 4 + 3);
  CHECK(res.compression_den == 4);
  REQUIRE(res.side_estimate.has_value());
  // The RGB block is fully observed, so the model must fit it markedly
  // better than the compressed hyperspectral block on this tiny instance.
  CHECK(rel_err(*res.side_estimate, rgb) < 0.15);
  CHECK(res.estimate.nl == 4);
}

TEST_CASE("denoise: clean input passes through almost unchanged") {
  Datacube img = synthetic_scene(24, 24, 3, 9);
  for (double& v : img.data) v *= 255.0;  // 8-bit scale
  PatchConfig pc;  // default 7x7, stride 2
  const ReconResult res =
      denoise(img, pc, vb_opts(24, 20, 10), Hyperparams{});
  const EvalReport rep = psnr(res.estimate, img, 255.0);
  CHECK(rep.psnr_mean >= 30.0);
}

TEST_CASE("inpaint with an all-ones mask equals denoise bit-for-bit") {
  const Datacube img = synthetic_scene(20, 20, 3, 11);
  PatchConfig pc;
  const InferenceOpts opts = vb_opts(12, 5, 12);
  const Hyperparams hyper;
  const ReconResult a = denoise(img, pc, opts, hyper);
  const ReconResult b =
      inpaint(img, Eigen::MatrixXd::Ones(20, 20), pc, opts, hyper);
  CHECK(a.estimate.data == b.estimate.data);
  CHECK(a.objective == b.objective);
}

TEST_CASE("inpaint fills unobserved pixels and warns on empty patches") {
  const Datacube img = synthetic_scene(14, 14, 1, 13);
  Eigen::MatrixXd mask = Eigen::MatrixXd::Ones(14, 14);
  mask.block(7, 7, 7, 7).setZero();  // one whole 7x7 patch unobserved
  PatchConfig pc;
  pc.patch = 7;
  pc.stride = 7;
  Datacube corrupted = img;
  for (int x = 0; x < 14; ++x)
    for (int y = 0; y < 14; ++y)
      if (mask(x, y) == 0.0) corrupted.at(x, y, 0) = 0.0;
  const ReconResult res =
      inpaint(corrupted, mask, pc, vb_opts(8, 5, 14), Hyperparams{});
  CHECK(!res.warnings.empty());
  CHECK(res.estimate.nx == 14);

  Eigen::MatrixXd bad = mask;
  bad(0, 0) = 0.5;
  CHECK_THROWS_AS(
      inpaint(corrupted, bad, pc, vb_opts(8, 5, 14), Hyperparams{}),
      ValidationError);
}

TEST_CASE("scale covariance: scaling the data scales the estimate") {
  const Datacube img = synthetic_scene(20, 20, 1, 15);
  PatchConfig pc;
  pc.patch = 4;
  pc.stride = 2;
  const InferenceOpts opts = vb_opts(12, 20, 16);
  const Hyperparams hyper;
  const ReconResult a = denoise(img, pc, opts, hyper);
  Datacube scaled = img;
  const double c = 37.0;
  for (double& v : scaled.data) v *= c;
  const ReconResult b = denoise(scaled, pc, opts, hyper);
  Datacube rescaled = b.estimate;
  for (double& v : rescaled.data) v /= c;
  // The restoration path renormalizes internally, so covariance is exact up
  // to floating-point roundoff in the scaling itself.
  CHECK(rel_err(rescaled, a.estimate) < 1e-12);
}

TEST_CASE("restoration pipelines are bit-identical across thread counts") {
  const Datacube img = synthetic_scene(16, 16, 3, 17);
  PatchConfig pc;
  pc.patch = 4;
  pc.stride = 2;
  Hyperparams hyper;
  InferenceOpts opts = vb_opts(8, 5, 18);
  const ReconResult t1 = denoise(img, pc, opts, hyper);
  opts.threads = 2;
  const ReconResult t2 = denoise(img, pc, opts, hyper);
  opts.threads = 8;
  const ReconResult t8 = denoise(img, pc, opts, hyper);
  CHECK(t1.estimate.data == t2.estimate.data);
  CHECK(t1.estimate.data == t8.estimate.data);

  // Gibbs path too.
  InferenceOpts g;
  g.K = 8;
  g.iterations = 6;
  g.burn_in = 3;
  g.seed = 19;
  const ReconResult g1 = denoise(img, pc, g, hyper);
  g.threads = 8;
  const ReconResult g8 = denoise(img, pc, g, hyper);
  CHECK(g1.estimate.data == g8.estimate.data);
}
