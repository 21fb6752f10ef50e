// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "bcs/evalkit.hpp"
#include "bcs/gibbs.hpp"
#include "bcs/io.hpp"
#include "bcs/randmath.hpp"
#include "bcs/recon.hpp"
#include "bcs/vb.hpp"

using namespace bcs;

namespace {

bool g_current_ok = true;
std::string g_detail;

void expect(bool ok, const std::string& what) {
  if (!ok) {
    g_current_ok = false;
    if (g_detail.size() < 400) g_detail += "[" + what + "] ";
  }
}

Datacube random_cube(int nx, int ny, int nl, std::uint64_t seed) {
  Datacube c(nx, ny, nl);
  Rng rng(seed);
  for (double& v : c.data) v = rng.uniform();
  return c;
}

CodeCube random_code(int nx, int ny, int nl, std::uint64_t seed) {
  CodeCube code;
  code.codes = random_cube(nx, ny, nl, seed);
  code.kind = CodeKind::custom;
  return code;
}

CodeCube bernoulli_code(int nx, int ny, int nl, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd base(nx + nl - 1, ny);
  for (int r = 0; r < base.rows(); ++r)
    for (int c = 0; c < base.cols(); ++c)
      base(r, c) = rng.uniform() < 0.5 ? 0.0 : 1.0;
  return make_cassi_code(base, nl);
}

double rel_err_cube(const Datacube& a, const Datacube& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    num += d * d;
    den += b.data[i] * b.data[i];
  }
  return std::sqrt(num / std::max(den, 1e-300));
}

struct Moments {
  double mean, var, se_mean, se_var;
};

Moments moments(const std::vector<double>& xs) {
  const int n = static_cast<int>(xs.size());
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  double m2 = 0.0, m4 = 0.0;
  for (double x : xs) {
    const double d = x - mean;
    m2 += d * d;
    m4 += d * d * d * d;
  }
  m2 /= n;
  m4 /= n;
  return {mean, m2, std::sqrt(m2 / n),
          std::sqrt(std::max(m4 - m2 * m2, 0.0) / n)};
}

// ---------- criterion 1: forward-model oracle ----------

bool criterion_forward_oracle() {
  for (std::uint64_t t = 0; t < 20; ++t) {
    const Datacube cube = random_cube(16, 16, 4, 1000 + t);
    const CodeCube code = random_code(16, 16, 4, 2000 + t);
    const Measurement m = forward(cube, code);
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(256, 1024);
    for (int j = 0; j < 4; ++j)
      for (int x = 0; x < 16; ++x)
        for (int y = 0; y < 16; ++y)
          G(x * 16 + y, j * 256 + x * 16 + y) = code.codes.at(x, y, j);
    const Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(
        cube.data.data(), static_cast<long>(cube.data.size()));
    const Eigen::VectorXd want = G * v;
    double num = 0.0;
    for (int x = 0; x < 16; ++x)
      for (int y = 0; y < 16; ++y) {
        const double d = m.image(x, y) - want[x * 16 + y];
        num += d * d;
      }
    expect(std::sqrt(num) / want.norm() < 1e-12, "forward dense");

    const PatchGrid grid = make_grid(16, 16, 4, 4, 3, 3);
    const auto ops = build_patch_operators(code, grid);
    Rng rng(3000 + t);
    for (const auto& op : ops) {
      Eigen::VectorXd x(op.signal_dim());
      for (int i = 0; i < x.size(); ++i) x[i] = sample_normal(rng);
      const Eigen::VectorXd got = op.apply(x);
      const Eigen::VectorXd ref = op.dense() * x;
      expect((got - ref).norm() / std::max(ref.norm(), 1e-300) < 1e-14,
             "patch op dense");
    }
  }
  return g_current_ok;
}

// ---------- criterion 2: patch round trip ----------

bool criterion_round_trip() {
  const int dims[][3] = {{16, 16, 3}, {13, 11, 4}, {9, 17, 2}, {8, 8, 1}};
  const int patches[] = {1, 2, 3, 4, 7};
  const int strides[] = {1, 2, 3, 5};
  std::uint64_t seed = 1;
  for (const auto& d : dims)
    for (int p : patches)
      for (int s : strides) {
        if (p > d[0] || p > d[1] || s > p) continue;
        const Datacube cube = random_cube(d[0], d[1], d[2], seed++);
        const Datacube back = reassemble(extract_patches(cube, p, p, s, s));
        expect(rel_err_cube(back, cube) < 1e-12, "round trip");
      }
  return g_current_ok;
}

// ---------- criterion 3: sampler exactness ----------

double bessel_k_quadrature(double p, double theta) {
  const int n = 400000;
  const double h = 40.0 / n;
  auto f = [&](double t) {
    const double e = -theta * std::cosh(t);
    if (e < -745.0) return 0.0;
    return std::exp(e) * std::cosh(p * t);
  };
  double sum = f(0.0) + f(40.0);
  for (int i = 1; i < n; ++i) sum += (i % 2 ? 4.0 : 2.0) * f(i * h);
  return sum * h / 3.0;
}

bool criterion_samplers() {
  const int n = 100000;
  Rng rng(42);
  {
    std::vector<double> xs(n);
    for (double& x : xs) x = sample_gamma(2.0, 3.0, rng);
    const auto m = moments(xs);
    expect(std::fabs(m.mean - 2.0 / 3.0) < 3.0 * m.se_mean, "gamma mean");
    expect(std::fabs(m.var - 2.0 / 9.0) < 3.0 * m.se_var, "gamma var");
  }
  {
    std::vector<double> xs(n);
    for (double& x : xs) x = sample_inverse_gaussian(2.0, 5.0, rng);
    const auto m = moments(xs);
    expect(std::fabs(m.mean - 2.0) < 3.0 * m.se_mean, "invgauss mean");
    expect(std::fabs(m.var - 1.6) < 3.0 * m.se_var, "invgauss var");
  }
  {
    // p = -1/2 reduction to the inverse-Gaussian.
    const double a = 3.0, b = 2.0, mu = std::sqrt(b / a);
    std::vector<double> xs(n);
    for (double& x : xs) x = sample_gig(a, b, -0.5, rng);
    const auto m = moments(xs);
    expect(std::fabs(m.mean - mu) < 3.0 * m.se_mean, "gig -1/2 mean");
    expect(std::fabs(m.var - mu * mu * mu / b) < 3.0 * m.se_var,
           "gig -1/2 var");
  }
  {
    std::vector<double> xs(n);
    for (double& x : xs) x = sample_gig(2.0, 3.0, 1.5, rng);
    const auto m = moments(xs);
    expect(std::fabs(m.mean - gig_mean(2.0, 3.0, 1.5)) < 3.0 * m.se_mean,
           "gig bessel mean");
  }
  {
    // b = 0 gamma limit.
    std::vector<double> xs(n);
    for (double& x : xs) x = sample_gig(4.0, 0.0, 2.5, rng);
    const auto m = moments(xs);
    expect(std::fabs(m.mean - 2.5 / 2.0) < 3.0 * m.se_mean, "gig b=0 mean");
    expect(std::fabs(m.var - 2.5 / 4.0) < 3.0 * m.se_var, "gig b=0 var");
  }
  expect(std::fabs(bessel_k(2.0, 1.0) / bessel_k_quadrature(2.0, 1.0) - 1.0) <
             1e-10,
         "bessel quadrature");
  for (int i = 0; i < 20; ++i) {
    const double p = 4.0 * (2.0 * rng.uniform() - 1.0);
    const double theta = 0.1 + 10.0 * rng.uniform();
    const double lhs = bessel_k(p + 1.0, theta);
    const double rhs =
        bessel_k(p - 1.0, theta) + (2.0 * p / theta) * bessel_k(p, theta);
    expect(std::fabs(lhs / rhs - 1.0) < 1e-9, "bessel recurrence");
  }
  return g_current_ok;
}

// ---------- criterion 4: conjugacy oracles ----------

struct TinyModel {
  std::vector<PatchOperator> ops;
  Eigen::MatrixXd y;
  ModelState st;
  Hyperparams hyper;
};

TinyModel tiny_model(std::uint64_t seed) {
  TinyModel t;
  Rng rng(seed);
  for (int n = 0; n < 3; ++n) {
    PatchOperator op;
    op.m = 2;
    op.channels = 3;
    Eigen::MatrixXd W(2, 3);
    for (int i = 0; i < W.size(); ++i) W(i % 2, i / 2) = rng.uniform();
    op.groups.push_back(W);
    t.ops.push_back(op);
  }
  t.y.resize(2, 3);
  for (int i = 0; i < 6; ++i) t.y(i % 2, i / 2) = sample_normal(rng);
  InferenceOpts opts;
  opts.K = 2;
  t.st = init_state(t.y, t.ops, opts, t.hyper, rng);
  for (int i = 0; i < 6; ++i) {
    t.st.S(i % 2, i / 2) = sample_normal(rng);
    t.st.alpha_kn(i % 2, i / 2) = 0.5 + rng.uniform();
    t.st.phi(i % 2, i / 2) = 0.5 + rng.uniform();
  }
  t.st.nu << 0.8, -1.2;
  t.st.eta_tilde << 1.1, 1.4;
  t.st.recompute_eta();
  t.st.tau << 0.9, 1.3, 0.7;
  t.st.alpha0 = 2.2;
  return t;
}

Eigen::VectorXd y_minus_k(const TinyModel& t, int n, int k) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(6);
  for (int kk = 0; kk < 2; ++kk)
    if (kk != k) x += t.st.D.col(kk) * t.st.nu[kk] * t.st.S(kk, n);
  return t.y.col(n) - t.ops[n].apply(x);
}

bool criterion_conjugacy() {
  const int trials = 100000;
  using namespace gibbs_detail;

  // Steps 1, 2, 7: Gaussian conditionals against dense closed forms.
  {
    TinyModel t = tiny_model(50);
    Workspace ws;
    ws.init(t.y, t.ops);
    Eigen::MatrixXd prec = 6.0 * Eigen::MatrixXd::Identity(6, 6);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(6);
    for (int n = 0; n < 3; ++n) {
      const Eigen::MatrixXd psi = t.ops[n].dense();
      const double s = t.st.S(0, n);
      prec += t.st.alpha0 * t.st.nu[0] * t.st.nu[0] * s * s *
              psi.transpose() * psi;
      rhs += s * psi.transpose() * y_minus_k(t, n, 0);
    }
    rhs *= t.st.alpha0 * t.st.nu[0];
    const Eigen::MatrixXd cov = prec.inverse();
    const Eigen::VectorXd mean = cov * rhs;
    Rng root(51);
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(6);
    Eigen::VectorXd acc2 = Eigen::VectorXd::Zero(6);
    const ModelState st0 = t.st;
    for (int i = 0; i < trials; ++i) {
      t.st = st0;
      ws.recompute_residual(t.st, t.y, t.ops);
      sample_dictionary(t.st, t.y, t.ops, t.hyper, ws, root, i);
      acc += t.st.D.col(0);
      acc2 += t.st.D.col(0).cwiseAbs2();
    }
    acc /= trials;
    acc2 /= trials;
    for (int p = 0; p < 6; ++p) {
      expect(std::fabs(acc[p] - mean[p]) <
                 3.0 * std::sqrt(cov(p, p) / trials),
             "step1 mean");
      const double var_emp = acc2[p] - acc[p] * acc[p];
      const double se = cov(p, p) * std::sqrt(2.0 / trials) * 1.5;
      expect(std::fabs(var_emp - cov(p, p)) < 3.0 * se, "step1 var");
    }
  }
  {
    TinyModel t = tiny_model(52);
    Workspace ws;
    ws.init(t.y, t.ops);
    const Eigen::VectorXd u = t.ops[0].apply(t.st.D.col(0));
    const double q = u.squaredNorm();
    const double nu = t.st.nu[0];
    const double var =
        1.0 / (t.st.tau[0] * t.st.alpha_kn(0, 0) * t.st.alpha0 +
               t.st.alpha0 * nu * nu * q);
    const double mu = t.st.alpha0 * var * nu * u.dot(y_minus_k(t, 0, 0));
    Rng root(53);
    std::vector<double> xs(trials);
    const ModelState st0 = t.st;
    for (int i = 0; i < trials; ++i) {
      t.st = st0;
      ws.recompute_residual(t.st, t.y, t.ops);
      sample_coefficients(t.st, t.y, t.ops, t.hyper, ws, root, i);
      xs[i] = t.st.S(0, 0);
    }
    const auto m = moments(xs);
    expect(std::fabs(m.mean - mu) < 3.0 * m.se_mean, "step2 mean");
    expect(std::fabs(m.var - var) < 3.0 * m.se_var, "step2 var");
  }
  {
    TinyModel t = tiny_model(54);
    Workspace ws;
    ws.init(t.y, t.ops);
    double sum_a = 0.0, sum_b = 0.0;
    for (int n = 0; n < 3; ++n) {
      const Eigen::VectorXd u = t.ops[n].apply(t.st.D.col(0));
      sum_a += t.st.S(0, n) * t.st.S(0, n) * u.squaredNorm();
      sum_b += t.st.S(0, n) * u.dot(y_minus_k(t, n, 0));
    }
    const double var = 1.0 / (t.st.eta[0] + t.st.alpha0 * sum_a);
    const double mu = var * t.st.alpha0 * sum_b;
    Rng root(55);
    std::vector<double> xs(trials);
    const ModelState st0 = t.st;
    for (int i = 0; i < trials; ++i) {
      t.st = st0;
      ws.recompute_residual(t.st, t.y, t.ops);
      sample_atom_weights(t.st, t.y, t.ops, t.hyper, ws, root, i);
      xs[i] = t.st.nu[0];
    }
    const auto m = moments(xs);
    expect(std::fabs(m.mean - mu) < 3.0 * m.se_mean, "step7 mean");
    expect(std::fabs(m.var - var) < 3.0 * m.se_var, "step7 var");
  }

  // Steps 3-6, 8: analytic distribution moments.
  {
    TinyModel t = tiny_model(56);
    Workspace ws;
    ws.init(t.y, t.ops);
    ws.recompute_residual(t.st, t.y, t.ops);
    double acc = 0.0;
    for (int k = 0; k < 2; ++k)
      acc += t.st.S(k, 0) * t.st.S(k, 0) * t.st.alpha_kn(k, 0);
    const double shape = t.hyper.a0 + 1.0;
    const double rate = t.hyper.b0 + 0.5 * acc * t.st.alpha0;
    Rng root(57);
    std::vector<double> xs(trials);
    const ModelState st0 = t.st;
    for (int i = 0; i < trials; ++i) {
      t.st = st0;
      sample_patch_scales(t.st, t.hyper, ws, root, i);
      xs[i] = t.st.tau[0];
    }
    const auto m = moments(xs);
    expect(std::fabs(m.mean - shape / rate) < 3.0 * m.se_mean, "step3 mean");
    expect(std::fabs(m.var - shape / (rate * rate)) < 3.0 * m.se_var,
           "step3 var");
  }
  {
    TinyModel t = tiny_model(58);
    Workspace ws;
    ws.init(t.y, t.ops);
    ws.recompute_residual(t.st, t.y, t.ops);
    const double s2 = t.st.S(0, 0) * t.st.S(0, 0);
    const double mu =
        std::sqrt(1.0 / (t.st.phi(0, 0) * s2 * t.st.tau[0] * t.st.alpha0));
    const double lambda = 1.0 / t.st.phi(0, 0);
    Rng root(59);
    std::vector<double> xs(trials);
    const ModelState st0 = t.st;
    for (int i = 0; i < trials; ++i) {
      t.st = st0;
      sample_local_shrinkage(t.st, t.hyper, ws, root, i);
      xs[i] = t.st.alpha_kn(0, 0);
    }
    const auto m = moments(xs);
    expect(std::fabs(m.mean - mu) < 3.0 * m.se_mean, "step4 mean");
    expect(std::fabs(m.var - mu * mu * mu / lambda) < 3.0 * m.se_var,
           "step4 var");
  }
  {
    TinyModel t = tiny_model(60);
    // Heavier-weight prior here: with the tiny defaults the conditional is a
    // GIG whose mean does not exist (inverse-gamma limit with unit shape), so
    // a moment check needs a regime where the mean is finite.
    t.hyper.g0 = 1.0;
    t.hyper.h0 = 0.5;
    Workspace ws;
    ws.init(t.y, t.ops);
    ws.recompute_residual(t.st, t.y, t.ops);
    const double a = 2.0 * t.hyper.h0, b = 1.0 / t.st.alpha_kn(0, 0);
    const double p = t.hyper.g0 - 1.0;
    Rng root(61);
    std::vector<double> xs(trials);
    const ModelState st0 = t.st;
    for (int i = 0; i < trials; ++i) {
      t.st = st0;
      sample_local_weights(t.st, t.hyper, ws, root, i);
      xs[i] = t.st.phi(0, 0);
    }
    const auto m = moments(xs);
    expect(std::fabs(m.mean - gig_mean(a, b, p)) < 3.0 * m.se_mean,
           "step5 mean");
    for (double x : xs) expect(x > 0.0, "step5 positive");
  }
  {
    TinyModel t = tiny_model(62);
    Workspace ws;
    ws.init(t.y, t.ops);
    ws.recompute_residual(t.st, t.y, t.ops);
    double obs = 0.0;
    for (const auto& op : t.ops)
      obs += static_cast<double>(op.observation_count());
    const double c1 = t.hyper.c0 + 0.5 * obs + 0.5 * 2 * 3;
    double d1 = t.hyper.d0;
    for (int n = 0; n < 3; ++n) {
      d1 += 0.5 * ws.R.col(n).squaredNorm();
      for (int k = 0; k < 2; ++k)
        d1 += 0.5 * t.st.S(k, n) * t.st.S(k, n) * t.st.tau[n] *
              t.st.alpha_kn(k, n);
    }
    Rng root(63);
    std::vector<double> xs(trials);
    const ModelState st0 = t.st;
    for (int i = 0; i < trials; ++i) {
      t.st = st0;
      sample_noise_precision(t.st, t.hyper, ws, root, i);
      xs[i] = t.st.alpha0;
    }
    const auto m = moments(xs);
    expect(std::fabs(m.mean - c1 / d1) < 3.0 * m.se_mean, "step6 mean");
    expect(std::fabs(m.var - c1 / (d1 * d1)) < 3.0 * m.se_var, "step6 var");
  }
  {
    TinyModel t = tiny_model(64);
    const double shape = t.hyper.e0 + 1.0;  // e0 + K/2, K = 2
    double rate = t.hyper.f0;
    for (int q = 0; q < 2; ++q) {
      double prod = 1.0;
      for (int i = 0; i <= q; ++i)
        if (i != 0) prod *= t.st.eta_tilde[i];
      rate += 0.5 * t.st.nu[q] * t.st.nu[q] * prod;
    }
    Rng root(65);
    std::vector<double> xs(trials);
    const ModelState st0 = t.st;
    for (int i = 0; i < trials; ++i) {
      t.st = st0;
      sample_eta(t.st, t.hyper, root, i);
      xs[i] = t.st.eta_tilde[0];
    }
    const auto m = moments(xs);
    expect(std::fabs(m.mean - shape / rate) < 3.0 * m.se_mean, "step8 mean");
    expect(std::fabs(m.var - shape / (rate * rate)) < 3.0 * m.se_var,
           "step8 var");
  }
  return g_current_ok;
}

// ---------- criterion 5: VB expected residual ----------

bool criterion_vb_residual() {
  std::vector<PatchOperator> ops;
  Eigen::MatrixXd y(2, 3);
  Rng rng(70);
  for (int n = 0; n < 3; ++n) {
    PatchOperator op;
    op.m = 2;
    op.channels = 3;
    Eigen::MatrixXd W(2, 3);
    for (int i = 0; i < W.size(); ++i) W(i % 2, i / 2) = rng.uniform();
    op.groups.push_back(W);
    ops.push_back(op);
  }
  for (int i = 0; i < 6; ++i) y(i % 2, i / 2) = sample_normal(rng);
  InferenceOpts opts;
  opts.K = 2;
  opts.kind = InferenceKind::vb;
  Hyperparams hyper;
  VbState st = init_vb_state(y, ops, opts, hyper, rng);
  for (int i = 0; i < st.s_mean.size(); ++i) {
    st.s_mean(i % 2, i / 2) = sample_normal(rng);
    st.s_var(i % 2, i / 2) = 0.1 + rng.uniform();
  }
  for (int i = 0; i < st.d_mean.size(); ++i) {
    st.d_mean(i % 6, i / 6) = sample_normal(rng);
    st.d_var(i % 6, i / 6) = 0.05 + 0.2 * rng.uniform();
  }
  for (int k = 0; k < 2; ++k) {
    st.nu_mean[k] = sample_normal(rng);
    st.nu_var[k] = 0.05 + 0.2 * rng.uniform();
  }
  const int n = 2;
  const double analytic = vb_detail::expected_residual(st, y, ops[n], n);
  const int draws = 1000000;
  double mean = 0.0, m2 = 0.0;
  Eigen::MatrixXd D(6, 2);
  Eigen::VectorXd s(2), nu(2);
  for (int i = 0; i < draws; ++i) {
    for (int idx = 0; idx < D.size(); ++idx) {
      const int p = idx % 6, k = idx / 6;
      D(p, k) =
          st.d_mean(p, k) + std::sqrt(st.d_var(p, k)) * sample_normal(rng);
    }
    for (int k = 0; k < 2; ++k) {
      s[k] = st.s_mean(k, n) + std::sqrt(st.s_var(k, n)) * sample_normal(rng);
      nu[k] = st.nu_mean[k] + std::sqrt(st.nu_var[k]) * sample_normal(rng);
    }
    const double r =
        (y.col(n) - ops[n].apply(D * nu.asDiagonal() * s)).squaredNorm();
    const double delta = r - mean;
    mean += delta / (i + 1);
    m2 += delta * (r - mean);
  }
  const double se = std::sqrt(m2 / draws / draws);
  expect(std::fabs(analytic - mean) < 3.0 * se, "vb residual mc");
  return g_current_ok;
}

// ---------- criterion 6: VB descent ----------

bool criterion_vb_descent() {
  const Datacube scene = synthetic_scene(32, 32, 1, 80);
  Datacube noisy = scene;
  Rng nrng(81);
  for (double& v : noisy.data) v += 0.05 * sample_normal(nrng);
  const PatchSet ps = extract_patches(noisy, 7, 7, 2, 2);
  std::vector<PatchOperator> ops(ps.grid.count(), identity_operator(49, 1));
  InferenceOpts opts;
  opts.K = 32;
  opts.kind = InferenceKind::vb;
  opts.iterations = 20;
  opts.seed = 82;
  opts.threads = 4;
  Hyperparams hyper;
  const VbResult r = run_vb(ps.vectors, ops, opts, hyper);
  for (int i = 1; i < 10; ++i)
    expect(r.trace.expected_misfit[i] <= r.trace.expected_misfit[i - 1],
           "descent first 10");
  double running_min = r.trace.expected_misfit[0];
  for (double v : r.trace.expected_misfit) {
    expect(v <= running_min * 1.01, "within 1% of running min");
    running_min = std::min(running_min, v);
  }
  return g_current_ok;
}

// ---------- criterion 7: side-information benefit ----------

bool criterion_side_info() {
  double total_gain = 0.0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const Datacube scene = synthetic_scene(64, 64, 8, 90 + seed);
    const CodeCube code = bernoulli_code(64, 64, 8, 190 + seed);
    Datacube rgb(64, 64, 3);
    for (int c = 0; c < 3; ++c) {
      const double center = (c + 0.5) * 8.0 / 3.0 - 0.5;
      for (int j = 0; j < 8; ++j) {
        const double w = std::exp(-0.5 * std::pow((j - center) / 2.0, 2));
        for (int x = 0; x < 64; ++x)
          for (int y = 0; y < 64; ++y)
            rgb.at(x, y, c) += w * scene.at(x, y, j);
      }
    }
    ReconJob job;
    job.measurement = forward(scene, code);
    job.code = code;
    job.patches.patch = 8;
    job.patches.stride = 4;
    InferenceOpts o;
    o.K = 48;
    o.kind = InferenceKind::vb;
    o.iterations = 25;
    o.seed = 290 + seed;
    o.threads = 4;
    job.opts = o;
    const ReconResult without = reconstruct_cs(job);
    job.measurement.side_rgb = rgb;
    const ReconResult with = reconstruct_cs(job);
    const double p_without = psnr(without.estimate, scene).psnr_mean;
    const double p_with = psnr(with.estimate, scene).psnr_mean;
    std::printf("    seed %llu: %.2f dB without, %.2f dB with side info\n",
                static_cast<unsigned long long>(seed), p_without, p_with);
    total_gain += p_with - p_without;
  }
  expect(total_gain / 3.0 >= 0.5, "mean side-info gain >= 0.5 dB");
  return g_current_ok;
}

// ---------- criterion 8: restoration floors ----------

bool criterion_restoration() {
  {
    Datacube clean = synthetic_scene(64, 64, 3, 100);
    for (double& v : clean.data) v *= 255.0;
    Datacube noisy = clean;
    Rng nrng(101);
    for (double& v : noisy.data) v += 25.0 * sample_normal(nrng);
    const double in_psnr = psnr(noisy, clean, 255.0).psnr_mean;
    PatchConfig pc;  // 7x7x3, stride 2
    InferenceOpts o;
    o.K = 32;
    o.kind = InferenceKind::vb;
    o.iterations = 20;
    o.seed = 102;
    o.threads = 4;
    const ReconResult res = denoise(noisy, pc, o, Hyperparams{});
    const double out_psnr = psnr(res.estimate, clean, 255.0).psnr_mean;
    std::printf("    denoise sigma=25: input %.2f dB -> output %.2f dB\n",
                in_psnr, out_psnr);
    expect(out_psnr >= in_psnr + 3.0, "denoise gain >= 3 dB");
  }
  {
    Datacube clean = synthetic_scene(64, 64, 3, 103);
    for (double& v : clean.data) v *= 255.0;
    Eigen::MatrixXd mask(64, 64);
    Rng mrng(104);
    for (int x = 0; x < 64; ++x)
      for (int y = 0; y < 64; ++y)
        mask(x, y) = mrng.uniform() < 0.5 ? 1.0 : 0.0;
    Datacube corrupted = clean;
    for (int j = 0; j < 3; ++j)
      for (int x = 0; x < 64; ++x)
        for (int y = 0; y < 64; ++y)
          if (mask(x, y) == 0.0) corrupted.at(x, y, j) = 0.0;
    const double in_psnr = psnr(corrupted, clean, 255.0).psnr_mean;
    PatchConfig pc;
    InferenceOpts o;
    o.K = 32;
    o.kind = InferenceKind::vb;
    o.iterations = 40;
    o.seed = 105;
    o.threads = 4;
    const ReconResult res = inpaint(corrupted, mask, pc, o, Hyperparams{});
    const double out_psnr = psnr(res.estimate, clean, 255.0).psnr_mean;
    std::printf("    inpaint 50%% observed: input %.2f dB -> output %.2f dB\n",
                in_psnr, out_psnr);
    expect(out_psnr >= in_psnr + 8.0, "inpaint gain >= 8 dB");
  }
  return g_current_ok;
}

// ---------- criterion 9: determinism across thread counts ----------

bool criterion_determinism() {
  const Datacube scene = synthetic_scene(24, 24, 4, 110);
  const CodeCube code = bernoulli_code(24, 24, 4, 111);
  ReconJob job;
  job.measurement = add_noise(forward(scene, code), 1e4, 112);
  job.code = code;
  job.patches.patch = 8;
  job.patches.stride = 4;
  InferenceOpts o;
  o.K = 16;
  o.kind = InferenceKind::vb;
  o.iterations = 8;
  o.seed = 113;
  for (int threads : {1, 2, 8}) {
    o.threads = threads;
    job.opts = o;
    static std::vector<double> reference;
    const ReconResult res = reconstruct_cs(job);
    if (reference.empty())
      reference = res.estimate.data;
    else
      expect(res.estimate.data == reference, "vb recon threads");
  }
  InferenceOpts g;
  g.K = 12;
  g.iterations = 8;
  g.burn_in = 4;
  g.seed = 114;
  const Datacube img = synthetic_scene(20, 20, 3, 115);
  PatchConfig pc;
  pc.patch = 5;
  pc.stride = 2;
  std::vector<double> ref;
  for (int threads : {1, 2, 8}) {
    g.threads = threads;
    const ReconResult res = denoise(img, pc, g, Hyperparams{});
    if (ref.empty())
      ref = res.estimate.data;
    else
      expect(res.estimate.data == ref, "gibbs denoise threads");
  }
  return g_current_ok;
}

// ---------- criterion 10: Gibbs/VB agreement ----------

bool criterion_agreement() {
  const Datacube scene = synthetic_scene(32, 32, 4, 120);
  const CodeCube code = bernoulli_code(32, 32, 4, 121);
  Measurement m = forward(scene, code);
  // SNR 30 dB on the measurement.
  const double signal_rms =
      std::sqrt(m.image.array().square().mean());
  const double sigma = signal_rms / std::pow(10.0, 30.0 / 20.0);
  m = add_noise(m, 1.0 / (sigma * sigma), 122);

  const PatchGrid grid = make_grid(32, 32, 8, 8, 2, 2);
  const Eigen::MatrixXd y = extract_image_patches(m.image, grid);
  const auto ops = build_patch_operators(code, grid);
  Hyperparams hyper;

  InferenceOpts gv;
  gv.K = 32;
  gv.kind = InferenceKind::vb;
  gv.iterations = 60;
  gv.seed = 123;
  gv.threads = 8;
  const VbResult vb = run_vb(y, ops, gv, hyper);

  InferenceOpts gg;
  gg.K = 32;
  gg.iterations = 600;
  gg.burn_in = 300;
  gg.seed = 124;
  gg.threads = 8;
  const GibbsResult gibbs = run_gibbs(y, ops, gg, hyper);

  // Compare the reassembled datacube estimates.
  PatchSet pv, pg;
  pv.grid = grid;
  pv.vectors = vb.xhat;
  pv.channels = 4;
  pg.grid = grid;
  pg.vectors = gibbs.xhat;
  pg.channels = 4;
  const Datacube cube_vb = reassemble(pv);
  const Datacube cube_gibbs = reassemble(pg);
  const double rel = rel_err_cube(cube_vb, cube_gibbs);
  std::printf("    relative Frobenius difference: %.4f\n", rel);
  expect(rel < 0.05, "gibbs/vb agreement < 5%");
  return g_current_ok;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<bool()> fn;
  };
  const std::vector<Criterion> criteria = {
      {"1 forward-model dense oracle", criterion_forward_oracle},
      {"2 patch round-trip identity", criterion_round_trip},
      {"3 sampler exactness", criterion_samplers},
      {"4 conditional-update conjugacy oracles", criterion_conjugacy},
      {"5 expected-residual Monte-Carlo oracle", criterion_vb_residual},
      {"6 variational descent", criterion_vb_descent},
      {"7 side-information benefit", criterion_side_info},
      {"8 restoration floors", criterion_restoration},
      {"9 determinism across thread counts", criterion_determinism},
      {"10 sampler/variational agreement", criterion_agreement},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    g_current_ok = true;
    g_detail.clear();
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = false;
    try {
      ok = c.fn();
    } catch (const std::exception& e) {
      g_detail += std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    std::printf("[%s] criterion %s (%.1f s)%s%s\n", ok ? "PASS" : "FAIL",
                c.name, secs, g_detail.empty() ? "" : " ",
                g_detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
  }
  if (failures) std::printf("%d criterion(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}
