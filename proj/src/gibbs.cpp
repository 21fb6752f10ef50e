#include "bcs/gibbs.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "bcs/errors.hpp"
#include "bcs/randmath.hpp"

namespace bcs {
namespace gibbs_detail {

namespace {

constexpr double kCoeffSqFloor = 1e-12;  // s_kn^2 floor in the IG update
constexpr double kAlphaClamp = 1e12;     // degenerate alpha_kn draws

std::uint64_t step_key(std::uint64_t sweep, std::uint64_t step) {
  return sweep * 16 + step;
}

}  // namespace

void Workspace::init(const Eigen::MatrixXd& y,
                     const std::vector<PatchOperator>& ops) {
  const int N = static_cast<int>(ops.size());
  if (N == 0 || y.cols() != N)
    throw ValidationError("gibbs: measurement/operator count mismatch");
  for (const auto& op : ops)
    if (op.m != ops.front().m || op.channels != ops.front().channels ||
        op.rows() != y.rows())
      throw ValidationError("gibbs: operators must share one patch layout");
  sum_obs = 0;
  for (const auto& op : ops) sum_obs += static_cast<double>(op.observation_count());
  if (patch_stream_ids.size() != static_cast<std::size_t>(N)) {
    patch_stream_ids.resize(N);
    std::iota(patch_stream_ids.begin(), patch_stream_ids.end(), 0);
  }
  order.resize(N);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return patch_stream_ids[a] < patch_stream_ids[b];
  });
}

void Workspace::recompute_residual(const ModelState& st,
                                   const Eigen::MatrixXd& y,
                                   const std::vector<PatchOperator>& ops) {
  const int N = st.N();
  R.resize(y.rows(), N);
  const Eigen::MatrixXd X = st.D * st.nu.asDiagonal() * st.S;
#pragma omp parallel for schedule(static)
  for (int n = 0; n < N; ++n) R.col(n) = y.col(n) - ops[n].apply(X.col(n));
}

void sample_dictionary(ModelState& st, const Eigen::MatrixXd& y,
                       const std::vector<PatchOperator>& ops,
                       const Hyperparams& hyper, Workspace& ws,
                       const Rng& root, std::uint64_t sweep) {
  (void)hyper;
  const int N = st.N(), K = st.K(), P = st.P();
  const int m = ops.front().m, L = ops.front().channels;
  const int G = static_cast<int>(ops.front().groups.size());
  Eigen::MatrixXd U(y.rows(), N);  // Psi_n d_k, refreshed per atom
  for (int k = 0; k < K; ++k) {
    const double nu = st.nu[k];
#pragma omp parallel for schedule(static)
    for (int n = 0; n < N; ++n) U.col(n) = ops[n].apply(st.D.col(k));

    BlockPrecision prec(m, L, static_cast<double>(P));
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(P);
#pragma omp parallel for schedule(static)
    for (int r = 0; r < m; ++r) {
      Eigen::MatrixXd& B = prec.block(r);
      for (int idx : ws.order) {
        const double s = st.S(k, idx);
        const double c = st.alpha0 * nu * nu * s * s;
        for (int g = 0; g < G; ++g) {
          const auto w = ops[idx].groups[g].row(r);
          if (c != 0.0) B.noalias() += c * w.transpose() * w;
          // Psi^T y_{n,-k} contribution at position r.
          const double yv =
              ws.R(g * m + r, idx) + nu * s * U(g * m + r, idx);
          for (int j = 0; j < L; ++j) rhs[j * m + r] += s * w[j] * yv;
        }
      }
    }
    rhs *= st.alpha0 * nu;
    Rng rng = root.stream(step_key(sweep, 1), k);
    const Eigen::VectorXd d_new = prec.sample(rhs, rng);
#pragma omp parallel for schedule(static)
    for (int n = 0; n < N; ++n) {
      const double c = nu * st.S(k, n);
      if (c != 0.0) {
        ws.R.col(n) += c * U.col(n);
        ws.R.col(n) -= c * ops[n].apply(d_new);
      }
    }
    st.D.col(k) = d_new;
  }
}

void sample_coefficients(ModelState& st, const Eigen::MatrixXd& y,
                         const std::vector<PatchOperator>& ops,
                         const Hyperparams& hyper, Workspace& ws,
                         const Rng& root, std::uint64_t sweep) {
  (void)hyper;
  (void)y;
  const int N = st.N(), K = st.K();
  Eigen::MatrixXd U(ws.R.rows(), N);
  for (int k = 0; k < K; ++k) {
    const double nu = st.nu[k];
#pragma omp parallel for schedule(static)
    for (int n = 0; n < N; ++n) U.col(n) = ops[n].apply(st.D.col(k));
#pragma omp parallel for schedule(static)
    for (int n = 0; n < N; ++n) {
      Rng rng = root.stream(step_key(sweep, 2), ws.patch_stream_ids[n], k);
      const double q = U.col(n).squaredNorm();
      const double s_old = st.S(k, n);
      const double w = U.col(n).dot(ws.R.col(n)) + nu * s_old * q;
      const double var =
          1.0 / (st.tau[n] * st.alpha_kn(k, n) * st.alpha0 +
                 st.alpha0 * nu * nu * q);
      const double mu = st.alpha0 * var * nu * w;
      const double s_new = mu + std::sqrt(var) * sample_normal(rng);
      ws.R.col(n) += nu * (s_old - s_new) * U.col(n);
      st.S(k, n) = s_new;
    }
  }
}

void sample_patch_scales(ModelState& st, const Hyperparams& hyper,
                         Workspace& ws, const Rng& root, std::uint64_t sweep) {
  const int N = st.N(), K = st.K();
  const double shape = hyper.a0 + 0.5 * K;
#pragma omp parallel for schedule(static)
  for (int n = 0; n < N; ++n) {
    Rng rng = root.stream(step_key(sweep, 3), ws.patch_stream_ids[n]);
    double acc = 0.0;
    for (int k = 0; k < K; ++k)
      acc += st.S(k, n) * st.S(k, n) * st.alpha_kn(k, n);
    st.tau[n] = sample_gamma(shape, hyper.b0 + 0.5 * acc * st.alpha0, rng);
  }
}

void sample_local_shrinkage(ModelState& st, const Hyperparams& hyper,
                            Workspace& ws, const Rng& root,
                            std::uint64_t sweep) {
  (void)hyper;
  const int N = st.N(), K = st.K();
  std::vector<long> clamps(N, 0);
#pragma omp parallel for schedule(static)
  for (int n = 0; n < N; ++n) {
    Rng rng = root.stream(step_key(sweep, 4), ws.patch_stream_ids[n]);
    for (int k = 0; k < K; ++k) {
      double s2 = st.S(k, n) * st.S(k, n);
      if (s2 < kCoeffSqFloor) {
        s2 = kCoeffSqFloor;
        ++clamps[n];
      }
      const double mu =
          std::sqrt(1.0 / (st.phi(k, n) * s2 * st.tau[n] * st.alpha0));
      double draw = std::isfinite(mu)
                        ? sample_inverse_gaussian(mu, 1.0 / st.phi(k, n), rng)
                        : std::numeric_limits<double>::infinity();
      if (!std::isfinite(draw)) {
        draw = kAlphaClamp;
        ++clamps[n];
      }
      st.alpha_kn(k, n) = draw;
    }
  }
  for (long c : clamps) st.clamp_events += c;
}

void sample_local_weights(ModelState& st, const Hyperparams& hyper,
                          Workspace& ws, const Rng& root, std::uint64_t sweep) {
  const int N = st.N(), K = st.K();
#pragma omp parallel for schedule(static)
  for (int n = 0; n < N; ++n) {
    Rng rng = root.stream(step_key(sweep, 5), ws.patch_stream_ids[n]);
    for (int k = 0; k < K; ++k)
      st.phi(k, n) = sample_gig(2.0 * hyper.h0, 1.0 / st.alpha_kn(k, n),
                                hyper.g0 - 1.0, rng);
  }
}

void sample_noise_precision(ModelState& st, const Hyperparams& hyper,
                            Workspace& ws, const Rng& root,
                            std::uint64_t sweep) {
  const int N = st.N(), K = st.K();
  Eigen::VectorXd res(N), quad(N);
#pragma omp parallel for schedule(static)
  for (int n = 0; n < N; ++n) {
    res[n] = ws.R.col(n).squaredNorm();
    double acc = 0.0;
    for (int k = 0; k < K; ++k)
      acc += st.S(k, n) * st.S(k, n) * st.tau[n] * st.alpha_kn(k, n);
    quad[n] = acc;
  }
  double d1 = hyper.d0;
  for (int idx : ws.order) d1 += 0.5 * (res[idx] + quad[idx]);
  const double c1 =
      hyper.c0 + 0.5 * ws.sum_obs + 0.5 * static_cast<double>(K) * N;
  Rng rng = root.stream(step_key(sweep, 6), 0);
  st.alpha0 = sample_gamma(c1, d1, rng);
}

void sample_atom_weights(ModelState& st, const Eigen::MatrixXd& y,
                         const std::vector<PatchOperator>& ops,
                         const Hyperparams& hyper, Workspace& ws,
                         const Rng& root, std::uint64_t sweep) {
  (void)hyper;
  (void)y;
  const int N = st.N(), K = st.K();
  Eigen::MatrixXd U(ws.R.rows(), N);
  Eigen::VectorXd a(N), b(N);
  for (int k = 0; k < K; ++k) {
    const double nu_old = st.nu[k];
#pragma omp parallel for schedule(static)
    for (int n = 0; n < N; ++n) {
      U.col(n) = ops[n].apply(st.D.col(k));
      const double s = st.S(k, n);
      const double q = U.col(n).squaredNorm();
      a[n] = s * s * q;
      // d_k^T Psi^T y_{n,-k} * s, with y_{n,-k} = r_n + nu s Psi d_k.
      b[n] = s * (U.col(n).dot(ws.R.col(n)) + nu_old * s * q);
    }
    double sum_a = 0.0, sum_b = 0.0;
    for (int idx : ws.order) {
      sum_a += a[idx];
      sum_b += b[idx];
    }
    const double var = 1.0 / (st.eta[k] + st.alpha0 * sum_a);
    const double mu = var * st.alpha0 * sum_b;
    Rng rng = root.stream(step_key(sweep, 7), k);
    const double nu_new = mu + std::sqrt(var) * sample_normal(rng);
#pragma omp parallel for schedule(static)
    for (int n = 0; n < N; ++n)
      ws.R.col(n) += (nu_old - nu_new) * st.S(k, n) * U.col(n);
    st.nu[k] = nu_new;
  }
}

void sample_eta(ModelState& st, const Hyperparams& hyper, const Rng& root,
                std::uint64_t sweep) {
  const int K = st.K();
  Rng rng = root.stream(step_key(sweep, 8), 0);
  for (int j = 0; j < K; ++j) {
    const double shape = hyper.e0 + 0.5 * static_cast<double>(K - j);
    double rate = hyper.f0;
    for (int q = j; q < K; ++q) {
      // eta_q / eta_tilde_j with current values.
      double prod = 1.0;
      for (int i = 0; i <= q; ++i)
        if (i != j) prod *= st.eta_tilde[i];
      rate += 0.5 * st.nu[q] * st.nu[q] * prod;
    }
    st.eta_tilde[j] = sample_gamma(shape, rate, rng);
  }
  st.recompute_eta();
}

}  // namespace gibbs_detail

void gibbs_sweep(ModelState& st, const Eigen::MatrixXd& y,
                 const std::vector<PatchOperator>& ops,
                 const Hyperparams& hyper, gibbs_detail::Workspace& ws,
                 const Rng& root, std::uint64_t sweep) {
  using namespace gibbs_detail;
  sample_dictionary(st, y, ops, hyper, ws, root, sweep);
  sample_coefficients(st, y, ops, hyper, ws, root, sweep);
  sample_patch_scales(st, hyper, ws, root, sweep);
  sample_local_shrinkage(st, hyper, ws, root, sweep);
  sample_local_weights(st, hyper, ws, root, sweep);
  sample_noise_precision(st, hyper, ws, root, sweep);
  sample_atom_weights(st, y, ops, hyper, ws, root, sweep);
  sample_eta(st, hyper, root, sweep);
}

GibbsResult run_gibbs(const Eigen::MatrixXd& y,
                      const std::vector<PatchOperator>& ops,
                      const InferenceOpts& opts, const Hyperparams& hyper) {
  opts.validate();
  if (!(opts.iterations > opts.burn_in))
    throw ValidationError("run_gibbs: iterations must exceed burn_in");
#ifdef _OPENMP
  omp_set_num_threads(opts.threads);
#endif
  Rng root(opts.seed);
  Rng init_rng = root.stream(0, 0);
  ModelState st = init_state(y, ops, opts, hyper, init_rng);

  gibbs_detail::Workspace ws;
  ws.init(y, ops);

  GibbsResult result;
  result.xhat = Eigen::MatrixXd::Zero(st.P(), st.N());
  for (int it = 1; it <= opts.iterations; ++it) {
    ws.recompute_residual(st, y, ops);
    gibbs_sweep(st, y, ops, hyper, ws, root, static_cast<std::uint64_t>(it));
    const auto terms = neg_log_posterior(st, y, ops, hyper);
    result.trace.neg_log_posterior.push_back(terms.total());
    result.trace.alpha0.push_back(st.alpha0);
    if (it > opts.burn_in) {
      if (opts.final_sample_only)
        result.xhat = st.D * st.nu.asDiagonal() * st.S;
      else
        result.xhat += st.D * st.nu.asDiagonal() * st.S;
      ++result.trace.samples;
    }
    // Opt-in atom pruning, once, at the end of burn-in (first sweep when
    // there is no burn-in); the residual is rebuilt next sweep.
    const int prune_at = opts.burn_in > 0 ? opts.burn_in : 1;
    if (opts.prune_threshold > 0.0 && it == prune_at)
      st = prune_atoms(st, opts.prune_threshold);
  }
  if (!opts.final_sample_only && result.trace.samples > 0)
    result.xhat /= static_cast<double>(result.trace.samples);
  result.trace.clamp_events = st.clamp_events;
  result.state = std::move(st);
  return result;
}

}  // namespace bcs
