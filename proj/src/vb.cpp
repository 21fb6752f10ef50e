#include "bcs/vb.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

#include <cmath>
#include <limits>

#include "bcs/errors.hpp"
#include "bcs/randmath.hpp"

namespace bcs {

Eigen::MatrixXd VbState::second_moment_d() const {
  return d_mean.array().square().matrix() + d_var;
}

Eigen::MatrixXd VbState::second_moment_s() const {
  return s_mean.array().square().matrix() + s_var;
}

Eigen::VectorXd VbState::second_moment_nu() const {
  return nu_mean.array().square().matrix() + nu_var;
}

void VbState::recompute_eta() {
  eta.resize(eta_tilde.size());
  double prod = 1.0;
  for (int k = 0; k < eta_tilde.size(); ++k) {
    prod *= eta_tilde[k];
    eta[k] = prod;
  }
}

void VbState::validate() const {
  auto positive = [](const auto& a, const char* name) {
    if (!(a.array() > 0.0).all() || !a.array().isFinite().all())
      throw ValidationError(std::string("VbState: ") + name +
                            " must be strictly positive and finite");
  };
  positive(d_var, "d_var");
  positive(s_var, "s_var");
  positive(nu_var, "nu_var");
  positive(tau, "tau");
  positive(alpha, "alpha");
  positive(phi, "phi");
  positive(phi_inv, "phi_inv");
  positive(eta_tilde, "eta_tilde");
  positive(eta, "eta");
  if (!(alpha0 > 0.0) || !std::isfinite(alpha0))
    throw ValidationError("VbState: alpha0 must be strictly positive");
  if (!d_mean.array().isFinite().all() || !s_mean.array().isFinite().all() ||
      !nu_mean.array().isFinite().all())
    throw ValidationError("VbState: non-finite means");
}

namespace vb_detail {

void Workspace::init(const Eigen::MatrixXd& y,
                     const std::vector<PatchOperator>& ops) {
  const int N = static_cast<int>(ops.size());
  if (N == 0 || y.cols() != N)
    throw ValidationError("vb: measurement/operator count mismatch");
  for (const auto& op : ops)
    if (op.m != ops.front().m || op.channels != ops.front().channels ||
        op.rows() != y.rows())
      throw ValidationError("vb: operators must share one patch layout");
  sum_obs = 0;
  for (const auto& op : ops) sum_obs += static_cast<double>(op.observation_count());
  const int P = ops.front().signal_dim();
  w_diag.resize(P, N);
  for (int n = 0; n < N; ++n) w_diag.col(n) = ops[n].psi_t_psi_diag();
}

void Workspace::recompute_residual(const VbState& st, const Eigen::MatrixXd& y,
                                   const std::vector<PatchOperator>& ops) {
  const int N = st.N();
  R.resize(y.rows(), N);
  const Eigen::MatrixXd X = st.d_mean * st.nu_mean.asDiagonal() * st.s_mean;
#pragma omp parallel for schedule(static)
  for (int n = 0; n < N; ++n) R.col(n) = y.col(n) - ops[n].apply(X.col(n));
}

double expected_residual(const VbState& st, const Eigen::MatrixXd& y,
                         const PatchOperator& op, int n) {
  const int K = st.K();
  const Eigen::VectorXd sm = st.s_mean.col(n);
  const Eigen::VectorXd xmean =
      st.d_mean * (st.nu_mean.asDiagonal() * sm);
  const Eigen::VectorXd v = op.apply(xmean);
  // <D^T Psi^T Psi D> = (Psi <D>)^T (Psi <D>) + diag(sum_p d_var w_p).
  Eigen::MatrixXd G(op.rows(), K);
  for (int k = 0; k < K; ++k) G.col(k) = op.apply(st.d_mean.col(k));
  Eigen::MatrixXd M = G.transpose() * G;
  const Eigen::VectorXd w = op.psi_t_psi_diag();
  for (int k = 0; k < K; ++k)
    M(k, k) += st.d_var.col(k).dot(w);
  // Hadamard with <nu nu^T> = <nu><nu>^T + diag(nu_var).
  M.array() *= (st.nu_mean * st.nu_mean.transpose()).array();
  for (int k = 0; k < K; ++k) {
    const double d2w = st.d_var.col(k).dot(w);
    M(k, k) += st.nu_var[k] *
               (G.col(k).squaredNorm() + d2w);
  }
  const double trace_term =
      sm.dot(M * sm) + st.s_var.col(n).dot(M.diagonal());
  return y.col(n).squaredNorm() - 2.0 * y.col(n).dot(v) + trace_term;
}

namespace {

// <Phi> and <1/Phi> of GIG(2 h0, 1/alpha, g0 - 1), as printed: ratios of
// K_{g0}, K_{g0-1}, K_{g0+1} at omega = sqrt(2 h0 / alpha), computed from
// scaled Bessel values so the exponential factors cancel.
void phi_moments(double alpha, double g0, double h0, double& phi,
                 double& phi_inv) {
  const double b = 1.0 / alpha;
  const double omega = std::sqrt(2.0 * h0 * b);
  const double k_lo = bessel_k_scaled(g0 - 1.0, omega);
  const double k_mid = bessel_k_scaled(g0, omega);
  const double k_hi = bessel_k_scaled(g0 + 1.0, omega);
  phi = std::sqrt(b / (2.0 * h0)) * k_mid / k_lo;
  phi_inv = std::sqrt(2.0 * h0 / b) * k_hi / k_mid;
  if (!std::isfinite(phi) || !std::isfinite(phi_inv))
    throw NumericalError("vb: Phi moment over/underflow");
}

void check_finite(const Eigen::Ref<const Eigen::MatrixXd>& a,
                  const char* update) {
  if (!a.array().isFinite().all())
    throw NumericalError(std::string("vb: NaN in update ") + update);
}

}  // namespace

}  // namespace vb_detail

VbState init_vb_state(const Eigen::MatrixXd& y,
                      const std::vector<PatchOperator>& ops,
                      const InferenceOpts& opts, const Hyperparams& hyper,
                      Rng& rng) {
  ModelState base = init_state(y, ops, opts, hyper, rng);
  VbState st;
  st.d_mean = base.D;
  st.d_var = Eigen::MatrixXd::Constant(base.P(), base.K(),
                                       1.0 / static_cast<double>(base.P()));
  // The coefficient means must not start at zero: the mean-field updates are
  // deterministic and the all-zero point is a fixed point of the d/s/nu
  // coordinate updates.
  st.s_mean = Eigen::MatrixXd::NullaryExpr(
      base.K(), base.N(), [&rng](Eigen::Index, Eigen::Index) {
        return sample_normal(rng);
      });
  st.s_var = Eigen::MatrixXd::Ones(base.K(), base.N());
  st.nu_mean = Eigen::VectorXd::Ones(base.K());
  st.nu_var = Eigen::VectorXd::Ones(base.K());
  st.tau = Eigen::VectorXd::Ones(base.N());
  st.alpha = Eigen::MatrixXd::Ones(base.K(), base.N());
  st.phi = Eigen::MatrixXd::Ones(base.K(), base.N());
  st.phi_inv = Eigen::MatrixXd::Ones(base.K(), base.N());
  st.eta_tilde = Eigen::VectorXd::Ones(base.K());
  st.recompute_eta();
  st.alpha0 = base.alpha0;
  return st;
}

void vb_iterate(VbState& st, const Eigen::MatrixXd& y,
                const std::vector<PatchOperator>& ops,
                const Hyperparams& hyper, vb_detail::Workspace& ws,
                const InferenceOpts& opts, bool shrink) {
  using vb_detail::check_finite;
  const int N = st.N(), K = st.K(), P = st.P();
  const int m = ops.front().m, L = ops.front().channels;
  const int G = static_cast<int>(ops.front().groups.size());
  const Eigen::VectorXd nu2 = st.second_moment_nu();
  Eigen::MatrixXd U(y.rows(), N);

  // <d_k>, sigma^2_{d_pk}; sequential across atoms, residual maintained.
  Eigen::MatrixXd s2 = st.second_moment_s();
  for (int k = 0; k < K; ++k) {
    const double nu = st.nu_mean[k];
#pragma omp parallel for schedule(static)
    for (int n = 0; n < N; ++n) U.col(n) = ops[n].apply(st.d_mean.col(k));
    BlockPrecision prec(m, L, static_cast<double>(P));
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(P);
#pragma omp parallel for schedule(static)
    for (int r = 0; r < m; ++r) {
      Eigen::MatrixXd& B = prec.block(r);
      for (int n = 0; n < N; ++n) {
        const double c = st.alpha0 * nu2[k] * s2(k, n);
        const double s = st.s_mean(k, n);
        for (int g = 0; g < G; ++g) {
          const auto w = ops[n].groups[g].row(r);
          if (c != 0.0) B.noalias() += c * w.transpose() * w;
          const double yv = ws.R(g * m + r, n) + nu * s * U(g * m + r, n);
          for (int j = 0; j < L; ++j) rhs[j * m + r] += s * w[j] * yv;
        }
      }
    }
    rhs *= st.alpha0 * nu;
    const Eigen::VectorXd d_new = prec.solve(rhs);
    st.d_var.col(k) = prec.diagonal_of_inverse();
#pragma omp parallel for schedule(static)
    for (int n = 0; n < N; ++n) {
      const double c = nu * st.s_mean(k, n);
      if (c != 0.0) {
        ws.R.col(n) += c * U.col(n);
        ws.R.col(n) -= c * ops[n].apply(d_new);
      }
    }
    st.d_mean.col(k) = d_new;
  }
  check_finite(st.d_mean, "<d_k>");
  check_finite(st.d_var, "Sigma_{d_k}");

  // Q(k,n) = <d_k^T Psi_n^T Psi_n d_k> = ||Psi_n <d_k>||^2 + d_var.w_n,
  // recomputed per atom while Psi_n <d_k> is in hand.
  Eigen::MatrixXd Q(K, N);

  // <s_kn>, sigma^2_{s_kn}.
  for (int k = 0; k < K; ++k) {
    const double nu = st.nu_mean[k];
#pragma omp parallel for schedule(static)
    for (int n = 0; n < N; ++n) U.col(n) = ops[n].apply(st.d_mean.col(k));
#pragma omp parallel for schedule(static)
    for (int n = 0; n < N; ++n) {
      Q(k, n) =
          U.col(n).squaredNorm() + st.d_var.col(k).dot(ws.w_diag.col(n));
      const double s_old = st.s_mean(k, n);
      const double w = U.col(n).dot(ws.R.col(n)) + nu * s_old * U.col(n).squaredNorm();
      const double var = 1.0 / (st.tau[n] * st.alpha(k, n) * st.alpha0 +
                                st.alpha0 * nu2[k] * Q(k, n));
      const double s_new = st.alpha0 * var * nu * w;
      ws.R.col(n) += nu * (s_old - s_new) * U.col(n);
      st.s_var(k, n) = var;
      st.s_mean(k, n) = s_new;
    }
  }
  check_finite(st.s_mean, "<s_kn>");
  check_finite(st.s_var, "sigma^2_{s_kn}");
  s2 = st.second_moment_s();

  // <tau_n>.
#pragma omp parallel for schedule(static)
  for (int n = 0; n < N; ++n) {
    double acc = 0.0;
    for (int k = 0; k < K; ++k) acc += s2(k, n) * st.alpha(k, n);
    st.tau[n] =
        (hyper.a0 + 0.5 * K) / (hyper.b0 + 0.5 * acc * st.alpha0);
  }
  check_finite(st.tau, "<tau_n>");

  // <alpha_kn> (plug-in form; optional <1/Phi> variant).
  if (shrink) {
#pragma omp parallel for schedule(static)
  for (int n = 0; n < N; ++n)
    for (int k = 0; k < K; ++k) {
      const double phi_term =
          opts.vb_phi_inverse ? 1.0 / st.phi_inv(k, n) : st.phi(k, n);
      double a = std::sqrt(
          1.0 / (phi_term * s2(k, n) * st.tau[n] * st.alpha0));
      if (!std::isfinite(a) || a > 1e12) a = 1e12;
      st.alpha(k, n) = a;
    }
  check_finite(st.alpha, "<alpha_kn>");

  // <Phi_kn>, <1/Phi_kn>. Exceptions may not cross the parallel region;
  // failures surface as NaN and are caught below.
#pragma omp parallel for schedule(static)
  for (int n = 0; n < N; ++n)
    for (int k = 0; k < K; ++k) {
      try {
        vb_detail::phi_moments(st.alpha(k, n), hyper.g0, hyper.h0,
                               st.phi(k, n), st.phi_inv(k, n));
      } catch (const std::exception&) {
        st.phi(k, n) = std::numeric_limits<double>::quiet_NaN();
        st.phi_inv(k, n) = std::numeric_limits<double>::quiet_NaN();
      }
    }
  check_finite(st.phi, "<Phi_kn>");
  check_finite(st.phi_inv, "<1/Phi_kn>");
  }  // shrink

  // <alpha0> with the full expected-residual expansion.
  {
    Eigen::VectorXd res(N);
#pragma omp parallel for schedule(static)
    for (int n = 0; n < N; ++n)
      res[n] = vb_detail::expected_residual(st, y, ops[n], n);
    double denom = hyper.d0;
    for (int n = 0; n < N; ++n) {
      double acc = 0.0;
      for (int k = 0; k < K; ++k) acc += s2(k, n) * st.alpha(k, n);
      denom += 0.5 * acc * st.tau[n] + 0.5 * res[n];
    }
    st.alpha0 =
        (hyper.c0 + 0.5 * ws.sum_obs + 0.5 * static_cast<double>(K) * N) /
        denom;
    if (!std::isfinite(st.alpha0) || !(st.alpha0 > 0.0))
      throw NumericalError("vb: NaN in update <alpha0>");
  }

  // <nu_k>, sigma^2_{nu_k}.
  for (int k = 0; k < K; ++k) {
    const double nu_old = st.nu_mean[k];
    Eigen::VectorXd a(N), b(N);
#pragma omp parallel for schedule(static)
    for (int n = 0; n < N; ++n) {
      U.col(n) = ops[n].apply(st.d_mean.col(k));
      a[n] = s2(k, n) * Q(k, n);
      const double s = st.s_mean(k, n);
      b[n] = s * (U.col(n).dot(ws.R.col(n)) +
                  nu_old * s * U.col(n).squaredNorm());
    }
    double sum_a = 0.0, sum_b = 0.0;
    for (int n = 0; n < N; ++n) {
      sum_a += a[n];
      sum_b += b[n];
    }
    const double var = 1.0 / (st.eta[k] + st.alpha0 * sum_a);
    const double nu_new = var * st.alpha0 * sum_b;
#pragma omp parallel for schedule(static)
    for (int n = 0; n < N; ++n)
      ws.R.col(n) += (nu_old - nu_new) * st.s_mean(k, n) * U.col(n);
    st.nu_var[k] = var;
    st.nu_mean[k] = nu_new;
  }
  check_finite(st.nu_mean, "<nu_k>");
  check_finite(st.nu_var, "sigma^2_{nu_k}");

  // <eta_tilde_j>, sequential with running products.
  if (shrink) {
  const Eigen::VectorXd nu2_new = st.second_moment_nu();
  for (int j = 0; j < K; ++j) {
    double rate = hyper.f0;
    for (int q = j; q < K; ++q) {
      double prod = 1.0;
      for (int i = 0; i <= q; ++i)
        if (i != j) prod *= st.eta_tilde[i];
      rate += 0.5 * nu2_new[q] * prod;
    }
    st.eta_tilde[j] = (hyper.e0 + 0.5 * static_cast<double>(K - j)) / rate;
  }
  st.recompute_eta();
  check_finite(st.eta_tilde, "<eta_tilde_j>");
  }  // shrink
}

VbResult run_vb(const Eigen::MatrixXd& y,
                const std::vector<PatchOperator>& ops,
                const InferenceOpts& opts, const Hyperparams& hyper) {
  opts.validate();
  hyper.validate();
#ifdef _OPENMP
  omp_set_num_threads(opts.threads);
#endif
  Rng root(opts.seed);
  Rng init_rng = root.stream(0, 0);
  VbResult result;
  result.state = init_vb_state(y, ops, opts, hyper, init_rng);
  VbState& st = result.state;

  vb_detail::Workspace ws;
  ws.init(y, ops);
  ws.recompute_residual(st, y, ops);
  for (int it = 0; it < opts.iterations; ++it) {
    vb_iterate(st, y, ops, hyper, ws, opts, it >= opts.vb_warmup);
    double misfit = 0.0;
    const int N = st.N();
    Eigen::VectorXd res(N);
#pragma omp parallel for schedule(static)
    for (int n = 0; n < N; ++n)
      res[n] = vb_detail::expected_residual(st, y, ops[n], n);
    for (int n = 0; n < N; ++n) misfit += res[n];
    result.trace.expected_misfit.push_back(misfit);
    result.trace.alpha0.push_back(st.alpha0);
  }
  result.xhat = st.d_mean * st.nu_mean.asDiagonal() * st.s_mean;
  return result;
}

}  // namespace bcs
