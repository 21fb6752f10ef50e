#include "bcs/model.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "bcs/errors.hpp"
#include "bcs/randmath.hpp"

namespace bcs {

void Hyperparams::validate() const {
  for (double v : {a0, b0, c0, d0, e0, f0, g0, h0})
    if (!(v > 0.0)) throw ValidationError("Hyperparams: all must be > 0");
}

void InferenceOpts::validate() const {
  if (K < 1) throw ValidationError("InferenceOpts: K must be >= 1");
  if (kind == InferenceKind::gibbs) {
    if (!(iterations > burn_in) || burn_in < 0)
      throw ValidationError("InferenceOpts: need iterations > burn_in >= 0");
  } else if (iterations < 0) {
    throw ValidationError("InferenceOpts: iterations must be >= 0");
  }
  if (prune_threshold < 0.0 || prune_threshold >= 1.0)
    throw ValidationError("InferenceOpts: prune_threshold in [0,1)");
  if (threads < 1) throw ValidationError("InferenceOpts: threads must be >= 1");
  if (vb_warmup < 0)
    throw ValidationError("InferenceOpts: vb_warmup must be >= 0");
}

void ModelState::recompute_eta() {
  eta.resize(eta_tilde.size());
  double prod = 1.0;
  for (int k = 0; k < eta_tilde.size(); ++k) {
    prod *= eta_tilde[k];
    eta[k] = prod;
  }
}

void ModelState::validate() const {
  const int p = P(), k = K(), n = N();
  if (S.rows() != k || nu.size() != k || eta_tilde.size() != k ||
      eta.size() != k || tau.size() != n || alpha_kn.rows() != k ||
      alpha_kn.cols() != n || phi.rows() != k || phi.cols() != n)
    throw ValidationError("ModelState: inconsistent dimensions");
  auto positive = [](const auto& a, const char* name) {
    if (!(a.array() > 0.0).all() || !a.array().isFinite().all())
      throw ValidationError(std::string("ModelState: ") + name +
                            " must be strictly positive and finite");
  };
  positive(eta_tilde, "eta_tilde");
  positive(eta, "eta");
  positive(tau, "tau");
  positive(alpha_kn, "alpha_kn");
  positive(phi, "phi");
  if (!(alpha0 > 0.0) || !std::isfinite(alpha0))
    throw ValidationError("ModelState: alpha0 must be strictly positive");
  if (!D.array().isFinite().all() || !S.array().isFinite().all() ||
      !nu.array().isFinite().all())
    throw ValidationError("ModelState: non-finite entries");
  (void)p;
}

ModelState init_state(const Eigen::MatrixXd& y,
                      const std::vector<PatchOperator>& ops,
                      const InferenceOpts& opts, const Hyperparams& hyper,
                      Rng& rng) {
  hyper.validate();
  opts.validate();
  if (ops.empty() || y.cols() == 0)
    throw ValidationError("init_state: empty patch set");
  if (y.cols() != static_cast<long>(ops.size()))
    throw ValidationError("init_state: measurement/operator count mismatch");
  const int P = ops.front().signal_dim();
  const int N = static_cast<int>(y.cols());
  const int K = opts.K;

  ModelState st;
  st.D.resize(P, K);
  const double sd = 1.0 / std::sqrt(static_cast<double>(P));
  for (int k = 0; k < K; ++k)
    for (int p = 0; p < P; ++p) st.D(p, k) = sd * sample_normal(rng);
  st.S = Eigen::MatrixXd::Zero(K, N);
  st.nu = Eigen::VectorXd::Ones(K);
  st.eta_tilde = Eigen::VectorXd::Ones(K);
  st.recompute_eta();
  st.tau = Eigen::VectorXd::Ones(N);
  st.alpha_kn = Eigen::MatrixXd::Ones(K, N);
  st.phi = Eigen::MatrixXd::Ones(K, N);
  // Scale-aware start: 1 / variance of the measurement entries.
  const double mean = y.mean();
  const double var = (y.array() - mean).square().mean();
  st.alpha0 = var > 0.0 ? 1.0 / var : 1.0;
  return st;
}

namespace {

double log_gamma_pdf(double x, double shape, double rate) {
  return shape * std::log(rate) - std::lgamma(shape) +
         (shape - 1.0) * std::log(x) - rate * x;
}

double log_inv_gamma_pdf(double x, double shape, double scale) {
  return shape * std::log(scale) - std::lgamma(shape) -
         (shape + 1.0) * std::log(x) - scale / x;
}

}  // namespace

NegLogPosteriorTerms neg_log_posterior(const ModelState& state,
                                       const Eigen::MatrixXd& y,
                                       const std::vector<PatchOperator>& ops,
                                       const Hyperparams& hyper) {
  const int K = state.K(), N = state.N();
  if (y.cols() != N || static_cast<long>(ops.size()) != N)
    throw ValidationError("neg_log_posterior: dims mismatch");
  NegLogPosteriorTerms t;
  const Eigen::MatrixXd X = state.D * state.nu.asDiagonal() * state.S;
  for (int n = 0; n < N; ++n)
    t.data_fit += (y.col(n) - ops[n].apply(X.col(n))).squaredNorm();
  t.data_fit *= 0.5 * state.alpha0;
  t.dict = 0.5 * state.P() * state.D.squaredNorm();
  t.alpha0_prior = -log_gamma_pdf(state.alpha0, hyper.c0, hyper.d0);
  for (int n = 0; n < N; ++n) {
    t.tau_prior -= log_gamma_pdf(state.tau[n], hyper.a0, hyper.b0);
    for (int k = 0; k < K; ++k) {
      const double s2 = state.S(k, n) * state.S(k, n);
      t.s_quad += state.tau[n] * state.alpha_kn(k, n) * s2;
      t.phi_prior -= log_gamma_pdf(state.phi(k, n), hyper.g0, hyper.h0);
      t.alpha_prior -= log_inv_gamma_pdf(state.alpha_kn(k, n), 1.0,
                                         0.5 / state.phi(k, n));
    }
  }
  t.s_quad *= 0.5 * state.alpha0;
  for (int k = 0; k < K; ++k) {
    t.nu_quad += 0.5 * state.eta[k] * state.nu[k] * state.nu[k];
    t.eta_prior -= log_gamma_pdf(state.eta_tilde[k], hyper.e0, hyper.f0);
  }
  return t;
}

ModelState prune_atoms(const ModelState& state, double threshold) {
  if (threshold < 0.0 || threshold >= 1.0)
    throw ValidationError("prune_atoms: threshold in [0,1)");
  if (threshold == 0.0) return state;
  const double cutoff = threshold * state.nu.cwiseAbs().maxCoeff();
  std::vector<int> keep;
  for (int k = 0; k < state.K(); ++k)
    if (std::fabs(state.nu[k]) >= cutoff) keep.push_back(k);
  if (keep.empty()) {
    int best = 0;
    state.nu.cwiseAbs().maxCoeff(&best);
    keep.push_back(best);
  }
  const int Kp = static_cast<int>(keep.size());
  ModelState out;
  out.D.resize(state.P(), Kp);
  out.S.resize(Kp, state.N());
  out.nu.resize(Kp);
  out.eta_tilde.resize(Kp);
  out.alpha_kn.resize(Kp, state.N());
  out.phi.resize(Kp, state.N());
  for (int i = 0; i < Kp; ++i) {
    const int k = keep[i];
    out.D.col(i) = state.D.col(k);
    out.S.row(i) = state.S.row(k);
    out.nu[i] = state.nu[k];
    out.eta_tilde[i] = state.eta_tilde[k];
    out.alpha_kn.row(i) = state.alpha_kn.row(k);
    out.phi.row(i) = state.phi.row(k);
  }
  out.recompute_eta();
  out.tau = state.tau;
  out.alpha0 = state.alpha0;
  out.clamp_events = state.clamp_events;
  return out;
}

namespace {

void write_f64(std::ofstream& f, const double* data, std::size_t count) {
  // Host is little-endian; layout documented as f64le.
  f.write(reinterpret_cast<const char*>(data),
          static_cast<std::streamsize>(count * sizeof(double)));
}

void read_f64(std::ifstream& f, double* data, std::size_t count) {
  f.read(reinterpret_cast<char*>(data),
         static_cast<std::streamsize>(count * sizeof(double)));
  if (!f) throw IoError("checkpoint: truncated file");
}

}  // namespace

void save_checkpoint(const ModelState& state, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("checkpoint: cannot open " + path);
  f << "BCSSTATE1 " << state.P() << " " << state.K() << " " << state.N()
    << "\n";
  write_f64(f, state.D.data(), state.D.size());
  write_f64(f, state.S.data(), state.S.size());
  write_f64(f, state.nu.data(), state.nu.size());
  write_f64(f, state.eta_tilde.data(), state.eta_tilde.size());
  write_f64(f, state.eta.data(), state.eta.size());
  write_f64(f, state.tau.data(), state.tau.size());
  write_f64(f, state.alpha_kn.data(), state.alpha_kn.size());
  write_f64(f, state.phi.data(), state.phi.size());
  write_f64(f, &state.alpha0, 1);
  if (!f) throw IoError("checkpoint: write failed for " + path);
}

ModelState load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("checkpoint: cannot open " + path);
  std::string magic;
  int P = 0, K = 0, N = 0;
  f >> magic >> P >> K >> N;
  if (magic != "BCSSTATE1" || P < 1 || K < 1 || N < 1)
    throw IoError("checkpoint: bad header in " + path);
  f.ignore(1);  // newline
  ModelState st;
  st.D.resize(P, K);
  st.S.resize(K, N);
  st.nu.resize(K);
  st.eta_tilde.resize(K);
  st.eta.resize(K);
  st.tau.resize(N);
  st.alpha_kn.resize(K, N);
  st.phi.resize(K, N);
  read_f64(f, st.D.data(), st.D.size());
  read_f64(f, st.S.data(), st.S.size());
  read_f64(f, st.nu.data(), st.nu.size());
  read_f64(f, st.eta_tilde.data(), st.eta_tilde.size());
  read_f64(f, st.eta.data(), st.eta.size());
  read_f64(f, st.tau.data(), st.tau.size());
  read_f64(f, st.alpha_kn.data(), st.alpha_kn.size());
  read_f64(f, st.phi.data(), st.phi.size());
  read_f64(f, &st.alpha0, 1);
  return st;
}

}  // namespace bcs
