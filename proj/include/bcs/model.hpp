#ifndef BCS_MODEL_HPP
#define BCS_MODEL_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "bcs/rng.hpp"
#include "bcs/sensing.hpp"

namespace bcs {

struct Hyperparams {
  double a0 = 1e-6, b0 = 1e-6;  // tau prior
  double c0 = 1e-6, d0 = 1e-6;  // alpha0 prior
  double e0 = 1e-6, f0 = 1e-6;  // MGP eta_tilde prior
  double g0 = 1e-6, h0 = 1e-6;  // Phi prior

  void validate() const;
};

enum class InferenceKind { gibbs, vb };

struct InferenceOpts {
  int K = 64;
  int iterations = 200;
  int burn_in = 100;  // Gibbs only
  std::uint64_t seed = 0;
  double prune_threshold = 0.0;  // relative |nu_k| cutoff, 0 = off
  InferenceKind kind = InferenceKind::gibbs;
  bool final_sample_only = false;  // Gibbs: last sample instead of mean
  bool vb_phi_inverse = false;     // use <1/Phi> in the <alpha_kn> update
  int vb_warmup = 0;  // VB passes before the shrinkage moments update
  int threads = 1;

  void validate() const;
};

// All latent variables of the shrinkage dictionary-learning model.
struct ModelState {
  Eigen::MatrixXd D;          // P x K dictionary
  Eigen::MatrixXd S;          // K x N coefficients
  Eigen::VectorXd nu;         // K atom weights (diagonal of Lambda)
  Eigen::VectorXd eta_tilde;  // K multiplicative gamma increments
  Eigen::VectorXd eta;        // running products of eta_tilde
  Eigen::VectorXd tau;        // N global patch scales
  Eigen::MatrixXd alpha_kn;   // K x N local shrinkage
  Eigen::MatrixXd phi;        // K x N local weights
  double alpha0 = 1.0;        // noise precision
  long clamp_events = 0;      // degenerate-draw clamps, counted

  int P() const { return static_cast<int>(D.rows()); }
  int K() const { return static_cast<int>(D.cols()); }
  int N() const { return static_cast<int>(S.cols()); }

  void recompute_eta();
  void validate() const;  // positivity + dimension consistency
};

ModelState init_state(const Eigen::MatrixXd& y,
                      const std::vector<PatchOperator>& ops,
                      const InferenceOpts& opts, const Hyperparams& hyper,
                      Rng& rng);

// Addends of the negative log joint posterior, exposed individually.
struct NegLogPosteriorTerms {
  double data_fit = 0;      // alpha0/2 * sum ||y_n - Psi_n D Lambda s_n||^2
  double dict = 0;          // P/2 * sum ||d_k||^2
  double alpha0_prior = 0;  // -log Ga(alpha0; c0, d0)
  double s_quad = 0;        // alpha0/2 * sum tau_n alpha_kn s_kn^2
  double tau_prior = 0;     // -sum log Ga(tau_n; a0, b0)
  double phi_prior = 0;     // -sum log Ga(Phi_kn; g0, h0)
  double alpha_prior = 0;   // -sum log InvGa(alpha_kn; 1, 1/(2 Phi_kn))
  double nu_quad = 0;       // sum eta_k nu_k^2 / 2
  double eta_prior = 0;     // -sum log Ga(eta_tilde_k; e0, f0)

  double total() const {
    return data_fit + dict + alpha0_prior + s_quad + tau_prior + phi_prior +
           alpha_prior + nu_quad + eta_prior;
  }
};

NegLogPosteriorTerms neg_log_posterior(const ModelState& state,
                                       const Eigen::MatrixXd& y,
                                       const std::vector<PatchOperator>& ops,
                                       const Hyperparams& hyper);

// Drops atoms with |nu_k| < threshold * max|nu_k|; if everything would be
// dropped, keeps the single largest atom.
ModelState prune_atoms(const ModelState& state, double threshold);

// Checkpoint: dimension header + little-endian 64-bit float arrays in
// ModelState field order (D, S, nu, eta_tilde, eta, tau, alpha_kn, phi,
// alpha0).
void save_checkpoint(const ModelState& state, const std::string& path);
ModelState load_checkpoint(const std::string& path);

}  // namespace bcs

#endif
