#ifndef BCS_VB_HPP
#define BCS_VB_HPP

#include <Eigen/Dense>
#include <vector>

#include "bcs/model.hpp"

namespace bcs {

// Mean-field moments of the factorized posterior.
struct VbState {
  Eigen::MatrixXd d_mean, d_var;    // P x K: <d_pk>, sigma^2_{d_pk}
  Eigen::MatrixXd s_mean, s_var;    // K x N: <s_kn>, sigma^2_{s_kn}
  Eigen::VectorXd nu_mean, nu_var;  // K
  Eigen::VectorXd tau;              // N: <tau_n>
  Eigen::MatrixXd alpha;            // K x N: <alpha_kn>
  Eigen::MatrixXd phi, phi_inv;     // K x N: <Phi_kn>, <1/Phi_kn>
  Eigen::VectorXd eta_tilde, eta;   // K
  double alpha0 = 1.0;              // <alpha0>

  int P() const { return static_cast<int>(d_mean.rows()); }
  int K() const { return static_cast<int>(d_mean.cols()); }
  int N() const { return static_cast<int>(s_mean.cols()); }

  Eigen::MatrixXd second_moment_d() const;  // <d^2> = mean^2 + var
  Eigen::MatrixXd second_moment_s() const;
  Eigen::VectorXd second_moment_nu() const;
  void recompute_eta();
  void validate() const;
};

struct VbTrace {
  std::vector<double> expected_misfit;  // sum_n <||y_n - Psi_n D Lambda s_n||^2>
  std::vector<double> alpha0;
};

struct VbResult {
  Eigen::MatrixXd xhat;  // <D><Lambda><s_n> per patch
  VbTrace trace;
  VbState state;
};

namespace vb_detail {

struct Workspace {
  Eigen::MatrixXd R;       // rows x N residuals with posterior means
  Eigen::MatrixXd w_diag;  // P x N, diag(Psi_n^T Psi_n) per patch
  double sum_obs = 0;

  void init(const Eigen::MatrixXd& y, const std::vector<PatchOperator>& ops);
  void recompute_residual(const VbState& st, const Eigen::MatrixXd& y,
                          const std::vector<PatchOperator>& ops);
};

// Analytic <||y_n - Psi_n D Lambda s_n||^2> including the trace expansion.
double expected_residual(const VbState& st, const Eigen::MatrixXd& y,
                         const PatchOperator& op, int n);

}  // namespace vb_detail

VbState init_vb_state(const Eigen::MatrixXd& y,
                      const std::vector<PatchOperator>& ops,
                      const InferenceOpts& opts, const Hyperparams& hyper,
                      Rng& rng);

// One full coordinate-ascent pass, same update order as the Gibbs sweep.
// With shrink=false the shrinkage moments (alpha, Phi, eta) are held fixed;
// run_vb does this for the first opts.vb_warmup passes so the dictionary can
// align with the data before atoms may be pruned (a zeroed atom is an
// absorbing state of the deterministic updates).
void vb_iterate(VbState& st, const Eigen::MatrixXd& y,
                const std::vector<PatchOperator>& ops,
                const Hyperparams& hyper, vb_detail::Workspace& ws,
                const InferenceOpts& opts, bool shrink = true);

VbResult run_vb(const Eigen::MatrixXd& y,
                const std::vector<PatchOperator>& ops,
                const InferenceOpts& opts, const Hyperparams& hyper);

}  // namespace bcs

#endif
