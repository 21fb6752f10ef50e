#ifndef BCS_GIBBS_HPP
#define BCS_GIBBS_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "bcs/model.hpp"

namespace bcs {

struct GibbsTrace {
  std::vector<double> neg_log_posterior;  // one entry per sweep
  std::vector<double> alpha0;
  int samples = 0;  // post-burn-in sweeps accumulated into xhat
  long clamp_events = 0;
};

struct GibbsResult {
  Eigen::MatrixXd xhat;  // P x N posterior-mean patch estimates
  GibbsTrace trace;
  ModelState state;
};

namespace gibbs_detail {

// Per-run scratch shared by the conditional updates. patch_stream_ids give
// each patch its rng-stream identity; cross-patch sums always run in
// ascending-id order, so a consistent permutation of patches and ids leaves
// every draw bit-identical.
struct Workspace {
  Eigen::MatrixXd R;  // rows x N residuals y_n - Psi_n D Lambda s_n
  double sum_obs = 0;
  std::vector<std::uint64_t> patch_stream_ids;
  std::vector<int> order;  // patch indices sorted by stream id

  void init(const Eigen::MatrixXd& y, const std::vector<PatchOperator>& ops);
  void recompute_residual(const ModelState& st, const Eigen::MatrixXd& y,
                          const std::vector<PatchOperator>& ops);
};

// The eight conditional updates; each touches only its own coordinates and
// keeps the residuals in ws.R consistent.
void sample_dictionary(ModelState& st, const Eigen::MatrixXd& y,
                       const std::vector<PatchOperator>& ops,
                       const Hyperparams& hyper, Workspace& ws,
                       const Rng& root, std::uint64_t sweep);
void sample_coefficients(ModelState& st, const Eigen::MatrixXd& y,
                         const std::vector<PatchOperator>& ops,
                         const Hyperparams& hyper, Workspace& ws,
                         const Rng& root, std::uint64_t sweep);
void sample_patch_scales(ModelState& st, const Hyperparams& hyper,
                         Workspace& ws, const Rng& root, std::uint64_t sweep);
void sample_local_shrinkage(ModelState& st, const Hyperparams& hyper,
                            Workspace& ws, const Rng& root,
                            std::uint64_t sweep);
void sample_local_weights(ModelState& st, const Hyperparams& hyper,
                          Workspace& ws, const Rng& root, std::uint64_t sweep);
void sample_noise_precision(ModelState& st, const Hyperparams& hyper,
                            Workspace& ws, const Rng& root,
                            std::uint64_t sweep);
void sample_atom_weights(ModelState& st, const Eigen::MatrixXd& y,
                         const std::vector<PatchOperator>& ops,
                         const Hyperparams& hyper, Workspace& ws,
                         const Rng& root, std::uint64_t sweep);
void sample_eta(ModelState& st, const Hyperparams& hyper, const Rng& root,
                std::uint64_t sweep);

}  // namespace gibbs_detail

// One full sweep, steps 1-8 in order.
void gibbs_sweep(ModelState& st, const Eigen::MatrixXd& y,
                 const std::vector<PatchOperator>& ops,
                 const Hyperparams& hyper, gibbs_detail::Workspace& ws,
                 const Rng& root, std::uint64_t sweep);

GibbsResult run_gibbs(const Eigen::MatrixXd& y,
                      const std::vector<PatchOperator>& ops,
                      const InferenceOpts& opts, const Hyperparams& hyper);

}  // namespace bcs

#endif
