#ifndef BCS_RECON_HPP
#define BCS_RECON_HPP

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "bcs/core.hpp"
#include "bcs/model.hpp"
#include "bcs/sensing.hpp"

namespace bcs {

enum class ReconTask { cs_hyperspectral, denoise, inpaint };

// Patch-grid geometry; patch == 0 picks the task default (8 for coded
// hyperspectral capture, 7 for image restoration).
struct PatchConfig {
  int patch = 0;
  int stride = 2;
};

struct ReconJob {
  ReconTask task = ReconTask::cs_hyperspectral;
  Measurement measurement;
  std::optional<CodeCube> code;                // cs task
  std::optional<Eigen::MatrixXd> observed_mask;  // inpaint, nx x ny in {0,1}
  int channels = 0;  // N_lambda of the unknown cube (cs) / image channels
  PatchConfig patches;
  InferenceOpts opts;
  Hyperparams hyper;

  void validate() const;
};

struct ReconResult {
  Datacube estimate;
  std::optional<Datacube> side_estimate;  // RGB rows of the stacked model
  std::vector<double> objective;  // per-iteration trace
  std::vector<double> alpha0_trace;
  bool objective_is_misfit = false;  // true for the variational trace
  Eigen::MatrixXd dictionary;        // final D (or <D>)
  Eigen::VectorXd atom_weights;      // final nu (or <nu>)
  long clamp_events = 0;
  double runtime_seconds = 0.0;
  int compression_num = 1, compression_den = 1;  // e.g. N_lambda : 1
  std::vector<std::string> warnings;
};

ReconResult reconstruct_cs(const ReconJob& job);

// Identity sensing per patch; noise precision is inferred, never supplied.
ReconResult denoise(const Datacube& noisy, const PatchConfig& patches,
                    const InferenceOpts& opts, const Hyperparams& hyper);

// Row-subsampled identity sensing: only pixels with observed(x,y) != 0
// contribute; unobserved pixels are filled from the learned dictionary.
ReconResult inpaint(const Datacube& corrupted,
                    const Eigen::MatrixXd& observed,
                    const PatchConfig& patches, const InferenceOpts& opts,
                    const Hyperparams& hyper);

}  // namespace bcs

#endif
