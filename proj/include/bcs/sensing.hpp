#ifndef BCS_SENSING_HPP
#define BCS_SENSING_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "bcs/core.hpp"
#include "bcs/rng.hpp"

namespace bcs {

enum class CodeKind { cassi_shift, slm, custom };

// Per-channel modulation pattern C_j, entries in [0,1].
struct CodeCube {
  Datacube codes;
  CodeKind kind = CodeKind::custom;

  void validate() const;  // finite, entries in [0,1]
};

// Single coded 2D snapshot, optionally with a registered RGB side image.
struct Measurement {
  Eigen::MatrixXd image;
  std::optional<double> noise_precision_true;  // synthetic data only
  std::optional<Datacube> side_rgb;            // nx x ny x 3
};

// Per-patch sensing operator mapping a vectorized patch (length
// P = m * channels) to its measurement vector. Structure: one or more row
// groups of m rows each, group g being [diag(W_g^(1)), ..., diag(W_g^(L))];
// the plain camera model has a single group, the RGB side-information model
// appends identity groups.
struct PatchOperator {
  int m = 0;         // spatial positions per patch (n_x * n_y)
  int channels = 0;  // L, channel blocks of the signal
  std::vector<Eigen::MatrixXd> groups;  // each m x channels

  int signal_dim() const { return m * channels; }
  int rows() const { return m * static_cast<int>(groups.size()); }
  long nnz() const;  // ||Psi_n||_0, exact
  // Number of structurally nonzero rows: how many scalar observations the
  // operator actually produces. Equals nnz() for selection operators but not
  // for coded projections, where one row holds several code entries.
  long observation_count() const;

  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
  Eigen::VectorXd apply_transpose(const Eigen::VectorXd& y) const;
  // diag(Psi^T Psi), needed by the quadratic terms of Gibbs/VB.
  Eigen::VectorXd psi_t_psi_diag() const;
  // ||Psi x||^2 without materializing the product twice.
  double quad(const Eigen::VectorXd& x) const;
  // Channel weights at position r stacked across groups: for group g the
  // vector w_{g,r} in R^channels. Used to accumulate Psi^T Psi blocks.
  Eigen::MatrixXd dense() const;  // test oracle only
};

// CASSI shifted-code model: C_j(m,n) = base_mask(m+j-1, n). The base mask
// has nx + nl - 1 rows so every shift stays in range (measurement cropped
// to the valid region).
CodeCube make_cassi_code(const Eigen::MatrixXd& base_mask, int nl);

// Transmission response of the synthetic SLM: (voltage 0..255, channel) ->
// transmission in [0,1].
using SlmResponse = std::function<double(int voltage, int channel)>;

// Smooth per-channel sinusoid of voltage mapped into [0.08, 0.96].
SlmResponse default_slm_response(int nl);

// Per-pixel i.i.d. 8-bit voltage pattern from seed, mapped through the
// response curve: C_j(m,n) = response(v(m,n), j).
CodeCube make_slm_code(std::uint64_t seed, int nx, int ny, int nl,
                       const SlmResponse& response);

// M(m,n) = sum_j X_j(m,n) * C_j(m,n).
Measurement forward(const Datacube& cube, const CodeCube& code);

// Adds i.i.d. N(0, 1/alpha0) per measurement pixel; alpha0 <= 0 invalid,
// +inf means noiseless.
Measurement add_noise(const Measurement& m, double alpha0, std::uint64_t seed);

std::vector<PatchOperator> build_patch_operators(const CodeCube& code,
                                                 const PatchGrid& grid);

// Identity operator on an m-position, L-channel patch (denoising), with an
// optional per-position observation mask (inpainting; the mask zeroes whole
// pixels across channels).
PatchOperator identity_operator(int m, int channels);
PatchOperator masked_identity_operator(const Eigen::VectorXd& observed,
                                       int channels);

// RGB side information: augments each operator with an identity block over
// three extra channels and stacks the RGB patch vectors under the coded
// measurements. Signal dimension becomes P + 3 * m.
struct StackedModel {
  std::vector<PatchOperator> ops;
  Eigen::MatrixXd y;  // augmented measurement patches
};

StackedModel stack_side_info(const std::vector<PatchOperator>& ops,
                             const Eigen::MatrixXd& y,
                             const PatchSet& rgb_patches);

}  // namespace bcs

#endif
