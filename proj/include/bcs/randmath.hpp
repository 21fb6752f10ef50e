#ifndef BCS_RANDMATH_HPP
#define BCS_RANDMATH_HPP

#include <Eigen/Dense>
#include <vector>

#include "bcs/rng.hpp"

namespace bcs {

// Modified Bessel function of the second kind K_p(theta), symmetric in p.
// Valid for theta in (0, ~700]; throws NumericalError on underflow range.
double bessel_k(double p, double theta);

// exp(theta) * K_p(theta); safe for large theta, used for moment ratios.
double bessel_k_scaled(double p, double theta);

// Standard normal draw (Box-Muller, no cached second value).
double sample_normal(Rng& rng);

// Gamma draw, shape-rate convention. Robust down to shape ~1e-6: for
// shape < 1 the draw is formed in log space and clamped to the smallest
// positive normal double so it never collapses to zero.
double sample_gamma(double shape, double rate, Rng& rng);

// Inverse-Gaussian draw with mean mu, shape lambda
// (Michael-Schucany-Haas transform).
double sample_inverse_gaussian(double mu, double lambda, Rng& rng);

// Generalized inverse Gaussian draw from the density
//   f(x) propto x^{p-1} exp(-(a x + b / x) / 2).
// Valid regions: a>0,b>0 (any p); b=0,p>0 (gamma limit); a=0,p<0
// (inverse-gamma limit). Exact rejection sampling (ratio-of-uniforms,
// mode-shifted where efficient).
double sample_gig(double a, double b, double p, Rng& rng);

// Analytic GIG moments via Bessel ratios: E[x] and E[1/x].
double gig_mean(double a, double b, double p);
double gig_mean_inv(double a, double b, double p);

// Precision matrix of the form  base * I + sum_i c_i Psi_i^T Psi_i  where
// each Psi_i^T Psi_i couples, for every spatial position r, only the
// channel entries {j*m + r : j}. Stored as m dense LxL blocks, so exact
// multivariate normal draws cost O(m L^3) instead of a dense (mL)^3
// factorization.
class BlockPrecision {
 public:
  BlockPrecision(int positions, int channels, double diag);

  int positions() const { return m_; }
  int channels() const { return L_; }
  int dim() const { return m_ * L_; }

  // Block for spatial position r; symmetric LxL, caller accumulates.
  Eigen::MatrixXd& block(int r) { return blocks_[r]; }
  const Eigen::MatrixXd& block(int r) const { return blocks_[r]; }

  // Rank-one update w w^T * c at position r (w has one entry per channel).
  void add_outer(int r, const Eigen::VectorXd& w, double c);

  // Solve (precision) x = rhs. Layout: index = channel * m + position.
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;

  // Exact draw from N(precision^-1 rhs, precision^-1).
  Eigen::VectorXd sample(const Eigen::VectorXd& rhs, Rng& rng) const;

  // Diagonal of precision^-1 (per-coordinate posterior variances for VB).
  Eigen::VectorXd diagonal_of_inverse() const;

  // Dense assembly, test oracle only.
  Eigen::MatrixXd dense() const;

 private:
  int m_, L_;
  std::vector<Eigen::MatrixXd> blocks_;
};

}  // namespace bcs

#endif
