#include "bcs/randmath.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_sf_bessel.h>

#include <cmath>
#include <limits>

#include "bcs/errors.hpp"

namespace bcs {

namespace {

struct GslErrorsOff {
  GslErrorsOff() { gsl_set_error_handler_off(); }
};
const GslErrorsOff gsl_errors_off;

}  // namespace

double bessel_k(double p, double theta) {
  if (!(theta > 0.0)) throw ValidationError("bessel_k: theta must be > 0");
  gsl_sf_result res;
  const int status = gsl_sf_bessel_Knu_e(std::fabs(p), theta, &res);
  if (status == GSL_EUNDRFLW || (status == GSL_SUCCESS && res.val == 0.0))
    throw NumericalError("bessel_k: underflow; use bessel_k_scaled");
  if (status != GSL_SUCCESS)
    throw NumericalError("bessel_k: gsl failure, status " +
                         std::to_string(status));
  return res.val;
}

double bessel_k_scaled(double p, double theta) {
  if (!(theta > 0.0)) throw ValidationError("bessel_k: theta must be > 0");
  gsl_sf_result res;
  const int status = gsl_sf_bessel_Knu_scaled_e(std::fabs(p), theta, &res);
  if (status != GSL_SUCCESS)
    throw NumericalError("bessel_k_scaled: gsl failure, status " +
                         std::to_string(status));
  return res.val;
}

double sample_normal(Rng& rng) {
  const double u1 = rng.uniform_pos();
  const double u2 = rng.uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

namespace {

// Marsaglia-Tsang, shape >= 1, unit rate.
double gamma_mt(double shape, Rng& rng) {
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = sample_normal(rng);
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform_pos();
    if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
  }
}

}  // namespace

double sample_gamma(double shape, double rate, Rng& rng) {
  if (!(shape > 0.0) || !(rate > 0.0))
    throw ValidationError("sample_gamma: parameters must be > 0");
  if (shape >= 1.0) return gamma_mt(shape, rng) / rate;
  // Boost by one, then scale by U^{1/shape} in log space. For very small
  // shape the true draw underflows double range; clamp at the smallest
  // positive normal so the result stays strictly positive.
  const double g = gamma_mt(shape + 1.0, rng);
  const double logx =
      std::log(g) + std::log(rng.uniform_pos()) / shape - std::log(rate);
  const double x = std::exp(logx);
  return x > 0.0 ? x : std::numeric_limits<double>::min();
}

double sample_inverse_gaussian(double mu, double lambda, Rng& rng) {
  if (!(mu > 0.0) || !(lambda > 0.0))
    throw ValidationError("sample_inverse_gaussian: parameters must be > 0");
  const double v = sample_normal(rng);
  const double y = v * v;
  double x = mu + mu * mu * y / (2.0 * lambda) -
             mu / (2.0 * lambda) *
                 std::sqrt(4.0 * mu * lambda * y + mu * mu * y * y);
  if (!(x > 0.0)) x = std::numeric_limits<double>::min();
  const double u = rng.uniform();
  if (u <= mu / (mu + x)) return x;
  return mu * mu / x;
}

namespace {

// Two-parameter GIG: density propto x^{lam-1} exp(-(omega/2)(x + 1/x)),
// lam >= 0, omega > 0. log of the density shifted so the mode has value 0.
double gig2_logf(double x, double lam, double omega) {
  return (lam - 1.0) * std::log(x) - 0.5 * omega * (x + 1.0 / x);
}

double gig2_mode(double lam, double omega) {
  if (lam >= 1.0)
    return (std::sqrt((lam - 1.0) * (lam - 1.0) + omega * omega) + lam - 1.0) /
           omega;
  return omega /
         (std::sqrt((1.0 - lam) * (1.0 - lam) + omega * omega) + 1.0 - lam);
}

// Plain ratio-of-uniforms. Exact for all lam >= 0, omega > 0; efficient
// when lam < 1 and omega <= 1.
double gig2_rou(double lam, double omega, Rng& rng) {
  const double m = gig2_mode(lam, omega);
  const double lf_m = gig2_logf(m, lam, omega);
  // sup of x^2 f(x) is at the mode of the (lam+2) density.
  const double xp =
      (std::sqrt((lam + 1.0) * (lam + 1.0) + omega * omega) + lam + 1.0) /
      omega;
  const double vmax = xp * std::exp(0.5 * (gig2_logf(xp, lam, omega) - lf_m));
  for (;;) {
    const double u = rng.uniform_pos();
    const double v = rng.uniform() * vmax;
    const double x = v / u;
    if (2.0 * std::log(u) <= gig2_logf(x, lam, omega) - lf_m) return x;
  }
}

// Ratio-of-uniforms with mode shift; efficient when lam >= 1 or omega > 1.
double gig2_rou_shift(double lam, double omega, Rng& rng) {
  const double m = gig2_mode(lam, omega);
  const double lf_m = gig2_logf(m, lam, omega);
  // Roots of d/dx[(x-m)^2 f(x)] = 0:
  //   x^3 + a x^2 + b x + c = 0, one root in (0,m), one in (m,inf).
  const double a = -(2.0 * (lam + 1.0) / omega + m);
  const double b = 2.0 * (lam - 1.0) * m / omega - 1.0;
  const double c = m;
  // Trigonometric solution (three real roots).
  const double p = b - a * a / 3.0;
  const double q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
  const double phi = std::acos(std::clamp(
      -(q / 2.0) / std::sqrt(-(p * p * p) / 27.0), -1.0, 1.0));
  const double rad = 2.0 * std::sqrt(-p / 3.0);
  const double root1 = rad * std::cos(phi / 3.0) - a / 3.0;           // > m
  const double root2 = rad * std::cos(phi / 3.0 + 4.0 * M_PI / 3.0) - a / 3.0;
  const double xm = std::max(root2, std::numeric_limits<double>::min());
  const double vplus =
      (root1 - m) * std::exp(0.5 * (gig2_logf(root1, lam, omega) - lf_m));
  const double vminus =
      (xm - m) * std::exp(0.5 * (gig2_logf(xm, lam, omega) - lf_m));
  for (;;) {
    const double u = rng.uniform_pos();
    const double v = vminus + rng.uniform() * (vplus - vminus);
    const double x = m + v / u;
    if (x <= 0.0) continue;
    if (2.0 * std::log(u) <= gig2_logf(x, lam, omega) - lf_m) return x;
  }
}

double gig2(double lam, double omega, Rng& rng) {
  if (lam >= 1.0 || omega > 1.0) return gig2_rou_shift(lam, omega, rng);
  return gig2_rou(lam, omega, rng);
}

}  // namespace

double sample_gig(double a, double b, double p, Rng& rng) {
  if (a > 0.0 && b > 0.0) {
    const double omega = std::sqrt(a * b);
    const double scale = std::sqrt(b / a);
    if (p >= 0.0) return scale * gig2(p, omega, rng);
    return scale / gig2(-p, omega, rng);
  }
  if (a > 0.0 && b == 0.0 && p > 0.0) return sample_gamma(p, 0.5 * a, rng);
  if (a == 0.0 && b > 0.0 && p < 0.0)
    return 0.5 * b / sample_gamma(-p, 1.0, rng);  // inverse-gamma limit
  throw ValidationError("sample_gig: invalid parameter region");
}

double gig_mean(double a, double b, double p) {
  if (!(a > 0.0) || !(b > 0.0))
    throw ValidationError("gig_mean: needs a > 0, b > 0");
  const double omega = std::sqrt(a * b);
  return std::sqrt(b / a) * bessel_k_scaled(p + 1.0, omega) /
         bessel_k_scaled(p, omega);
}

double gig_mean_inv(double a, double b, double p) {
  if (!(a > 0.0) || !(b > 0.0))
    throw ValidationError("gig_mean_inv: needs a > 0, b > 0");
  const double omega = std::sqrt(a * b);
  return std::sqrt(a / b) * bessel_k_scaled(p - 1.0, omega) /
         bessel_k_scaled(p, omega);
}

BlockPrecision::BlockPrecision(int positions, int channels, double diag)
    : m_(positions), L_(channels) {
  if (positions < 1 || channels < 1)
    throw ValidationError("BlockPrecision: dimensions must be >= 1");
  blocks_.assign(m_, Eigen::MatrixXd::Identity(L_, L_) * diag);
}

void BlockPrecision::add_outer(int r, const Eigen::VectorXd& w, double c) {
  blocks_[r].selfadjointView<Eigen::Lower>().rankUpdate(w, c);
  blocks_[r] = blocks_[r].selfadjointView<Eigen::Lower>();
}

Eigen::VectorXd BlockPrecision::solve(const Eigen::VectorXd& rhs) const {
  Eigen::VectorXd x(dim());
  Eigen::VectorXd local(L_);
  for (int r = 0; r < m_; ++r) {
    for (int j = 0; j < L_; ++j) local[j] = rhs[j * m_ + r];
    Eigen::LLT<Eigen::MatrixXd> llt(blocks_[r]);
    if (llt.info() != Eigen::Success)
      throw NumericalError("BlockPrecision: block not positive definite");
    local = llt.solve(local);
    for (int j = 0; j < L_; ++j) x[j * m_ + r] = local[j];
  }
  return x;
}

Eigen::VectorXd BlockPrecision::sample(const Eigen::VectorXd& rhs,
                                       Rng& rng) const {
  Eigen::VectorXd x(dim());
  Eigen::VectorXd local(L_), xi(L_);
  for (int r = 0; r < m_; ++r) {
    for (int j = 0; j < L_; ++j) local[j] = rhs[j * m_ + r];
    Eigen::LLT<Eigen::MatrixXd> llt(blocks_[r]);
    if (llt.info() != Eigen::Success)
      throw NumericalError("BlockPrecision: block not positive definite");
    local = llt.solve(local);  // conditional mean
    for (int j = 0; j < L_; ++j) xi[j] = sample_normal(rng);
    // If precision = L L^T then L^-T xi ~ N(0, precision^-1).
    llt.matrixU().solveInPlace(xi);
    local += xi;
    for (int j = 0; j < L_; ++j) x[j * m_ + r] = local[j];
  }
  return x;
}

Eigen::VectorXd BlockPrecision::diagonal_of_inverse() const {
  Eigen::VectorXd d(dim());
  for (int r = 0; r < m_; ++r) {
    Eigen::LLT<Eigen::MatrixXd> llt(blocks_[r]);
    if (llt.info() != Eigen::Success)
      throw NumericalError("BlockPrecision: block not positive definite");
    const Eigen::MatrixXd inv =
        llt.solve(Eigen::MatrixXd::Identity(L_, L_));
    for (int j = 0; j < L_; ++j) d[j * m_ + r] = inv(j, j);
  }
  return d;
}

Eigen::MatrixXd BlockPrecision::dense() const {
  Eigen::MatrixXd full = Eigen::MatrixXd::Zero(dim(), dim());
  for (int r = 0; r < m_; ++r)
    for (int j = 0; j < L_; ++j)
      for (int i = 0; i < L_; ++i)
        full(j * m_ + r, i * m_ + r) = blocks_[r](j, i);
  return full;
}

}  // namespace bcs
