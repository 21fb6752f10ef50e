#include "bcs/evalkit.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "bcs/errors.hpp"

namespace bcs {

std::string EvalReport::summary() const {
  std::ostringstream os;
  if (psnr_infinite && psnr_per_channel.empty()) {
    os << "inf (exact)";
  } else {
    os.setf(std::ios::fixed);
    os.precision(4);
    os << psnr_mean << "±" << psnr_std;
    if (psnr_infinite) os << " (some channels exact)";
  }
  return os.str();
}

EvalReport psnr(const Datacube& recon, const Datacube& truth, double peak) {
  if (recon.nx != truth.nx || recon.ny != truth.ny || recon.nl != truth.nl)
    throw ValidationError("psnr: dimension mismatch");
  truth.validate();
  recon.validate();
  if (peak <= 0.0) peak = truth.max_abs();
  if (!(peak > 0.0)) throw ValidationError("psnr: peak must be > 0");

  EvalReport rep;
  const double area = static_cast<double>(truth.nx) * truth.ny;
  std::vector<double> finite;
  for (int j = 0; j < truth.nl; ++j) {
    double mse = 0.0;
    for (int x = 0; x < truth.nx; ++x)
      for (int y = 0; y < truth.ny; ++y) {
        const double e = recon.at(x, y, j) - truth.at(x, y, j);
        mse += e * e;
      }
    mse /= area;
    if (mse == 0.0) {
      rep.psnr_infinite = true;
      rep.psnr_per_channel.push_back(
          std::numeric_limits<double>::infinity());
    } else {
      const double db = 10.0 * std::log10(peak * peak / mse);
      rep.psnr_per_channel.push_back(db);
      finite.push_back(db);
    }
  }
  if (!finite.empty()) {
    double mean = 0.0;
    for (double v : finite) mean += v;
    mean /= static_cast<double>(finite.size());
    double var = 0.0;
    for (double v : finite) var += (v - mean) * (v - mean);
    var /= static_cast<double>(finite.size());
    rep.psnr_mean = mean;
    rep.psnr_std = std::sqrt(var);
  } else {
    rep.psnr_mean = std::numeric_limits<double>::infinity();
    rep.psnr_std = 0.0;
  }
  return rep;
}

double spectral_correlation(const Datacube& recon, const Datacube& truth,
                            const Region& region) {
  if (recon.nx != truth.nx || recon.ny != truth.ny || recon.nl != truth.nl)
    throw ValidationError("spectral_correlation: dimension mismatch");
  if (region.w < 1 || region.h < 1 || region.x0 < 0 || region.y0 < 0 ||
      region.x0 + region.h > truth.nx || region.y0 + region.w > truth.ny)
    throw ValidationError("spectral_correlation: region '" + region.name +
                          "' out of bounds");
  const int nl = truth.nl;
  Eigen::VectorXd a(nl), b(nl);
  const double npix = static_cast<double>(region.w) * region.h;
  for (int j = 0; j < nl; ++j) {
    double sa = 0.0, sb = 0.0;
    for (int x = region.x0; x < region.x0 + region.h; ++x)
      for (int y = region.y0; y < region.y0 + region.w; ++y) {
        sa += recon.at(x, y, j);
        sb += truth.at(x, y, j);
      }
    a[j] = sa / npix;
    b[j] = sb / npix;
  }
  const Eigen::VectorXd ca = a.array() - a.mean();
  const Eigen::VectorXd cb = b.array() - b.mean();
  const double na = ca.norm(), nb = cb.norm();
  if (na == 0.0 || nb == 0.0)
    throw ValidationError(
        "spectral_correlation: constant mean spectrum, correlation undefined");
  double corr = ca.dot(cb) / (na * nb);
  if (corr > 1.0) corr = 1.0;
  if (corr < -1.0) corr = -1.0;
  return corr;
}

}  // namespace bcs
