#ifndef BCS_EVALKIT_HPP
#define BCS_EVALKIT_HPP

#include <string>
#include <vector>

#include "bcs/core.hpp"

namespace bcs {

// Axis-aligned rectangle of spatial pixels, inclusive origin, half-open end.
struct Region {
  int x0 = 0, y0 = 0, w = 0, h = 0;
  std::string name;
};

struct EvalReport {
  std::vector<double> psnr_per_channel;  // dB
  double psnr_mean = 0.0, psnr_std = 0.0;
  bool psnr_infinite = false;  // reconstruction exactly equals truth
  std::vector<double> spectral_corr;  // one per region
  std::vector<Region> regions;

  std::string summary() const;  // "mean±std" formatting
};

// Per-channel PSNR_j = 10 log10(peak^2 / MSE_j); peak <= 0 selects
// max(truth). Channels with zero error are flagged infinite and excluded
// from the mean/std.
EvalReport psnr(const Datacube& recon, const Datacube& truth,
                double peak = 0.0);

// Pearson correlation of the region-averaged spectra of the two cubes.
double spectral_correlation(const Datacube& recon, const Datacube& truth,
                            const Region& region);

}  // namespace bcs

#endif
