#include "bcs/core.hpp"

#include <cmath>

#include "bcs/errors.hpp"

namespace bcs {

Eigen::MatrixXd Datacube::channel(int j) const {
  Eigen::MatrixXd out(nx, ny);
  for (int x = 0; x < nx; ++x)
    for (int y = 0; y < ny; ++y) out(x, y) = at(x, y, j);
  return out;
}

void Datacube::set_channel(int j, const Eigen::MatrixXd& slice) {
  if (slice.rows() != nx || slice.cols() != ny)
    throw ValidationError("set_channel: slice dims mismatch");
  for (int x = 0; x < nx; ++x)
    for (int y = 0; y < ny; ++y) at(x, y, j) = slice(x, y);
}

double Datacube::max_abs() const {
  double m = 0.0;
  for (double v : data) m = std::max(m, std::fabs(v));
  return m;
}

void Datacube::validate() const {
  if (nx < 1 || ny < 1 || nl < 1)
    throw ValidationError("Datacube: all dimensions must be >= 1");
  if (data.size() != static_cast<std::size_t>(nx) * ny * nl)
    throw ValidationError("Datacube: storage size inconsistent with dims");
  for (double v : data)
    if (!std::isfinite(v)) throw ValidationError("Datacube: non-finite entry");
}

namespace {

std::vector<int> clamped_starts(int image, int patch, int stride) {
  std::vector<int> starts;
  for (int s = 0; s + patch <= image; s += stride) starts.push_back(s);
  if (starts.empty() || starts.back() != image - patch)
    starts.push_back(image - patch);
  return starts;
}

}  // namespace

PatchGrid make_grid(int image_h, int image_w, int patch_h, int patch_w,
                    int stride_h, int stride_w) {
  if (patch_h < 1 || patch_w < 1 || stride_h < 1 || stride_w < 1)
    throw ValidationError("make_grid: patch and stride must be >= 1");
  if (patch_h > image_h || patch_w > image_w)
    throw ValidationError("make_grid: patch larger than image");
  PatchGrid g;
  g.patch_h = patch_h;
  g.patch_w = patch_w;
  g.stride_h = stride_h;
  g.stride_w = stride_w;
  g.image_h = image_h;
  g.image_w = image_w;
  const auto rows = clamped_starts(image_h, patch_h, stride_h);
  const auto cols = clamped_starts(image_w, patch_w, stride_w);
  g.origins.reserve(rows.size() * cols.size());
  for (int r : rows)
    for (int c : cols) g.origins.emplace_back(r, c);
  return g;
}

PatchSet extract_patches(const Datacube& cube, const PatchGrid& grid) {
  if (grid.image_h != cube.nx || grid.image_w != cube.ny)
    throw ValidationError("extract_patches: grid dims mismatch cube");
  const int m = grid.area();
  const int P = m * cube.nl;
  PatchSet ps;
  ps.grid = grid;
  ps.channels = cube.nl;
  ps.vectors.resize(P, grid.count());
  for (int n = 0; n < grid.count(); ++n) {
    const auto [r0, c0] = grid.origins[n];
    for (int j = 0; j < cube.nl; ++j)
      for (int a = 0; a < grid.patch_h; ++a)
        for (int b = 0; b < grid.patch_w; ++b)
          ps.vectors(j * m + a * grid.patch_w + b, n) =
              cube.at(r0 + a, c0 + b, j);
  }
  return ps;
}

PatchSet extract_patches(const Datacube& cube, int patch_h, int patch_w,
                         int stride_h, int stride_w) {
  return extract_patches(
      cube, make_grid(cube.nx, cube.ny, patch_h, patch_w, stride_h, stride_w));
}

Datacube reassemble(const PatchSet& patches) {
  const PatchGrid& g = patches.grid;
  const int m = g.area();
  if (patches.vectors.rows() != static_cast<long>(m) * patches.channels ||
      patches.vectors.cols() != g.count())
    throw ValidationError("reassemble: vectors inconsistent with grid");
  Datacube out(g.image_h, g.image_w, patches.channels);
  std::vector<double> count(static_cast<std::size_t>(g.image_h) * g.image_w,
                            0.0);
  for (int n = 0; n < g.count(); ++n) {
    const auto [r0, c0] = g.origins[n];
    for (int j = 0; j < patches.channels; ++j)
      for (int a = 0; a < g.patch_h; ++a)
        for (int b = 0; b < g.patch_w; ++b)
          out.at(r0 + a, c0 + b, j) +=
              patches.vectors(j * m + a * g.patch_w + b, n);
    for (int a = 0; a < g.patch_h; ++a)
      for (int b = 0; b < g.patch_w; ++b)
        count[static_cast<std::size_t>(r0 + a) * g.image_w + c0 + b] += 1.0;
  }
  for (int x = 0; x < g.image_h; ++x)
    for (int y = 0; y < g.image_w; ++y) {
      const double c = count[static_cast<std::size_t>(x) * g.image_w + y];
      if (c == 0.0)
        throw ValidationError("reassemble: uncovered pixel");
      for (int j = 0; j < patches.channels; ++j) out.at(x, y, j) /= c;
    }
  return out;
}

Eigen::MatrixXd extract_image_patches(const Eigen::MatrixXd& image,
                                      const PatchGrid& grid) {
  if (grid.image_h != image.rows() || grid.image_w != image.cols())
    throw ValidationError("extract_image_patches: grid dims mismatch image");
  Eigen::MatrixXd out(grid.area(), grid.count());
  for (int n = 0; n < grid.count(); ++n) {
    const auto [r0, c0] = grid.origins[n];
    for (int a = 0; a < grid.patch_h; ++a)
      for (int b = 0; b < grid.patch_w; ++b)
        out(a * grid.patch_w + b, n) = image(r0 + a, c0 + b);
  }
  return out;
}

}  // namespace bcs
