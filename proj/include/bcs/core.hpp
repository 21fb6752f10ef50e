#ifndef BCS_CORE_HPP
#define BCS_CORE_HPP

#include <Eigen/Dense>
#include <optional>
#include <utility>
#include <vector>

namespace bcs {

// 3D array of spectral radiance, N_x x N_y x N_lambda.
// Storage is channel-outermost, spatial row-major:
//   index(x, y, j) = j * (nx * ny) + x * ny + y.
struct Datacube {
  int nx = 0, ny = 0, nl = 0;
  std::vector<double> data;
  std::optional<std::vector<double>> wavelengths;  // nm, per channel

  Datacube() = default;
  Datacube(int nx_, int ny_, int nl_)
      : nx(nx_), ny(ny_), nl(nl_),
        data(static_cast<std::size_t>(nx_) * ny_ * nl_, 0.0) {}

  double& at(int x, int y, int j) {
    return data[static_cast<std::size_t>(j) * nx * ny +
                static_cast<std::size_t>(x) * ny + y];
  }
  double at(int x, int y, int j) const {
    return data[static_cast<std::size_t>(j) * nx * ny +
                static_cast<std::size_t>(x) * ny + y];
  }

  // Channel j as an nx x ny matrix view copy.
  Eigen::MatrixXd channel(int j) const;
  void set_channel(int j, const Eigen::MatrixXd& slice);
  double max_abs() const;
  void validate() const;  // dims >= 1, all entries finite
};

// Overlapping patch grid with edge-clamped origins: the last row/column of
// origins is pulled back to the border so every pixel is covered.
struct PatchGrid {
  int patch_h = 0, patch_w = 0;
  int stride_h = 0, stride_w = 0;
  int image_h = 0, image_w = 0;
  std::vector<std::pair<int, int>> origins;  // (row, col) top-left corners

  int count() const { return static_cast<int>(origins.size()); }
  int area() const { return patch_h * patch_w; }
};

PatchGrid make_grid(int image_h, int image_w, int patch_h, int patch_w,
                    int stride_h, int stride_w);

// Vectorized patches: column n is patch n, length P = patch_h*patch_w*nl.
// Within a patch the order mirrors Datacube storage: channel-outermost,
// spatial row-major, so entry index = j * area + a * patch_w + b for
// patch-local position (a, b) and channel j.
struct PatchSet {
  Eigen::MatrixXd vectors;  // P x N
  PatchGrid grid;
  int channels = 0;

  int patch_dim() const { return grid.area() * channels; }
};

PatchSet extract_patches(const Datacube& cube, int patch_h, int patch_w,
                         int stride_h, int stride_w);
PatchSet extract_patches(const Datacube& cube, const PatchGrid& grid);

// Overlap-averaged reassembly; exact inverse of extract_patches.
Datacube reassemble(const PatchSet& patches);

// Extract 2D patches of a measurement image on a grid (channels = 1).
Eigen::MatrixXd extract_image_patches(const Eigen::MatrixXd& image,
                                      const PatchGrid& grid);

}  // namespace bcs

#endif
