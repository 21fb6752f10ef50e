#include "bcs/sensing.hpp"

#include <cmath>

#include "bcs/errors.hpp"
#include "bcs/randmath.hpp"

namespace bcs {

void CodeCube::validate() const {
  codes.validate();
  for (double v : codes.data)
    if (v < 0.0 || v > 1.0)
      throw ValidationError("CodeCube: entries must lie in [0,1]");
}

long PatchOperator::nnz() const {
  long count = 0;
  for (const auto& g : groups)
    count += (g.array() != 0.0).count();
  return count;
}

long PatchOperator::observation_count() const {
  long count = 0;
  for (const auto& g : groups)
    for (int r = 0; r < g.rows(); ++r)
      if ((g.row(r).array() != 0.0).any()) ++count;
  return count;
}

Eigen::VectorXd PatchOperator::apply(const Eigen::VectorXd& x) const {
  if (x.size() != signal_dim())
    throw ValidationError("PatchOperator::apply: length mismatch");
  Eigen::VectorXd y(rows());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const Eigen::MatrixXd& W = groups[g];
    for (int r = 0; r < m; ++r) {
      double acc = 0.0;
      for (int j = 0; j < channels; ++j) acc += W(r, j) * x[j * m + r];
      y[static_cast<int>(g) * m + r] = acc;
    }
  }
  return y;
}

Eigen::VectorXd PatchOperator::apply_transpose(const Eigen::VectorXd& y) const {
  if (y.size() != rows())
    throw ValidationError("PatchOperator::apply_transpose: length mismatch");
  Eigen::VectorXd x = Eigen::VectorXd::Zero(signal_dim());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const Eigen::MatrixXd& W = groups[g];
    for (int r = 0; r < m; ++r) {
      const double v = y[static_cast<int>(g) * m + r];
      for (int j = 0; j < channels; ++j) x[j * m + r] += W(r, j) * v;
    }
  }
  return x;
}

Eigen::VectorXd PatchOperator::psi_t_psi_diag() const {
  Eigen::VectorXd d = Eigen::VectorXd::Zero(signal_dim());
  for (const auto& W : groups)
    for (int r = 0; r < m; ++r)
      for (int j = 0; j < channels; ++j)
        d[j * m + r] += W(r, j) * W(r, j);
  return d;
}

double PatchOperator::quad(const Eigen::VectorXd& x) const {
  return apply(x).squaredNorm();
}

Eigen::MatrixXd PatchOperator::dense() const {
  Eigen::MatrixXd full = Eigen::MatrixXd::Zero(rows(), signal_dim());
  for (std::size_t g = 0; g < groups.size(); ++g)
    for (int r = 0; r < m; ++r)
      for (int j = 0; j < channels; ++j)
        full(static_cast<int>(g) * m + r, j * m + r) = groups[g](r, j);
  return full;
}

CodeCube make_cassi_code(const Eigen::MatrixXd& base_mask, int nl) {
  if (nl < 1) throw ValidationError("make_cassi_code: nl must be >= 1");
  const int nx = static_cast<int>(base_mask.rows()) - nl + 1;
  if (nx < 1)
    throw ValidationError("make_cassi_code: base mask too small for shifts");
  if ((base_mask.array() < 0.0).any() || (base_mask.array() > 1.0).any())
    throw ValidationError("make_cassi_code: mask entries must be in [0,1]");
  CodeCube code;
  code.kind = CodeKind::cassi_shift;
  code.codes = Datacube(nx, static_cast<int>(base_mask.cols()), nl);
  for (int j = 0; j < nl; ++j)
    for (int x = 0; x < nx; ++x)
      for (int y = 0; y < base_mask.cols(); ++y)
        code.codes.at(x, y, j) = base_mask(x + j, y);
  return code;
}

SlmResponse default_slm_response(int nl) {
  // Stand-in for a calibrated liquid-crystal response: a smooth sinusoid of
  // voltage whose phase drifts with wavelength channel, mapped into the
  // measured transmission range [0.08, 0.96].
  return [nl](int voltage, int channel) {
    const double v = voltage / 255.0;
    const double phase = 2.0 * M_PI * (1.5 * v + 0.35 * channel / std::max(nl, 1));
    return 0.08 + (0.96 - 0.08) * 0.5 * (1.0 + std::sin(phase));
  };
}

CodeCube make_slm_code(std::uint64_t seed, int nx, int ny, int nl,
                       const SlmResponse& response) {
  if (nx < 1 || ny < 1 || nl < 1)
    throw ValidationError("make_slm_code: dims must be >= 1");
  CodeCube code;
  code.kind = CodeKind::slm;
  code.codes = Datacube(nx, ny, nl);
  Rng rng(seed);
  for (int x = 0; x < nx; ++x)
    for (int y = 0; y < ny; ++y) {
      const int v = static_cast<int>(rng() & 0xff);
      for (int j = 0; j < nl; ++j) {
        const double t = response(v, j);
        if (!(t >= 0.0 && t <= 1.0))
          throw ValidationError("make_slm_code: response outside [0,1]");
        code.codes.at(x, y, j) = t;
      }
    }
  return code;
}

Measurement forward(const Datacube& cube, const CodeCube& code) {
  if (cube.nx != code.codes.nx || cube.ny != code.codes.ny ||
      cube.nl != code.codes.nl)
    throw ValidationError("forward: cube/code dims mismatch");
  Measurement m;
  m.image = Eigen::MatrixXd::Zero(cube.nx, cube.ny);
  for (int j = 0; j < cube.nl; ++j)
    for (int x = 0; x < cube.nx; ++x)
      for (int y = 0; y < cube.ny; ++y)
        m.image(x, y) += cube.at(x, y, j) * code.codes.at(x, y, j);
  return m;
}

Measurement add_noise(const Measurement& m, double alpha0,
                      std::uint64_t seed) {
  if (!(alpha0 > 0.0)) throw ValidationError("add_noise: alpha0 must be > 0");
  Measurement out = m;
  out.noise_precision_true = alpha0;
  if (std::isinf(alpha0)) return out;  // noiseless flag
  const double sigma = 1.0 / std::sqrt(alpha0);
  Rng rng(seed);
  for (int x = 0; x < out.image.rows(); ++x)
    for (int y = 0; y < out.image.cols(); ++y)
      out.image(x, y) += sigma * sample_normal(rng);
  return out;
}

std::vector<PatchOperator> build_patch_operators(const CodeCube& code,
                                                 const PatchGrid& grid) {
  if (grid.image_h != code.codes.nx || grid.image_w != code.codes.ny)
    throw ValidationError("build_patch_operators: grid/code dims mismatch");
  std::vector<PatchOperator> ops;
  ops.reserve(grid.count());
  for (int n = 0; n < grid.count(); ++n) {
    const auto [r0, c0] = grid.origins[n];
    PatchOperator op;
    op.m = grid.area();
    op.channels = code.codes.nl;
    Eigen::MatrixXd W(op.m, op.channels);
    for (int j = 0; j < op.channels; ++j)
      for (int a = 0; a < grid.patch_h; ++a)
        for (int b = 0; b < grid.patch_w; ++b)
          W(a * grid.patch_w + b, j) = code.codes.at(r0 + a, c0 + b, j);
    op.groups.push_back(std::move(W));
    ops.push_back(std::move(op));
  }
  return ops;
}

PatchOperator identity_operator(int m, int channels) {
  PatchOperator op;
  op.m = m;
  op.channels = channels;
  for (int g = 0; g < channels; ++g) {
    Eigen::MatrixXd W = Eigen::MatrixXd::Zero(m, channels);
    W.col(g).setOnes();
    op.groups.push_back(std::move(W));
  }
  return op;
}

PatchOperator masked_identity_operator(const Eigen::VectorXd& observed,
                                       int channels) {
  PatchOperator op;
  op.m = static_cast<int>(observed.size());
  op.channels = channels;
  for (int g = 0; g < channels; ++g) {
    Eigen::MatrixXd W = Eigen::MatrixXd::Zero(op.m, channels);
    W.col(g) = observed;
    op.groups.push_back(std::move(W));
  }
  return op;
}

StackedModel stack_side_info(const std::vector<PatchOperator>& ops,
                             const Eigen::MatrixXd& y,
                             const PatchSet& rgb_patches) {
  if (ops.empty()) throw ValidationError("stack_side_info: empty operators");
  if (rgb_patches.channels != 3)
    throw ValidationError("stack_side_info: side patches must have 3 channels");
  const int m = ops.front().m;
  if (rgb_patches.grid.area() != m ||
      rgb_patches.vectors.cols() != static_cast<long>(ops.size()))
    throw ValidationError(
        "stack_side_info: RGB patch grid not registered to measurement grid");
  if (y.cols() != static_cast<long>(ops.size()))
    throw ValidationError("stack_side_info: measurement count mismatch");

  StackedModel out;
  out.ops.reserve(ops.size());
  const int Lh = ops.front().channels;
  const int L = Lh + 3;
  for (const auto& op : ops) {
    PatchOperator aug;
    aug.m = m;
    aug.channels = L;
    for (const auto& W : op.groups) {
      Eigen::MatrixXd Wa = Eigen::MatrixXd::Zero(m, L);
      Wa.leftCols(Lh) = W;
      aug.groups.push_back(std::move(Wa));
    }
    for (int c = 0; c < 3; ++c) {
      Eigen::MatrixXd Wa = Eigen::MatrixXd::Zero(m, L);
      Wa.col(Lh + c).setOnes();
      aug.groups.push_back(std::move(Wa));
    }
    out.ops.push_back(std::move(aug));
  }
  out.y.resize(y.rows() + 3 * m, y.cols());
  out.y.topRows(y.rows()) = y;
  out.y.bottomRows(3 * m) = rgb_patches.vectors;
  return out;
}

}  // namespace bcs
