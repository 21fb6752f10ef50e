#include "bcs/io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "bcs/errors.hpp"
#include "bcs/rng.hpp"

namespace bcs {

void write_cube(const std::string& path, const Datacube& cube) {
  cube.validate();
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("write_cube: cannot open " + path);
  f << "HSDC1\n";
  f << "dims " << cube.nx << " " << cube.ny << " " << cube.nl << "\n";
  f << "dtype f32le\n";
  if (cube.wavelengths) {
    f << "wavelengths";
    for (double w : *cube.wavelengths) f << " " << w;
    f << "\n";
  }
  f << "\n";
  std::vector<float> payload(cube.data.size());
  for (std::size_t i = 0; i < cube.data.size(); ++i)
    payload[i] = static_cast<float>(cube.data[i]);
  f.write(reinterpret_cast<const char*>(payload.data()),
          static_cast<std::streamsize>(payload.size() * sizeof(float)));
  if (!f) throw IoError("write_cube: write failed for " + path);
}

Datacube read_cube(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("read_cube: cannot open " + path);
  std::string line;
  if (!std::getline(f, line) || line != "HSDC1")
    throw IoError("read_cube: bad magic in " + path);
  int nx = 0, ny = 0, nl = 0;
  bool have_dims = false, have_dtype = false;
  std::vector<double> wavelengths;
  bool have_wl = false;
  while (std::getline(f, line) && !line.empty()) {
    std::istringstream is(line);
    std::string key;
    is >> key;
    if (key == "dims") {
      if (!(is >> nx >> ny >> nl) || nx < 1 || ny < 1 || nl < 1)
        throw IoError("read_cube: bad dims in " + path);
      have_dims = true;
    } else if (key == "dtype") {
      std::string dt;
      is >> dt;
      if (dt != "f32le")
        throw IoError("read_cube: unsupported dtype '" + dt + "'");
      have_dtype = true;
    } else if (key == "wavelengths") {
      double w;
      while (is >> w) wavelengths.push_back(w);
      have_wl = true;
    } else {
      throw IoError("read_cube: unknown header field '" + key + "'");
    }
  }
  if (!have_dims || !have_dtype)
    throw IoError("read_cube: incomplete header in " + path);
  if (have_wl && static_cast<int>(wavelengths.size()) != nl)
    throw IoError("read_cube: wavelength count does not match channels");
  Datacube cube(nx, ny, nl);
  if (have_wl) cube.wavelengths = wavelengths;
  std::vector<float> payload(cube.data.size());
  f.read(reinterpret_cast<char*>(payload.data()),
         static_cast<std::streamsize>(payload.size() * sizeof(float)));
  if (!f) throw IoError("read_cube: truncated payload in " + path);
  for (std::size_t i = 0; i < payload.size(); ++i)
    cube.data[i] = static_cast<double>(payload[i]);
  return cube;
}

namespace {

struct PngCloser {
  std::FILE* fp = nullptr;
  ~PngCloser() {
    if (fp) std::fclose(fp);
  }
};

}  // namespace

Datacube read_png_rgb(const std::string& path) {
  PngCloser fc;
  fc.fp = std::fopen(path.c_str(), "rb");
  if (!fc.fp) throw IoError("read_png_rgb: cannot open " + path);
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("read_png_rgb: libpng init failed");
  }
  std::vector<png_bytep> row_ptrs;
  std::vector<png_byte> pixels;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("read_png_rgb: failed to decode " + path);
  }
  png_init_io(png, fc.fp);
  png_read_info(png, info);
  const png_uint_32 width = png_get_image_width(png, info);
  const png_uint_32 height = png_get_image_height(png, info);
  // Normalize everything to 8-bit RGB.
  png_set_expand(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  if (png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY ||
      png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(png);
  png_read_update_info(png, info);
  if (png_get_rowbytes(png, info) != width * 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("read_png_rgb: " + path + " is not reducible to 8-bit RGB");
  }
  pixels.resize(static_cast<std::size_t>(height) * width * 3);
  row_ptrs.resize(height);
  for (png_uint_32 r = 0; r < height; ++r)
    row_ptrs[r] = pixels.data() + static_cast<std::size_t>(r) * width * 3;
  png_read_image(png, row_ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  Datacube cube(static_cast<int>(height), static_cast<int>(width), 3);
  for (int x = 0; x < cube.nx; ++x)
    for (int y = 0; y < cube.ny; ++y)
      for (int j = 0; j < 3; ++j)
        cube.at(x, y, j) = static_cast<double>(
            pixels[(static_cast<std::size_t>(x) * width + y) * 3 + j]);
  return cube;
}

void write_png_rgb(const std::string& path, const Datacube& cube) {
  if (cube.nl != 3)
    throw ValidationError("write_png_rgb: cube must have 3 channels");
  cube.validate();
  PngCloser fc;
  fc.fp = std::fopen(path.c_str(), "wb");
  if (!fc.fp) throw IoError("write_png_rgb: cannot open " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                            nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError("write_png_rgb: libpng init failed");
  }
  std::vector<png_byte> pixels(static_cast<std::size_t>(cube.nx) * cube.ny *
                               3);
  std::vector<png_bytep> row_ptrs(cube.nx);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("write_png_rgb: failed to encode " + path);
  }
  for (int x = 0; x < cube.nx; ++x) {
    row_ptrs[x] = pixels.data() + static_cast<std::size_t>(x) * cube.ny * 3;
    for (int y = 0; y < cube.ny; ++y)
      for (int j = 0; j < 3; ++j) {
        double v = std::round(cube.at(x, y, j));
        if (v < 0.0) v = 0.0;
        if (v > 255.0) v = 255.0;
        row_ptrs[x][y * 3 + j] = static_cast<png_byte>(v);
      }
  }
  png_init_io(png, fc.fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(cube.ny),
               static_cast<png_uint_32>(cube.nx), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, row_ptrs.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

RunConfig read_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("read_config: cannot open " + path);
  RunConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    // Trim.
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto e = line.find_last_not_of(" \t\r");
    line = line.substr(b, e - b + 1);
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw IoError("read_config: missing '=' at " + path + ":" +
                    std::to_string(lineno));
    auto trim = [](std::string s) {
      const auto b2 = s.find_first_not_of(" \t");
      if (b2 == std::string::npos) return std::string();
      const auto e2 = s.find_last_not_of(" \t");
      return s.substr(b2, e2 - b2 + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key.empty())
      throw IoError("read_config: empty key at " + path + ":" +
                    std::to_string(lineno));
    if (cfg.count(key))
      throw IoError("read_config: duplicate key '" + key + "' in " + path);
    cfg[key] = val;
  }
  return cfg;
}

void write_config(const std::string& path, const RunConfig& config) {
  std::ofstream f(path);
  if (!f) throw IoError("write_config: cannot open " + path);
  for (const auto& [k, v] : config) f << k << " = " << v << "\n";
  if (!f) throw IoError("write_config: write failed for " + path);
}

void write_trace_csv(const std::string& path,
                     const std::string& objective_name,
                     const std::vector<double>& objective,
                     const std::vector<double>& alpha0) {
  if (objective.size() != alpha0.size())
    throw ValidationError("write_trace_csv: column length mismatch");
  std::ofstream f(path);
  if (!f) throw IoError("write_trace_csv: cannot open " + path);
  f << "iteration," << objective_name << ",alpha0\n";
  f.precision(17);
  for (std::size_t i = 0; i < objective.size(); ++i)
    f << (i + 1) << "," << objective[i] << "," << alpha0[i] << "\n";
  if (!f) throw IoError("write_trace_csv: write failed for " + path);
}

Datacube synthetic_scene(int nx, int ny, int nl, std::uint64_t seed) {
  if (nx < 1 || ny < 1 || nl < 1)
    throw ValidationError("synthetic_scene: dims must be >= 1");
  Rng rng(seed);
  Datacube cube(nx, ny, nl);
  const int blobs = 6;
  const double smin = 0.10 * std::min(nx, ny);
  const double smax = 0.25 * std::min(nx, ny);
  for (int b = 0; b < blobs; ++b) {
    const double cx = rng.uniform() * (nx - 1);
    const double cy = rng.uniform() * (ny - 1);
    const double sp = smin + rng.uniform() * (smax - smin);
    const double amp = 0.4 + 0.6 * rng.uniform();
    const double cj = rng.uniform() * (nl - 1);
    const double sj = 0.75 + rng.uniform() * (0.5 * nl);
    for (int j = 0; j < nl; ++j) {
      const double spec =
          std::exp(-0.5 * (j - cj) * (j - cj) / (sj * sj));
      for (int x = 0; x < nx; ++x)
        for (int y = 0; y < ny; ++y) {
          const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
          cube.at(x, y, j) +=
              amp * spec * std::exp(-0.5 * d2 / (sp * sp));
        }
    }
  }
  const double peak = cube.max_abs();
  for (double& v : cube.data) v = 0.05 + 0.95 * v / peak;
  return cube;
}

}  // namespace bcs
