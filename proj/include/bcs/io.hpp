#ifndef BCS_IO_HPP
#define BCS_IO_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "bcs/core.hpp"

namespace bcs {

// Datacube container: text header (magic "HSDC1", dims, dtype f32le,
// optional wavelengths), a blank line, then the payload as little-endian
// 32-bit floats in cube storage order (channel-outermost, spatial
// row-major).
void write_cube(const std::string& path, const Datacube& cube);
Datacube read_cube(const std::string& path);

// 8-bit RGB PNG <-> Datacube with nl = 3 and values in [0, 255].
Datacube read_png_rgb(const std::string& path);
void write_png_rgb(const std::string& path, const Datacube& cube);

// Flat key=value run configuration. '#' starts a comment; keys are unique.
using RunConfig = std::map<std::string, std::string>;

RunConfig read_config(const std::string& path);
void write_config(const std::string& path, const RunConfig& config);

// Trace CSV: "iteration,<objective_name>,alpha0" header plus one row per
// iteration.
void write_trace_csv(const std::string& path,
                     const std::string& objective_name,
                     const std::vector<double>& objective,
                     const std::vector<double>& alpha0);

// Seeded smooth test scene: Gaussian blobs with smooth spectra, values in
// [0, 1].
Datacube synthetic_scene(int nx, int ny, int nl, std::uint64_t seed);

}  // namespace bcs

#endif
