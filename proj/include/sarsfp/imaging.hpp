#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sarsfp/raytracer.hpp"
#include "sarsfp/scene.hpp"

namespace sarsfp {

struct ImageGrid {
    int n_azimuth = 128;
    int n_range = 128;
    double azimuth_min = -1.0, azimuth_max = 1.0;
    double range_min = 0.0, range_max = 1.0;
};

void validate_grid(const ImageGrid& grid);

// Grid matching sensor_for_scene: azimuth window centered on the scene,
// slant-range window centered on the sensor distance.
ImageGrid grid_for_scene(const Scene& scene, double sensor_distance, int n_pixels = 128);

struct SarImage {
    ImageGrid grid;
    std::vector<double> pixels;  // row-major, azimuth-major
    bool normalized = false;

    double& at(int ia, int ir) { return pixels[static_cast<std::size_t>(ia) * grid.n_range + ir]; }
    double at(int ia, int ir) const {
        return pixels[static_cast<std::size_t>(ia) * grid.n_range + ir];
    }
};

struct FocusStats {
    std::size_t dropped_count = 0;
    double dropped_intensity = 0.0;
};

SarImage focus(const std::vector<EchoSample>& echoes, const ImageGrid& grid,
               FocusStats* stats = nullptr);

// Multiplicative unit-mean exponential speckle, seeded per image.
SarImage add_speckle(const SarImage& image, std::uint64_t seed, bool enabled);

SarImage normalize(const SarImage& image, double scale_cap);

void write_image(const SarImage& image, const std::string& path);
SarImage read_image(const std::string& path);

}  // namespace sarsfp
