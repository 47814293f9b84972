#include "sarsfp/imaging.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "sarsfp/errors.hpp"
#include "sarsfp/rng.hpp"

namespace sarsfp {

void validate_grid(const ImageGrid& grid) {
    if (grid.n_azimuth < 8 || grid.n_range < 8)
        throw ValidationError("image grid must have at least 8 pixels per axis");
    if (!(grid.azimuth_min < grid.azimuth_max) || !(grid.range_min < grid.range_max))
        throw ValidationError("image grid extents must be strictly ordered");
}

ImageGrid grid_for_scene(const Scene& scene, double sensor_distance, int n_pixels) {
    ImageGrid grid;
    grid.n_azimuth = n_pixels;
    grid.n_range = n_pixels;
    const double half = 1.5 * scene.ground_extent;
    grid.azimuth_min = -half;
    grid.azimuth_max = half;
    grid.range_min = sensor_distance - half;
    grid.range_max = sensor_distance + half;
    return grid;
}

SarImage focus(const std::vector<EchoSample>& echoes, const ImageGrid& grid, FocusStats* stats) {
    validate_grid(grid);
    SarImage image;
    image.grid = grid;
    image.pixels.assign(static_cast<std::size_t>(grid.n_azimuth) * grid.n_range, 0.0);
    FocusStats local;
    const double az_scale = grid.n_azimuth / (grid.azimuth_max - grid.azimuth_min);
    const double r_scale = grid.n_range / (grid.range_max - grid.range_min);
    for (const EchoSample& e : echoes) {
        const int ia = static_cast<int>(std::floor((e.a - grid.azimuth_min) * az_scale));
        const int ir = static_cast<int>(std::floor((e.r - grid.range_min) * r_scale));
        if (ia < 0 || ia >= grid.n_azimuth || ir < 0 || ir >= grid.n_range) {
            ++local.dropped_count;
            local.dropped_intensity += e.intensity;
            continue;
        }
        image.at(ia, ir) += e.intensity;
    }
    if (stats) *stats = local;
    return image;
}

SarImage add_speckle(const SarImage& image, std::uint64_t seed, bool enabled) {
    if (image.normalized) throw ValidationError("add_speckle requires a pre-normalization image");
    if (!enabled) return image;
    SarImage out = image;
    Rng rng(derive_seed(seed, "speckle"));
    for (double& p : out.pixels) p *= rng.exponential();
    return out;
}

SarImage normalize(const SarImage& image, double scale_cap) {
    if (image.normalized) throw ValidationError("image is already normalized");
    if (!(scale_cap > 0.0)) throw ValidationError("scale_cap must be positive");
    SarImage out = image;
    for (double& p : out.pixels) p = std::min(p, scale_cap) / scale_cap;
    out.normalized = true;
    return out;
}

void write_image(const SarImage& image, const std::string& path) {
    if (!image.normalized) throw ValidationError("write_image requires a normalized image");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write image file: " + path);
    out << "P5\n" << image.grid.n_range << " " << image.grid.n_azimuth << "\n65535\n";
    std::vector<unsigned char> buf;
    buf.reserve(image.pixels.size() * 2);
    for (double p : image.pixels) {
        const auto v = static_cast<std::uint16_t>(std::lround(clamp01(p) * 65535.0));
        buf.push_back(static_cast<unsigned char>(v >> 8));  // PGM 16-bit is big-endian
        buf.push_back(static_cast<unsigned char>(v & 0xff));
    }
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out) throw IoError("short write on image file: " + path);
}

SarImage read_image(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open image file: " + path);
    std::string magic;
    in >> magic;
    if (magic != "P5") throw ParseError("not a binary PGM (P5) file: " + path);
    int width = 0, height = 0, maxval = 0;
    in >> width >> height >> maxval;
    if (!in || width < 1 || height < 1) throw ParseError("malformed PGM header: " + path);
    if (maxval != 65535) throw ParseError("expected 16-bit PGM (maxval 65535): " + path);
    in.get();  // single whitespace after maxval
    SarImage image;
    image.grid.n_range = width;
    image.grid.n_azimuth = height;
    image.grid.azimuth_min = 0.0;
    image.grid.azimuth_max = 1.0;
    image.grid.range_min = 0.0;
    image.grid.range_max = 1.0;
    image.normalized = true;
    const std::size_t count = static_cast<std::size_t>(width) * height;
    std::vector<unsigned char> buf(count * 2);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (static_cast<std::size_t>(in.gcount()) != buf.size())
        throw ParseError("truncated PGM payload: " + path);
    image.pixels.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::uint16_t v = static_cast<std::uint16_t>((buf[2 * i] << 8) | buf[2 * i + 1]);
        image.pixels[i] = v / 65535.0;
    }
    return image;
}

}  // namespace sarsfp
