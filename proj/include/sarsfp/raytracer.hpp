#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "sarsfp/bvh.hpp"
#include "sarsfp/geometry.hpp"
#include "sarsfp/scene.hpp"

namespace sarsfp {

// Orthographic parallel-ray sensor. Rays travel along `look` (unit vector
// from the sensor plane toward the scene origin); `az_axis` is the horizontal
// azimuth axis of the sensor plane and `v_axis` completes the frame.
struct SensorGeometry {
    double elevation_deg = 15.0;
    double azimuth_deg = 0.0;
    int n_u = 128;
    int n_v = 128;
    double width_u = 30.0;
    double width_v = 30.0;
    double sensor_distance = 100.0;

    Vec3 look;
    Vec3 az_axis;
    Vec3 v_axis;
    Vec3 plane_center;
};

SensorGeometry make_sensor(double elevation_deg, double azimuth_deg, int n_u, int n_v,
                           double width_u, double width_v, double sensor_distance);

// Sensor whose window covers the scene's ground square from any azimuth.
SensorGeometry sensor_for_scene(const Scene& scene, double elevation_deg, double azimuth_deg,
                                int n_rays = 128);

struct RayState {
    Vec3 origin;
    Vec3 direction;
    double i_sig = 1.0;
    int bounce_index = 1;
    double path_length_so_far = 0.0;
};

struct EchoSample {
    double a = 0.0;          // azimuth coordinate, meters
    double r = 0.0;          // slant range, meters
    double intensity = 0.0;
    int bounce_count = 1;
};

struct RenderOptions {
    int max_bounces = 3;               // configurable 1..5
    double intensity_floor = 1e-6;     // terminate negligible paths
    double specular_align_deg = 0.5;   // mirror-to-sensor tolerance for the specular term
};

// Eq.-level shading primitives.
double specular_intensity(const ScatteringParams& params, double n_dot_h);
double diffuse_intensity(const ScatteringParams& params, double i_sig, double n_dot_l);

// Focusing rule: a is the midpoint of the entry/exit azimuth projections,
// r is half the total sensor-to-sensor path length.
std::pair<double, double> echo_position(double entry_azimuth, double exit_azimuth,
                                        const std::vector<double>& path_segments);

// Sentinel mesh index for ground-plane bounces.
inline constexpr std::size_t kGroundMesh = static_cast<std::size_t>(-1);

// One hit of a geometric ray path. Everything parameter-independent is
// captured here so the same path can be re-shaded under different
// scattering parameters.
struct PathBounce {
    std::size_t mesh = 0;           // triangle index, or kGroundMesh
    float n_dot_l = 0.0f;
    float n_dot_h = 0.0f;           // toward-sensor half-vector cosine (if aligned)
    bool visible = false;           // unoccluded return to the sensor plane
    bool specular_aligned = false;  // mirror direction within tolerance of the sensor
    double a = 0.0;
    double r = 0.0;
};

class Tracer {
public:
    Tracer(const Scene& scene, const SensorGeometry& sensor);

    const Scene& scene() const { return *scene_; }
    const SensorGeometry& sensor() const { return sensor_; }

    // Geometry-only path of one ray; independent of scattering parameters.
    std::vector<PathBounce> build_path(const Vec3& origin, const Vec3& direction, int max_bounces,
                                       double specular_align_deg) const;

    std::vector<EchoSample> trace_ray(const RayState& ray,
                                      const std::vector<ScatteringParams>& effective_params,
                                      const RenderOptions& opts) const;

    std::vector<EchoSample> render(const std::vector<ScatteringParams>& effective_params,
                                   const RenderOptions& opts, int workers = 1) const;

    RayState grid_ray(int iu, int iv) const;

private:
    const Scene* scene_;
    SensorGeometry sensor_;
    Bvh bvh_;
};

// Shades one path under the given parameters, appending emitted samples.
// Matches trace_ray bit-for-bit: same shading functions, same floor rule.
void shade_path(std::span<const PathBounce> path, const ScatteringParams& background,
                const std::vector<ScatteringParams>& effective_params, const RenderOptions& opts,
                std::vector<EchoSample>& out);

// Precomputed ray paths of one view. Re-shading under new scattering
// parameters reproduces Tracer::render exactly; geometry is traced once.
class ViewCache {
public:
    ViewCache(const Tracer& tracer, const RenderOptions& opts, int workers = 1);

    std::vector<EchoSample> render(const std::vector<ScatteringParams>& effective_params) const;

    const RenderOptions& options() const { return opts_; }

private:
    ScatteringParams background_;
    RenderOptions opts_;
    std::vector<PathBounce> bounces_;        // flattened
    std::vector<std::uint32_t> offsets_;     // per ray, size n_rays+1
};

// Deterministic parallel map over [0, n): contiguous chunks in index order,
// results identical for any worker count.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace sarsfp
