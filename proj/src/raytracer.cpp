#include "sarsfp/raytracer.hpp"

#include <cmath>
#include <functional>
#include <thread>

namespace sarsfp {

namespace {
constexpr double kRayBias = 1e-6;
}

SensorGeometry make_sensor(double elevation_deg, double azimuth_deg, int n_u, int n_v,
                           double width_u, double width_v, double sensor_distance) {
    SensorGeometry s;
    s.elevation_deg = elevation_deg;
    s.azimuth_deg = azimuth_deg;
    s.n_u = n_u;
    s.n_v = n_v;
    s.width_u = width_u;
    s.width_v = width_v;
    s.sensor_distance = sensor_distance;
    const double el = deg_to_rad(elevation_deg);
    const double az = deg_to_rad(azimuth_deg);
    const Vec3 toward_sensor{std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el)};
    s.look = -toward_sensor;
    s.az_axis = normalized(cross(Vec3{0.0, 0.0, 1.0}, s.look));
    s.v_axis = cross(s.look, s.az_axis);
    s.plane_center = toward_sensor * sensor_distance;
    return s;
}

SensorGeometry sensor_for_scene(const Scene& scene, double elevation_deg, double azimuth_deg,
                                int n_rays) {
    const double window = 3.0 * scene.ground_extent;  // covers the ground square's diagonal
    return make_sensor(elevation_deg, azimuth_deg, n_rays, n_rays, window, window,
                       10.0 * scene.ground_extent);
}

double specular_intensity(const ScatteringParams& params, double n_dot_h) {
    return params.f_s * std::pow(n_dot_h, 1.0 / params.f_r);
}

double diffuse_intensity(const ScatteringParams& params, double i_sig, double n_dot_l) {
    return params.f_d * i_sig * std::pow(n_dot_l, params.f_b);
}

std::pair<double, double> echo_position(double entry_azimuth, double exit_azimuth,
                                        const std::vector<double>& path_segments) {
    double total = 0.0;
    for (double seg : path_segments) total += seg;
    return {0.5 * (entry_azimuth + exit_azimuth), 0.5 * total};
}

Tracer::Tracer(const Scene& scene, const SensorGeometry& sensor)
    : scene_(&scene), sensor_(sensor), bvh_(scene.meshes) {}

RayState Tracer::grid_ray(int iu, int iv) const {
    const double du = ((iu + 0.5) / sensor_.n_u - 0.5) * sensor_.width_u;
    const double dv = ((iv + 0.5) / sensor_.n_v - 0.5) * sensor_.width_v;
    RayState ray;
    ray.origin = sensor_.plane_center + sensor_.az_axis * du + sensor_.v_axis * dv;
    ray.direction = sensor_.look;
    return ray;
}

std::vector<PathBounce> Tracer::build_path(const Vec3& origin, const Vec3& direction,
                                           int max_bounces, double specular_align_deg) const {
    std::vector<PathBounce> path;
    Vec3 o = origin;
    Vec3 dir = direction;
    double path_length = 0.0;
    double entry_azimuth = 0.0;
    const Vec3 to_sensor = -sensor_.look;
    const double cos_align = std::cos(deg_to_rad(specular_align_deg));

    for (int bounce = 1; bounce <= max_bounces; ++bounce) {
        const BvhHit mesh_hit = bvh_.intersect(o, dir, kRayBias);
        // Ground plane: z = 0 square of half-width ground_extent.
        double ground_t = -1.0;
        if (std::abs(dir.z) > 1e-14) {
            const double t = -o.z / dir.z;
            if (t > kRayBias) {
                const double gx = o.x + t * dir.x;
                const double gy = o.y + t * dir.y;
                if (std::abs(gx) <= scene_->ground_extent && std::abs(gy) <= scene_->ground_extent)
                    ground_t = t;
            }
        }
        double t = -1.0;
        std::size_t mesh = kGroundMesh;
        if (mesh_hit.valid() && (ground_t < 0.0 || mesh_hit.t <= ground_t)) {
            t = mesh_hit.t;
            mesh = mesh_hit.mesh_index;
        } else if (ground_t > 0.0) {
            t = ground_t;
        }
        if (t < 0.0) break;

        const Vec3 hit = o + dir * t;
        Vec3 n = (mesh == kGroundMesh) ? Vec3{0.0, 0.0, 1.0} : scene_->meshes[mesh].normal;
        if (dot(n, dir) > 0.0) n = -n;

        path_length += t;
        const double hit_azimuth = dot(hit, sensor_.az_axis);
        if (bounce == 1) entry_azimuth = hit_azimuth;

        PathBounce pb;
        pb.mesh = mesh;
        pb.n_dot_l = static_cast<float>(clamp01(dot(n, to_sensor)));

        // Return leg to the sensor plane.
        const double return_dist = dot(sensor_.plane_center - hit, to_sensor);
        pb.visible = return_dist > 0.0 &&
                     !bvh_.occluded(hit, to_sensor, kRayBias, return_dist - kRayBias);
        if (pb.visible) {
            pb.a = 0.5 * (entry_azimuth + hit_azimuth);
            pb.r = 0.5 * (path_length + return_dist);
        }

        const Vec3 rdir = reflect(dir, n);
        if (dot(rdir, to_sensor) >= cos_align) {
            pb.specular_aligned = true;
            const Vec3 h = normalized(to_sensor - dir);
            pb.n_dot_h = static_cast<float>(clamp01(dot(n, h)));
        }
        path.push_back(pb);

        o = hit;
        dir = rdir;
    }
    return path;
}

void shade_path(std::span<const PathBounce> path, const ScatteringParams& background,
                const std::vector<ScatteringParams>& effective_params, const RenderOptions& opts,
                std::vector<EchoSample>& out) {
    double i_sig = 1.0;
    int bounce = 0;
    for (const PathBounce& pb : path) {
        ++bounce;
        if (bounce > opts.max_bounces) break;
        const ScatteringParams& params =
            (pb.mesh == kGroundMesh) ? background : effective_params[pb.mesh];
        if (pb.visible) {
            double intensity = diffuse_intensity(params, i_sig, pb.n_dot_l);
            if (pb.specular_aligned) intensity += specular_intensity(params, pb.n_dot_h);
            EchoSample sample;
            sample.a = pb.a;
            sample.r = pb.r;
            sample.intensity = intensity;
            sample.bounce_count = bounce;
            out.push_back(sample);
        }
        // Mirror continuation: the half-vector of a mirror pair equals the
        // normal, so the continuation cosine is exactly 1.
        i_sig *= specular_intensity(params, 1.0);
        if (i_sig < opts.intensity_floor) break;
    }
}

std::vector<EchoSample> Tracer::trace_ray(const RayState& ray,
                                          const std::vector<ScatteringParams>& effective_params,
                                          const RenderOptions& opts) const {
    const std::vector<PathBounce> path =
        build_path(ray.origin, ray.direction, opts.max_bounces, opts.specular_align_deg);
    std::vector<EchoSample> out;
    shade_path(path, scene_->background_params, effective_params, opts, out);
    return out;
}

void parallel_for(std::size_t n, int workers,
                  const std::function<void(std::size_t, std::size_t)>& fn) {
    if (workers <= 1 || n < 2) {
        fn(0, n);
        return;
    }
    const std::size_t w = std::min<std::size_t>(workers, n);
    std::vector<std::thread> threads;
    threads.reserve(w);
    for (std::size_t k = 0; k < w; ++k) {
        const std::size_t begin = n * k / w;
        const std::size_t end = n * (k + 1) / w;
        threads.emplace_back(fn, begin, end);
    }
    for (auto& t : threads) t.join();
}

std::vector<EchoSample> Tracer::render(const std::vector<ScatteringParams>& effective_params,
                                       const RenderOptions& opts, int workers) const {
    const std::size_t n_rays = static_cast<std::size_t>(sensor_.n_u) * sensor_.n_v;
    std::vector<std::vector<EchoSample>> per_ray(n_rays);
    parallel_for(n_rays, workers, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const int iu = static_cast<int>(i % sensor_.n_u);
            const int iv = static_cast<int>(i / sensor_.n_u);
            const RayState ray = grid_ray(iu, iv);
            const std::vector<PathBounce> path =
                build_path(ray.origin, ray.direction, opts.max_bounces, opts.specular_align_deg);
            shade_path(path, scene_->background_params, effective_params, opts, per_ray[i]);
        }
    });
    std::vector<EchoSample> out;
    for (const auto& samples : per_ray) out.insert(out.end(), samples.begin(), samples.end());
    return out;
}

ViewCache::ViewCache(const Tracer& tracer, const RenderOptions& opts, int workers)
    : background_(tracer.scene().background_params), opts_(opts) {
    const SensorGeometry& sensor = tracer.sensor();
    const std::size_t n_rays = static_cast<std::size_t>(sensor.n_u) * sensor.n_v;
    std::vector<std::vector<PathBounce>> per_ray(n_rays);
    parallel_for(n_rays, workers, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const int iu = static_cast<int>(i % sensor.n_u);
            const int iv = static_cast<int>(i / sensor.n_u);
            const RayState ray = tracer.grid_ray(iu, iv);
            per_ray[i] = tracer.build_path(ray.origin, ray.direction, opts.max_bounces,
                                           opts.specular_align_deg);
        }
    });
    offsets_.reserve(n_rays + 1);
    offsets_.push_back(0);
    std::size_t total = 0;
    for (const auto& p : per_ray) total += p.size();
    bounces_.reserve(total);
    for (const auto& p : per_ray) {
        bounces_.insert(bounces_.end(), p.begin(), p.end());
        offsets_.push_back(static_cast<std::uint32_t>(bounces_.size()));
    }
}

std::vector<EchoSample> ViewCache::render(
    const std::vector<ScatteringParams>& effective_params) const {
    std::vector<EchoSample> out;
    out.reserve(bounces_.size());
    for (std::size_t ray = 0; ray + 1 < offsets_.size(); ++ray) {
        const std::uint32_t begin = offsets_[ray];
        const std::uint32_t end = offsets_[ray + 1];
        if (begin == end) continue;
        shade_path(std::span<const PathBounce>(bounces_.data() + begin, end - begin), background_,
                   effective_params, opts_, out);
    }
    return out;
}

}  // namespace sarsfp
