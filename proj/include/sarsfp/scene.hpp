#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sarsfp/geometry.hpp"

namespace sarsfp {

struct Mesh {
    int id = 0;
    Vec3 vertices[3];
    Vec3 normal;  // unit, flat shading
    std::string component_name;
};

struct ScatteringParams {
    double f_s = 0.0;  // specular reflection coefficient, [0,1]
    double f_d = 0.0;  // diffuse reflection coefficient, [0,1]
    double f_r = 1.0;  // surface roughness factor, (0, inf)
    double f_b = 1.0;  // surface brightness factor, [0, inf)

    bool operator==(const ScatteringParams&) const = default;
};

struct BlendCoefficients {
    double alpha = 0.0;  // specular blend weight, [0,1]
    double beta = 0.0;   // diffuse blend weight, [0,1]

    bool operator==(const BlendCoefficients&) const = default;
};

struct Scene {
    std::vector<Mesh> meshes;
    std::vector<ScatteringParams> object_params;   // parallel to meshes
    ScatteringParams background_params;            // ground plane material
    std::vector<BlendCoefficients> blend;          // parallel to meshes
    double ground_extent = 10.0;                   // half-width of the square ground plane
    std::vector<std::string> components;           // declared component labels

    std::size_t mesh_count() const { return meshes.size(); }
};

struct BatchSchedule {
    std::vector<std::vector<std::size_t>> batches;
    std::uint64_t seed = 0;
};

// Computes the unit normal from vertex winding (right-handed).
Vec3 face_normal(const Vec3& v0, const Vec3& v1, const Vec3& v2);

// Checks every Scene invariant and throws ValidationError naming the first
// violation. Called by load_scene; exposed for programmatically built scenes.
void validate_scene(const Scene& scene);

Scene load_scene(const std::string& path);
Scene parse_scene(const std::string& json_text);
std::string serialize_scene(const Scene& scene);
void save_scene(const Scene& scene, const std::string& path);

// Seeded uniform [0,1] draw for every alpha/beta in the scene.
void init_blend(Scene& scene, std::uint64_t seed);

// FNV-1a hash of the canonical serialization; used to fingerprint snapshots.
std::uint64_t scene_fingerprint(const Scene& scene);

BatchSchedule partition_batches(std::size_t n_meshes, std::size_t batch_denominator,
                                std::uint64_t seed);

std::vector<std::size_t> component_mask(const Scene& scene, const std::set<std::string>& components);

}  // namespace sarsfp
