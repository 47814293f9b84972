#pragma once

#include <cstddef>
#include <vector>

#include "sarsfp/geometry.hpp"
#include "sarsfp/scene.hpp"

namespace sarsfp {

struct BvhHit {
    double t = -1.0;
    std::size_t mesh_index = 0;

    bool valid() const { return t > 0.0; }
};

// Axis-aligned BVH over the scene's triangles. Built once per scene load and
// reused across all renders; an attack only changes scattering parameters,
// never geometry.
class Bvh {
public:
    Bvh() = default;
    explicit Bvh(const std::vector<Mesh>& meshes) { build(meshes); }

    void build(const std::vector<Mesh>& meshes);

    // Nearest intersection with t > t_min, or an invalid hit.
    BvhHit intersect(const Vec3& origin, const Vec3& dir, double t_min) const;

    // True if any triangle lies in (t_min, t_max) along the ray.
    bool occluded(const Vec3& origin, const Vec3& dir, double t_min, double t_max) const;

    bool empty() const { return nodes_.empty(); }

private:
    struct Node {
        Aabb bounds;
        std::uint32_t left = 0;        // child index, or first triangle for leaves
        std::uint32_t count = 0;       // triangle count; 0 for interior nodes
    };

    std::uint32_t build_node(std::size_t begin, std::size_t end);

    const std::vector<Mesh>* meshes_ = nullptr;
    std::vector<Node> nodes_;
    std::vector<std::uint32_t> tri_order_;
    std::vector<Vec3> centroids_;
};

}  // namespace sarsfp
