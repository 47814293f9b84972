#include "sarsfp/bvh.hpp"

#include <algorithm>
#include <numeric>

namespace sarsfp {

namespace {
constexpr std::size_t kLeafSize = 4;
}

void Bvh::build(const std::vector<Mesh>& meshes) {
    meshes_ = &meshes;
    nodes_.clear();
    tri_order_.resize(meshes.size());
    std::iota(tri_order_.begin(), tri_order_.end(), 0u);
    centroids_.resize(meshes.size());
    for (std::size_t i = 0; i < meshes.size(); ++i) {
        const Mesh& m = meshes[i];
        centroids_[i] = (m.vertices[0] + m.vertices[1] + m.vertices[2]) * (1.0 / 3.0);
    }
    if (!meshes.empty()) {
        nodes_.reserve(2 * meshes.size());
        build_node(0, meshes.size());
    }
}

// Layout: an interior node's left child is the next node in the array; the
// `left` field stores the right child's index. Leaves store (first, count)
// into tri_order_.
std::uint32_t Bvh::build_node(std::size_t begin, std::size_t end) {
    const std::uint32_t index = static_cast<std::uint32_t>(nodes_.size());
    nodes_.emplace_back();
    Aabb bounds;
    Aabb centroid_bounds;
    for (std::size_t i = begin; i < end; ++i) {
        const Mesh& m = (*meshes_)[tri_order_[i]];
        bounds.expand(m.vertices[0]);
        bounds.expand(m.vertices[1]);
        bounds.expand(m.vertices[2]);
        centroid_bounds.expand(centroids_[tri_order_[i]]);
    }
    nodes_[index].bounds = bounds;
    if (end - begin <= kLeafSize) {
        nodes_[index].left = static_cast<std::uint32_t>(begin);
        nodes_[index].count = static_cast<std::uint32_t>(end - begin);
        return index;
    }
    const Vec3 extent = centroid_bounds.hi - centroid_bounds.lo;
    int axis = 0;
    double widest = extent.x;
    if (extent.y > widest) { axis = 1; widest = extent.y; }
    if (extent.z > widest) { axis = 2; }
    const std::size_t mid = (begin + end) / 2;
    auto key = [this, axis](std::uint32_t tri) {
        const Vec3& c = centroids_[tri];
        return axis == 0 ? c.x : (axis == 1 ? c.y : c.z);
    };
    // Tie-break on triangle index so the build is fully deterministic.
    std::nth_element(tri_order_.begin() + begin, tri_order_.begin() + mid, tri_order_.begin() + end,
                     [&key](std::uint32_t a, std::uint32_t b) {
                         const double ka = key(a), kb = key(b);
                         return ka < kb || (ka == kb && a < b);
                     });
    build_node(begin, mid);
    const std::uint32_t right = build_node(mid, end);
    nodes_[index].left = right;
    nodes_[index].count = 0;
    return index;
}

BvhHit Bvh::intersect(const Vec3& origin, const Vec3& dir, double t_min) const {
    BvhHit best;
    if (nodes_.empty()) return best;
    double t_max = std::numeric_limits<double>::max();
    const Vec3 inv_dir{1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z};
    std::uint32_t stack[64];
    int sp = 0;
    stack[sp++] = 0;
    while (sp > 0) {
        const std::uint32_t node_index = stack[--sp];
        const Node& node = nodes_[node_index];
        if (!node.bounds.hit(origin, inv_dir, t_max)) continue;
        if (node.count > 0) {
            for (std::uint32_t i = 0; i < node.count; ++i) {
                const std::uint32_t tri = tri_order_[node.left + i];
                const Mesh& m = (*meshes_)[tri];
                const double t =
                    intersect_triangle(origin, dir, m.vertices[0], m.vertices[1], m.vertices[2], t_min);
                if (t > 0.0 && t < t_max) {
                    t_max = t;
                    best.t = t;
                    best.mesh_index = tri;
                }
            }
        } else {
            stack[sp++] = node.left;       // right child
            stack[sp++] = node_index + 1;  // left child
        }
    }
    return best;
}

bool Bvh::occluded(const Vec3& origin, const Vec3& dir, double t_min, double t_max) const {
    if (nodes_.empty()) return false;
    const Vec3 inv_dir{1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z};
    std::uint32_t stack[64];
    int sp = 0;
    stack[sp++] = 0;
    while (sp > 0) {
        const std::uint32_t node_index = stack[--sp];
        const Node& node = nodes_[node_index];
        if (!node.bounds.hit(origin, inv_dir, t_max)) continue;
        if (node.count > 0) {
            for (std::uint32_t i = 0; i < node.count; ++i) {
                const Mesh& m = (*meshes_)[tri_order_[node.left + i]];
                const double t =
                    intersect_triangle(origin, dir, m.vertices[0], m.vertices[1], m.vertices[2], t_min);
                if (t > 0.0 && t < t_max) return true;
            }
        } else {
            stack[sp++] = node.left;
            stack[sp++] = node_index + 1;
        }
    }
    return false;
}

}  // namespace sarsfp
