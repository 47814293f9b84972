#include "sarsfp/scene.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "sarsfp/errors.hpp"
#include "sarsfp/rng.hpp"

namespace sarsfp {

using nlohmann::json;

Vec3 face_normal(const Vec3& v0, const Vec3& v1, const Vec3& v2) {
    const Vec3 n = cross(v1 - v0, v2 - v0);
    const double len = norm(n);
    if (len <= 0.0) throw ValidationError("degenerate triangle (zero area)");
    return n * (1.0 / len);
}

namespace {

void check_params(const ScatteringParams& p, const std::string& where) {
    if (p.f_s < 0.0 || p.f_s > 1.0) throw ValidationError(where + ": f_s out of range");
    if (p.f_d < 0.0 || p.f_d > 1.0) throw ValidationError(where + ": f_d out of range");
    if (!(p.f_r > 0.0)) throw ValidationError(where + ": f_r out of range");
    if (p.f_b < 0.0) throw ValidationError(where + ": f_b out of range");
}

Vec3 vec_from_json(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 3) throw ParseError(where + ": expected [x,y,z]");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json vec_to_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

ScatteringParams params_from_json(const json& j) {
    ScatteringParams p;
    p.f_s = j.at("f_s").get<double>();
    p.f_d = j.at("f_d").get<double>();
    p.f_r = j.at("f_r").get<double>();
    p.f_b = j.at("f_b").get<double>();
    return p;
}

json params_to_json(const ScatteringParams& p) {
    return json{{"f_s", p.f_s}, {"f_d", p.f_d}, {"f_r", p.f_r}, {"f_b", p.f_b}};
}

}  // namespace

void validate_scene(const Scene& scene) {
    if (scene.object_params.size() != scene.meshes.size())
        throw ValidationError("object_params count does not match mesh count");
    if (scene.blend.size() != scene.meshes.size())
        throw ValidationError("blend count does not match mesh count");
    if (!(scene.ground_extent > 0.0)) throw ValidationError("ground_extent must be positive");
    check_params(scene.background_params, "background_params");
    for (std::size_t i = 0; i < scene.meshes.size(); ++i) {
        const Mesh& m = scene.meshes[i];
        const Vec3 area_vec = cross(m.vertices[1] - m.vertices[0], m.vertices[2] - m.vertices[0]);
        if (norm(area_vec) <= 0.0)
            throw ValidationError("mesh " + std::to_string(m.id) + ": degenerate triangle (zero area)");
        if (std::abs(norm(m.normal) - 1.0) > 1e-9)
            throw ValidationError("mesh " + std::to_string(m.id) + ": normal is not unit length");
        if (std::find(scene.components.begin(), scene.components.end(), m.component_name) ==
            scene.components.end())
            throw ValidationError("mesh " + std::to_string(m.id) + ": component \"" +
                                  m.component_name + "\" not in declared component list");
        check_params(scene.object_params[i], "object_params[" + std::to_string(i) + "]");
        const BlendCoefficients& b = scene.blend[i];
        if (b.alpha < 0.0 || b.alpha > 1.0 || b.beta < 0.0 || b.beta > 1.0)
            throw ValidationError("blend[" + std::to_string(i) + "] out of [0,1]");
    }
}

Scene parse_scene(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("scene parse error: ") + e.what());
    }
    Scene scene;
    try {
        scene.ground_extent = j.at("ground_extent").get<double>();
        scene.background_params = params_from_json(j.at("background_params"));
        for (const auto& c : j.at("components")) scene.components.push_back(c.get<std::string>());
        const json& meshes = j.at("meshes");
        for (std::size_t i = 0; i < meshes.size(); ++i) {
            const json& jm = meshes[i];
            Mesh m;
            m.id = jm.at("id").get<int>();
            const json& verts = jm.at("vertices");
            if (!verts.is_array() || verts.size() != 3)
                throw ParseError("mesh record " + std::to_string(i) + ": expected 3 vertices");
            for (int k = 0; k < 3; ++k)
                m.vertices[k] = vec_from_json(verts[k], "mesh record " + std::to_string(i));
            m.component_name = jm.at("component").get<std::string>();
            if (jm.contains("normal"))
                m.normal = vec_from_json(jm.at("normal"), "mesh record " + std::to_string(i));
            else
                m.normal = face_normal(m.vertices[0], m.vertices[1], m.vertices[2]);
            scene.meshes.push_back(m);
        }
        for (const auto& jp : j.at("object_params")) scene.object_params.push_back(params_from_json(jp));
        if (j.contains("blend")) {
            for (const auto& jb : j.at("blend")) {
                BlendCoefficients b;
                b.alpha = jb.at("alpha").get<double>();
                b.beta = jb.at("beta").get<double>();
                scene.blend.push_back(b);
            }
        } else {
            scene.blend.assign(scene.meshes.size(), BlendCoefficients{});
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("scene parse error: ") + e.what());
    }
    validate_scene(scene);
    return scene;
}

Scene load_scene(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open scene file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_scene(ss.str());
}

std::string serialize_scene(const Scene& scene) {
    json j;
    j["ground_extent"] = scene.ground_extent;
    j["components"] = scene.components;
    j["background_params"] = params_to_json(scene.background_params);
    json meshes = json::array();
    for (const Mesh& m : scene.meshes) {
        meshes.push_back(json{{"id", m.id},
                              {"vertices", json::array({vec_to_json(m.vertices[0]),
                                                        vec_to_json(m.vertices[1]),
                                                        vec_to_json(m.vertices[2])})},
                              {"normal", vec_to_json(m.normal)},
                              {"component", m.component_name}});
    }
    j["meshes"] = std::move(meshes);
    json params = json::array();
    for (const ScatteringParams& p : scene.object_params) params.push_back(params_to_json(p));
    j["object_params"] = std::move(params);
    json blend = json::array();
    for (const BlendCoefficients& b : scene.blend)
        blend.push_back(json{{"alpha", b.alpha}, {"beta", b.beta}});
    j["blend"] = std::move(blend);
    return j.dump(2);
}

void save_scene(const Scene& scene, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write scene file: " + path);
    out << serialize_scene(scene) << '\n';
}

void init_blend(Scene& scene, std::uint64_t seed) {
    Rng rng(derive_seed(seed, "blend-init"));
    scene.blend.resize(scene.meshes.size());
    for (auto& b : scene.blend) {
        b.alpha = rng.uniform01();
        b.beta = rng.uniform01();
    }
}

std::uint64_t scene_fingerprint(const Scene& scene) {
    const std::string text = serialize_scene(scene);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : text) {
        h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
        h *= 0x100000001b3ULL;
    }
    return h;
}

BatchSchedule partition_batches(std::size_t n_meshes, std::size_t batch_denominator,
                                std::uint64_t seed) {
    if (n_meshes < 1) throw ValidationError("partition_batches: need at least one mesh");
    if (batch_denominator < 1) throw ValidationError("partition_batches: need at least one batch");
    if (batch_denominator > n_meshes)
        throw ValidationError("partition_batches: cannot form " + std::to_string(batch_denominator) +
                              " non-empty batches from " + std::to_string(n_meshes) + " meshes");
    std::vector<std::size_t> perm(n_meshes);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(derive_seed(seed, "batch-shuffle"));
    for (std::size_t i = n_meshes - 1; i > 0; --i)
        std::swap(perm[i], perm[rng.uniform_index(i + 1)]);

    BatchSchedule sched;
    sched.seed = seed;
    const std::size_t base = n_meshes / batch_denominator;
    const std::size_t remainder = n_meshes % batch_denominator;
    std::size_t cursor = 0;
    for (std::size_t b = 0; b < batch_denominator; ++b) {
        const std::size_t size = base + (b < remainder ? 1 : 0);
        sched.batches.emplace_back(perm.begin() + cursor, perm.begin() + cursor + size);
        cursor += size;
    }
    return sched;
}

std::vector<std::size_t> component_mask(const Scene& scene, const std::set<std::string>& components) {
    for (const std::string& label : components) {
        if (std::find(scene.components.begin(), scene.components.end(), label) ==
            scene.components.end()) {
            std::string valid;
            for (const std::string& c : scene.components) {
                if (!valid.empty()) valid += ", ";
                valid += c;
            }
            throw ValidationError("unknown component \"" + label + "\"; valid components: " + valid);
        }
    }
    std::vector<std::size_t> mask;
    for (std::size_t i = 0; i < scene.meshes.size(); ++i)
        if (components.count(scene.meshes[i].component_name)) mask.push_back(i);
    return mask;
}

}  // namespace sarsfp
