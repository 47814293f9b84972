#include "sarsfp/targets.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "sarsfp/errors.hpp"
#include "sarsfp/imaging.hpp"
#include "sarsfp/raytracer.hpp"
#include "sarsfp/rng.hpp"

namespace sarsfp {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Tri {
    Vec3 v[3];
};

void add_tri(std::vector<Tri>& out, const Vec3& a, const Vec3& b, const Vec3& c) {
    out.push_back(Tri{{a, b, c}});
}

void add_quad(std::vector<Tri>& out, const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
    add_tri(out, a, b, c);
    add_tri(out, a, c, d);
}

// Axis-aligned box, outward winding.
std::vector<Tri> box_tris(const Vec3& center, const Vec3& size) {
    if (!(size.x > 0.0 && size.y > 0.0 && size.z > 0.0))
        throw ValidationError("box primitive has non-positive dimensions");
    const Vec3 h = size * 0.5;
    const Vec3 lo = center - h;
    const Vec3 hi = center + h;
    const Vec3 p000{lo.x, lo.y, lo.z}, p100{hi.x, lo.y, lo.z}, p010{lo.x, hi.y, lo.z},
        p110{hi.x, hi.y, lo.z}, p001{lo.x, lo.y, hi.z}, p101{hi.x, lo.y, hi.z},
        p011{lo.x, hi.y, hi.z}, p111{hi.x, hi.y, hi.z};
    std::vector<Tri> tris;
    add_quad(tris, p001, p101, p111, p011);  // +z
    add_quad(tris, p000, p010, p110, p100);  // -z
    add_quad(tris, p100, p110, p111, p101);  // +x
    add_quad(tris, p000, p001, p011, p010);  // -x
    add_quad(tris, p010, p011, p111, p110);  // +y
    add_quad(tris, p000, p100, p101, p001);  // -y
    return tris;
}

// Triangular prism: right-triangle cross-section in the x-z plane (vertical
// back face at -x, sloped face from back-top down to front-bottom at +x),
// extruded along y.
std::vector<Tri> wedge_tris(const Vec3& center, const Vec3& size) {
    if (!(size.x > 0.0 && size.y > 0.0 && size.z > 0.0))
        throw ValidationError("wedge primitive has non-positive dimensions");
    const Vec3 h = size * 0.5;
    const Vec3 a0{center.x - h.x, center.y - h.y, center.z - h.z};  // back bottom
    const Vec3 b0{center.x + h.x, center.y - h.y, center.z - h.z};  // front bottom
    const Vec3 c0{center.x - h.x, center.y - h.y, center.z + h.z};  // back top
    const Vec3 a1{center.x - h.x, center.y + h.y, center.z - h.z};
    const Vec3 b1{center.x + h.x, center.y + h.y, center.z - h.z};
    const Vec3 c1{center.x - h.x, center.y + h.y, center.z + h.z};
    std::vector<Tri> tris;
    add_tri(tris, a0, c0, b0);               // -y end
    add_tri(tris, a1, b1, c1);               // +y end
    add_quad(tris, a0, b0, b1, a1);          // bottom
    add_quad(tris, a0, a1, c1, c0);          // back (vertical)
    add_quad(tris, b0, c0, c1, b1);          // slope
    return tris;
}

std::vector<Tri> cylinder_tris(const Vec3& center, double radius, double height, int segments) {
    if (!(radius > 0.0 && height > 0.0) || segments < 3)
        throw ValidationError("cylinder primitive has degenerate dimensions");
    const double z0 = center.z - 0.5 * height;
    const double z1 = center.z + 0.5 * height;
    std::vector<Tri> tris;
    for (int s = 0; s < segments; ++s) {
        const double t0 = 2.0 * kPi * s / segments;
        const double t1 = 2.0 * kPi * (s + 1) / segments;
        const Vec3 r0{center.x + radius * std::cos(t0), center.y + radius * std::sin(t0), 0.0};
        const Vec3 r1{center.x + radius * std::cos(t1), center.y + radius * std::sin(t1), 0.0};
        const Vec3 b0{r0.x, r0.y, z0}, b1{r1.x, r1.y, z0};
        const Vec3 u0{r0.x, r0.y, z1}, u1{r1.x, r1.y, z1};
        add_quad(tris, b0, b1, u1, u0);                              // side
        add_tri(tris, Vec3{center.x, center.y, z1}, u0, u1);         // top cap
        add_tri(tris, Vec3{center.x, center.y, z0}, b1, b0);         // bottom cap
    }
    return tris;
}

void subdivide(std::vector<Tri>& tris) {
    std::vector<Tri> out;
    out.reserve(tris.size() * 4);
    for (const Tri& t : tris) {
        const Vec3 m01 = (t.v[0] + t.v[1]) * 0.5;
        const Vec3 m12 = (t.v[1] + t.v[2]) * 0.5;
        const Vec3 m20 = (t.v[2] + t.v[0]) * 0.5;
        add_tri(out, t.v[0], m01, m20);
        add_tri(out, m01, t.v[1], m12);
        add_tri(out, m20, m12, t.v[2]);
        add_tri(out, m01, m12, m20);
    }
    tris = std::move(out);
}

json vec_to_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }
Vec3 vec_from_json(const json& j) {
    return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

json params_to_json(const ScatteringParams& p) {
    return json{{"f_s", p.f_s}, {"f_d", p.f_d}, {"f_r", p.f_r}, {"f_b", p.f_b}};
}
ScatteringParams params_from_json(const json& j) {
    return {j.at("f_s").get<double>(), j.at("f_d").get<double>(), j.at("f_r").get<double>(),
            j.at("f_b").get<double>()};
}

}  // namespace

std::vector<TargetSpec> builtin_target_specs() {
    std::vector<TargetSpec> specs;

    {  // Tank-like composite with the six-part taxonomy.
        TargetSpec t;
        t.class_id = "boxtank";
        auto box = [&t](const Vec3& c, const Vec3& s, const std::string& comp) {
            PrimitiveSpec p;
            p.kind = PrimitiveSpec::Kind::Box;
            p.center = c;
            p.size = s;
            p.component = comp;
            t.primitives.push_back(p);
        };
        box({0.0, 0.0, 1.1}, {6.0, 3.0, 1.2}, "body");
        {
            PrimitiveSpec p;  // sloped glacis plate at the front
            p.kind = PrimitiveSpec::Kind::Wedge;
            p.center = {3.6, 0.0, 1.1};
            p.size = {1.2, 3.0, 1.2};
            p.component = "head_armor";
            t.primitives.push_back(p);
        }
        box({-0.4, 0.0, 2.1}, {2.6, 2.0, 0.8}, "turret");
        box({1.8, 0.0, 2.15}, {3.2, 0.3, 0.3}, "barrel");
        box({0.0, 1.65, 0.9}, {6.0, 0.25, 0.8}, "side_skirts");
        box({0.0, -1.65, 0.9}, {6.0, 0.25, 0.8}, "side_skirts");
        box({0.0, 1.35, 0.35}, {6.2, 0.6, 0.7}, "track");
        box({0.0, -1.35, 0.35}, {6.2, 0.6, 0.7}, "track");
        t.component_params = {
            {"body", {0.70, 0.60, 0.50, 1.0}},     {"head_armor", {0.80, 0.65, 0.40, 1.0}},
            {"turret", {0.75, 0.60, 0.50, 1.0}},   {"barrel", {0.70, 0.55, 0.60, 1.0}},
            {"side_skirts", {0.65, 0.55, 0.60, 1.0}}, {"track", {0.55, 0.50, 0.80, 1.0}},
        };
        specs.push_back(std::move(t));
    }

    {  // Rounded silhouette.
        TargetSpec t;
        t.class_id = "dome";
        auto cyl = [&t](const Vec3& c, double r, double h, const std::string& comp) {
            PrimitiveSpec p;
            p.kind = PrimitiveSpec::Kind::Cylinder;
            p.center = c;
            p.radius = r;
            p.height = h;
            p.segments = 20;
            p.component = comp;
            t.primitives.push_back(p);
        };
        cyl({0.0, 0.0, 0.5}, 2.8, 1.0, "base");
        cyl({0.0, 0.0, 1.5}, 1.8, 1.0, "drum");
        cyl({0.0, 0.0, 2.4}, 0.9, 0.8, "cap");
        t.component_params = {
            {"base", {0.70, 0.60, 0.50, 1.0}},
            {"drum", {0.72, 0.58, 0.50, 1.0}},
            {"cap", {0.75, 0.62, 0.45, 1.0}},
        };
        specs.push_back(std::move(t));
    }

    {  // Outlier shape: tall open frame, very different contour from the rest.
        TargetSpec t;
        t.class_id = "gantry";
        auto box = [&t](const Vec3& c, const Vec3& s, const std::string& comp) {
            PrimitiveSpec p;
            p.kind = PrimitiveSpec::Kind::Box;
            p.center = c;
            p.size = s;
            p.component = comp;
            t.primitives.push_back(p);
        };
        box({-3.0, 0.0, 2.0}, {0.8, 0.8, 4.0}, "leg");
        box({3.0, 0.0, 2.0}, {0.8, 0.8, 4.0}, "leg");
        box({0.0, 0.0, 4.2}, {7.5, 1.0, 0.6}, "beam");
        box({0.0, 0.0, 0.25}, {8.0, 2.0, 0.5}, "base_plate");
        box({0.0, 0.0, 3.2}, {0.6, 0.6, 1.6}, "hoist");
        t.component_params = {
            {"leg", {0.70, 0.60, 0.50, 1.0}},
            {"beam", {0.75, 0.60, 0.45, 1.0}},
            {"base_plate", {0.60, 0.55, 0.70, 1.0}},
            {"hoist", {0.72, 0.60, 0.50, 1.0}},
        };
        specs.push_back(std::move(t));
    }

    return specs;
}

Scene generate_target(const TargetSpec& spec, int tessellation_level) {
    if (tessellation_level < 0) throw ValidationError("tessellation level must be non-negative");
    Scene scene;
    scene.ground_extent = spec.ground_extent;
    scene.background_params = spec.background_params;
    int next_id = 0;
    for (const PrimitiveSpec& prim : spec.primitives) {
        std::vector<Tri> tris;
        switch (prim.kind) {
            case PrimitiveSpec::Kind::Box:
                tris = box_tris(prim.center, prim.size);
                break;
            case PrimitiveSpec::Kind::Wedge:
                tris = wedge_tris(prim.center, prim.size);
                break;
            case PrimitiveSpec::Kind::Cylinder:
                tris = cylinder_tris(prim.center, prim.radius, prim.height, prim.segments);
                break;
        }
        for (int level = 0; level < tessellation_level; ++level) subdivide(tris);
        const ScatteringParams params = [&] {
            auto it = spec.component_params.find(prim.component);
            return it != spec.component_params.end() ? it->second : spec.default_params;
        }();
        if (std::find(scene.components.begin(), scene.components.end(), prim.component) ==
            scene.components.end())
            scene.components.push_back(prim.component);
        for (const Tri& t : tris) {
            Mesh m;
            m.id = next_id++;
            m.vertices[0] = t.v[0];
            m.vertices[1] = t.v[1];
            m.vertices[2] = t.v[2];
            m.normal = face_normal(t.v[0], t.v[1], t.v[2]);
            m.component_name = prim.component;
            scene.meshes.push_back(m);
            scene.object_params.push_back(params);
        }
    }
    scene.blend.assign(scene.meshes.size(), BlendCoefficients{});
    validate_scene(scene);
    return scene;
}

// Target spec serialization ---------------------------------------------------

std::string serialize_target_spec(const TargetSpec& spec) {
    json prims = json::array();
    for (const PrimitiveSpec& p : spec.primitives) {
        json jp;
        switch (p.kind) {
            case PrimitiveSpec::Kind::Box: jp["kind"] = "box"; break;
            case PrimitiveSpec::Kind::Wedge: jp["kind"] = "wedge"; break;
            case PrimitiveSpec::Kind::Cylinder: jp["kind"] = "cylinder"; break;
        }
        jp["center"] = vec_to_json(p.center);
        if (p.kind == PrimitiveSpec::Kind::Cylinder) {
            jp["radius"] = p.radius;
            jp["height"] = p.height;
            jp["segments"] = p.segments;
        } else {
            jp["size"] = vec_to_json(p.size);
        }
        jp["component"] = p.component;
        prims.push_back(std::move(jp));
    }
    json comp_params;
    for (const auto& [name, params] : spec.component_params) comp_params[name] = params_to_json(params);
    return json{{"class_id", spec.class_id},
                {"primitives", std::move(prims)},
                {"component_params", std::move(comp_params)},
                {"default_params", params_to_json(spec.default_params)},
                {"background_params", params_to_json(spec.background_params)},
                {"ground_extent", spec.ground_extent}}
        .dump(2);
}

TargetSpec parse_target_spec(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("target spec parse error: ") + e.what());
    }
    try {
        TargetSpec spec;
        spec.class_id = j.at("class_id").get<std::string>();
        spec.ground_extent = j.at("ground_extent").get<double>();
        spec.default_params = params_from_json(j.at("default_params"));
        spec.background_params = params_from_json(j.at("background_params"));
        for (const auto& [name, jp] : j.at("component_params").items())
            spec.component_params[name] = params_from_json(jp);
        for (const auto& jp : j.at("primitives")) {
            PrimitiveSpec p;
            const std::string kind = jp.at("kind").get<std::string>();
            if (kind == "box") p.kind = PrimitiveSpec::Kind::Box;
            else if (kind == "wedge") p.kind = PrimitiveSpec::Kind::Wedge;
            else if (kind == "cylinder") p.kind = PrimitiveSpec::Kind::Cylinder;
            else throw ParseError("unknown primitive kind \"" + kind + "\"");
            p.center = vec_from_json(jp.at("center"));
            if (p.kind == PrimitiveSpec::Kind::Cylinder) {
                p.radius = jp.at("radius").get<double>();
                p.height = jp.at("height").get<double>();
                p.segments = jp.at("segments").get<int>();
            } else {
                p.size = vec_from_json(jp.at("size"));
            }
            p.component = jp.at("component").get<std::string>();
            spec.primitives.push_back(std::move(p));
        }
        return spec;
    } catch (const json::exception& e) {
        throw ParseError(std::string("target spec parse error: ") + e.what());
    }
}

TargetSpec load_target_spec(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open target spec: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_target_spec(ss.str());
}

void save_target_spec(const TargetSpec& spec, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write target spec: " + path);
    out << serialize_target_spec(spec) << '\n';
}

// Dataset generation ----------------------------------------------------------

DatasetManifest generate_dataset(const std::vector<TargetSpec>& specs, const DatasetOptions& options,
                                 std::uint64_t seed, const std::string& out_dir) {
    if (specs.size() < 2) throw ValidationError("classification dataset needs at least 2 classes");
    if (!(options.azimuth_step_deg > 0.0)) throw ConfigError("azimuth step must be positive");

    fs::create_directories(out_dir);

    DatasetManifest manifest;
    manifest.elevation_deg = options.elevation_deg;
    manifest.options = options;
    manifest.seed = seed;

    struct RawEntry {
        SarImage raw;
        std::string rel_path;
        std::string class_label;
        int class_index;
        double azimuth;
        std::uint64_t speckle_seed;
    };
    std::vector<RawEntry> raws;

    for (std::size_t ci = 0; ci < specs.size(); ++ci) {
        const TargetSpec& spec = specs[ci];
        manifest.class_labels.push_back(spec.class_id);
        Scene scene = generate_target(spec, options.tessellation_level);
        if (scene.mesh_count() < 500 || scene.mesh_count() > 20000)
            throw ValidationError("class \"" + spec.class_id + "\" tessellates to " +
                                  std::to_string(scene.mesh_count()) +
                                  " meshes, outside [500, 20000]");
        const std::string scene_rel = spec.class_id + "/scene.json";
        fs::create_directories(fs::path(out_dir) / spec.class_id);
        save_scene(scene, (fs::path(out_dir) / scene_rel).string());
        manifest.scene_paths.push_back(scene_rel);

        std::vector<double> azimuths;
        for (double az = 0.0; az < 360.0 - 1e-9; az += options.azimuth_step_deg) azimuths.push_back(az);

        std::vector<RawEntry> class_raws(azimuths.size());
        parallel_for(azimuths.size(), options.workers, [&](std::size_t begin, std::size_t end) {
            for (std::size_t ai = begin; ai < end; ++ai) {
                const double az = azimuths[ai];
                const SensorGeometry sensor =
                    sensor_for_scene(scene, options.elevation_deg, az, options.n_rays);
                const Tracer tracer(scene, sensor);
                const std::vector<EchoSample> echoes =
                    tracer.render(scene.object_params, options.render, 1);
                const ImageGrid grid =
                    grid_for_scene(scene, sensor.sensor_distance, options.image_pixels);
                RawEntry e;
                e.raw = focus(echoes, grid);
                std::ostringstream name;
                name << spec.class_id << "/" << az << ".pgm";
                e.rel_path = name.str();
                e.class_label = spec.class_id;
                e.class_index = static_cast<int>(ci);
                e.azimuth = az;
                e.speckle_seed = derive_seed(seed, "speckle-" + spec.class_id,
                                             static_cast<std::uint64_t>(std::llround(az * 1000.0)));
                class_raws[ai] = std::move(e);
            }
        });
        for (auto& e : class_raws) raws.push_back(std::move(e));
    }

    // Apply speckle before freezing the cap so the cap reflects what the
    // classifier actually sees.
    for (RawEntry& e : raws) e.raw = add_speckle(e.raw, e.speckle_seed, options.speckle);

    std::vector<double> intensities;
    for (const RawEntry& e : raws)
        for (double p : e.raw.pixels)
            if (p > 0.0) intensities.push_back(p);
    if (intensities.empty()) throw ValidationError("dataset renders are entirely empty");
    const double q = std::clamp(options.cap_percentile / 100.0, 0.0, 1.0);
    const std::size_t k =
        std::min(intensities.size() - 1,
                 static_cast<std::size_t>(q * static_cast<double>(intensities.size() - 1)));
    std::nth_element(intensities.begin(), intensities.begin() + static_cast<std::ptrdiff_t>(k),
                     intensities.end());
    manifest.scale_cap = intensities[k];

    // Stratified seeded 7:3 split.
    std::vector<int> split(raws.size(), 1);
    Rng rng(derive_seed(seed, "dataset-split"));
    for (std::size_t ci = 0; ci < specs.size(); ++ci) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < raws.size(); ++i)
            if (raws[i].class_index == static_cast<int>(ci)) idx.push_back(i);
        for (std::size_t i = idx.size() - 1; i > 0; --i)
            std::swap(idx[i], idx[rng.uniform_index(i + 1)]);
        const auto n_train = static_cast<std::size_t>(
            std::lround(options.train_fraction * static_cast<double>(idx.size())));
        for (std::size_t i = 0; i < idx.size(); ++i) split[idx[i]] = i < n_train ? 0 : 1;
    }

    for (std::size_t i = 0; i < raws.size(); ++i) {
        const RawEntry& e = raws[i];
        const SarImage normalized = normalize(e.raw, manifest.scale_cap);
        write_image(normalized, (fs::path(out_dir) / e.rel_path).string());
        DatasetManifest::Entry entry;
        entry.path = e.rel_path;
        entry.class_label = e.class_label;
        entry.class_index = e.class_index;
        entry.azimuth_deg = e.azimuth;
        entry.split = split[i];
        entry.speckle_seed = e.speckle_seed;
        manifest.entries.push_back(std::move(entry));
    }

    save_manifest(manifest, (fs::path(out_dir) / "manifest.json").string());
    return manifest;
}

namespace {

json options_to_json(const DatasetOptions& o) {
    return json{{"elevation_deg", o.elevation_deg},
                {"azimuth_step_deg", o.azimuth_step_deg},
                {"image_pixels", o.image_pixels},
                {"n_rays", o.n_rays},
                {"tessellation_level", o.tessellation_level},
                {"speckle", o.speckle},
                {"train_fraction", o.train_fraction},
                {"cap_percentile", o.cap_percentile},
                {"max_bounces", o.render.max_bounces},
                {"intensity_floor", o.render.intensity_floor},
                {"specular_align_deg", o.render.specular_align_deg}};
}

DatasetOptions options_from_json(const json& j) {
    DatasetOptions o;
    o.elevation_deg = j.at("elevation_deg").get<double>();
    o.azimuth_step_deg = j.at("azimuth_step_deg").get<double>();
    o.image_pixels = j.at("image_pixels").get<int>();
    o.n_rays = j.at("n_rays").get<int>();
    o.tessellation_level = j.at("tessellation_level").get<int>();
    o.speckle = j.at("speckle").get<bool>();
    o.train_fraction = j.at("train_fraction").get<double>();
    o.cap_percentile = j.at("cap_percentile").get<double>();
    o.render.max_bounces = j.at("max_bounces").get<int>();
    o.render.intensity_floor = j.at("intensity_floor").get<double>();
    o.render.specular_align_deg = j.at("specular_align_deg").get<double>();
    return o;
}

}  // namespace

void save_manifest(const DatasetManifest& manifest, const std::string& path) {
    json entries = json::array();
    for (const auto& e : manifest.entries)
        entries.push_back(json{{"path", e.path},
                               {"class", e.class_label},
                               {"class_index", e.class_index},
                               {"azimuth_deg", e.azimuth_deg},
                               {"split", e.split == 0 ? "train" : "test"},
                               {"speckle_seed", e.speckle_seed}});
    const json j{{"format_version", 1},
                 {"class_labels", manifest.class_labels},
                 {"scale_cap", manifest.scale_cap},
                 {"elevation_deg", manifest.elevation_deg},
                 {"seed", manifest.seed},
                 {"options", options_to_json(manifest.options)},
                 {"scene_paths", manifest.scene_paths},
                 {"entries", std::move(entries)}};
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write manifest: " + path);
    out << j.dump(2) << '\n';
}

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open manifest: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    json j;
    try {
        j = json::parse(ss.str());
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("manifest parse error: ") + e.what());
    }
    try {
        DatasetManifest m;
        m.class_labels = j.at("class_labels").get<std::vector<std::string>>();
        m.scale_cap = j.at("scale_cap").get<double>();
        m.elevation_deg = j.at("elevation_deg").get<double>();
        m.seed = j.at("seed").get<std::uint64_t>();
        m.options = options_from_json(j.at("options"));
        m.scene_paths = j.at("scene_paths").get<std::vector<std::string>>();
        for (const auto& je : j.at("entries")) {
            DatasetManifest::Entry e;
            e.path = je.at("path").get<std::string>();
            e.class_label = je.at("class").get<std::string>();
            e.class_index = je.at("class_index").get<int>();
            e.azimuth_deg = je.at("azimuth_deg").get<double>();
            e.split = je.at("split").get<std::string>() == "train" ? 0 : 1;
            e.speckle_seed = je.at("speckle_seed").get<std::uint64_t>();
            m.entries.push_back(std::move(e));
        }
        return m;
    } catch (const json::exception& e) {
        throw ParseError(std::string("manifest parse error: ") + e.what());
    }
}

LabeledDataset load_dataset(const std::string& manifest_path) {
    const DatasetManifest manifest = load_manifest(manifest_path);
    const fs::path base = fs::path(manifest_path).parent_path();
    LabeledDataset dataset;
    dataset.n_classes = static_cast<int>(manifest.class_labels.size());
    for (const auto& e : manifest.entries) {
        dataset.images.push_back(read_image((base / e.path).string()));
        dataset.labels.push_back(e.class_index);
        dataset.split.push_back(e.split);
    }
    return dataset;
}

}  // namespace sarsfp
