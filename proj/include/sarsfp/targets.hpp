#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sarsfp/classifier.hpp"
#include "sarsfp/scene.hpp"

namespace sarsfp {

struct PrimitiveSpec {
    enum class Kind { Box, Wedge, Cylinder };
    Kind kind = Kind::Box;
    Vec3 center;
    Vec3 size;             // Box/Wedge: full extents (dx, dy, dz)
    double radius = 0.0;   // Cylinder
    double height = 0.0;   // Cylinder
    int segments = 24;     // Cylinder
    std::string component;
};

struct TargetSpec {
    std::string class_id;
    std::vector<PrimitiveSpec> primitives;
    std::map<std::string, ScatteringParams> component_params;
    ScatteringParams default_params{0.7, 0.6, 0.5, 1.0};
    ScatteringParams background_params{0.05, 0.10, 1.0, 1.0};
    double ground_extent = 10.0;
};

// The three desk-scale classes: a tank-like composite with the six-part
// component taxonomy, a rounded silhouette, and a deliberately outlier-shaped
// gantry frame.
std::vector<TargetSpec> builtin_target_specs();

TargetSpec parse_target_spec(const std::string& json_text);
std::string serialize_target_spec(const TargetSpec& spec);
TargetSpec load_target_spec(const std::string& path);
void save_target_spec(const TargetSpec& spec, const std::string& path);

// Deterministic triangle soup with component labels; each tessellation level
// splits every triangle into 4. Blend coefficients are zero-initialized.
Scene generate_target(const TargetSpec& spec, int tessellation_level);

struct DatasetOptions {
    double elevation_deg = 15.0;
    double azimuth_step_deg = 1.0;
    int image_pixels = 128;
    int n_rays = 128;
    int tessellation_level = 2;
    bool speckle = true;
    double train_fraction = 0.7;
    double cap_percentile = 99.5;
    RenderOptions render;
    int workers = 1;
};

struct DatasetManifest {
    std::vector<std::string> class_labels;
    double scale_cap = 1.0;
    double elevation_deg = 15.0;
    DatasetOptions options;
    std::uint64_t seed = 0;
    struct Entry {
        std::string path;        // relative to the manifest directory
        std::string class_label;
        int class_index = 0;
        double azimuth_deg = 0.0;
        int split = 0;           // 0 train, 1 test
        std::uint64_t speckle_seed = 0;
    };
    std::vector<Entry> entries;
    std::vector<std::string> scene_paths;  // per class, relative
};

// Renders every class at every azimuth, freezes the normalization cap at the
// requested clean-set percentile, splits 7:3 stratified by class, and writes
// dataset/<class>/<azimuth>.pgm plus manifest.json under out_dir.
DatasetManifest generate_dataset(const std::vector<TargetSpec>& specs, const DatasetOptions& options,
                                 std::uint64_t seed, const std::string& out_dir);

DatasetManifest load_manifest(const std::string& path);
void save_manifest(const DatasetManifest& manifest, const std::string& path);

// Reads every image referenced by a manifest into memory.
LabeledDataset load_dataset(const std::string& manifest_path);

}  // namespace sarsfp
