#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sarsfp/classifier.hpp"
#include "sarsfp/imaging.hpp"
#include "sarsfp/raytracer.hpp"
#include "sarsfp/scene.hpp"

namespace sarsfp {

struct AttackConfig {
    double fd_step = 0.001;            // delta
    double lr = 0.001;                 // eta
    int epochs = 25;
    std::size_t batch_denominator = 20;
    double clip_bound = 1.0;           // epsilon
    std::vector<double> lr_drop_thresholds = {2.0, 4.0};  // nats, ascending
    std::vector<double> view_azimuths_deg;                // default 0,10,...,350
    double elevation_deg = 15.0;
    int target_class = 0;              // Y, the true class being attacked
    std::uint64_t seed = 0;
    std::set<std::string> component_restriction;          // empty = whole target
    bool per_parameter_fd = false;     // one difference per coefficient instead of per batch
    double scale_cap = 1.0;            // run-level normalization constant
    bool speckle = true;
    int n_rays = 128;
    int image_pixels = 128;
    RenderOptions render;
    int workers = 1;

    static std::vector<double> default_views() {
        std::vector<double> v;
        for (int az = 0; az < 360; az += 10) v.push_back(az);
        return v;
    }
};

struct AttackState {
    std::vector<BlendCoefficients> blend;
    std::vector<double> adam_m;        // 2 entries per mesh: alpha then beta
    std::vector<double> adam_v;
    std::vector<std::uint64_t> step_count;
    std::vector<double> loss_history;  // per-epoch average loss
    double current_lr = 0.001;
    std::size_t thresholds_consumed = 0;
};

struct ParameterSnapshot {
    std::vector<BlendCoefficients> blend;
    AttackConfig config;
    std::vector<double> loss_history;
    std::vector<double> lr_history;    // parallel to loss_history
    std::uint64_t scene_hash = 0;
};

// Eq.-level operations -------------------------------------------------------

ScatteringParams blend_params(const ScatteringParams& object_params,
                              const ScatteringParams& background_params,
                              const BlendCoefficients& coeffs, double delta);

// Effective per-mesh parameters under the given blend (delta applied to the
// listed meshes only; empty list with delta 0 gives the plain adversarial T).
std::vector<ScatteringParams> effective_params(const Scene& scene,
                                               const std::vector<BlendCoefficients>& blend,
                                               double delta = 0.0,
                                               const std::vector<std::size_t>& delta_meshes = {});

double clip_gradient(double g, double epsilon);

// Standard Adam ascent step on the batch coefficients (beta1 0.9, beta2 0.999,
// guard 1e-8, per-coefficient bias correction); results clamped to [0,1].
void adam_step(AttackState& state, const std::vector<std::size_t>& batch, double g, double lr);

// Consumes ascending thresholds: each first crossing divides lr by 10.
void schedule_lr(AttackState& state, const std::vector<double>& thresholds);

// Loss functional abstraction: maps a blend configuration to a scalar loss.
// The renderer+classifier pipeline provides the real one; tests substitute
// differentiable surrogates to check the estimator.
using LossFn = std::function<double(const std::vector<BlendCoefficients>&)>;

// Forward-difference gradient shared by every coefficient of the batch.
double estimate_batch_gradient(const LossFn& loss, const std::vector<BlendCoefficients>& blend,
                               const std::vector<std::size_t>& batch, double fd_step,
                               double* loss_before_out = nullptr);

// Render + classify pipeline --------------------------------------------------

// Renders every configured view once per call; used for the attack loss and
// for evaluation. View caches are built once per (scene, views) pair.
class AttackPipeline {
public:
    AttackPipeline(const Scene& scene, const Classifier& classifier, const AttackConfig& config);

    SarImage render_view(std::size_t view_index,
                         const std::vector<BlendCoefficients>& blend) const;
    SarImage render_view_clean(std::size_t view_index) const;

    double average_loss(const std::vector<BlendCoefficients>& blend) const;

    std::size_t view_count() const { return views_.size(); }
    double view_azimuth(std::size_t view_index) const { return views_[view_index]; }
    const Scene& scene() const { return *scene_; }
    const Classifier& classifier() const { return *classifier_; }
    const AttackConfig& config() const { return config_; }

private:
    SarImage render_params(std::size_t view_index, const std::vector<ScatteringParams>& eff) const;

    const Scene* scene_;
    const Classifier* classifier_;
    AttackConfig config_;
    std::vector<double> views_;
    std::vector<ViewCache> caches_;
    std::vector<ImageGrid> grids_;
    std::vector<std::uint64_t> speckle_seeds_;
};

// The full outer loop (Definition 3.2). `epoch_callback`, when set, receives
// the state after every epoch; the iteration sweep uses it to capture prefix
// snapshots.
ParameterSnapshot run_attack(const Scene& scene, const Classifier& classifier,
                             const AttackConfig& config,
                             const std::function<void(int, const AttackState&)>& epoch_callback = {});

ParameterSnapshot random_baseline(const Scene& scene, const AttackConfig& config,
                                  std::uint64_t seed);

// Snapshot persistence (JSON) and the loss CSV.
std::string serialize_snapshot(const ParameterSnapshot& snapshot);
ParameterSnapshot parse_snapshot(const std::string& json_text);
void save_snapshot(const ParameterSnapshot& snapshot, const std::string& path);
ParameterSnapshot load_snapshot(const std::string& path);
void write_loss_csv(const ParameterSnapshot& snapshot, const std::string& path);

}  // namespace sarsfp
