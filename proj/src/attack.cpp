#include "sarsfp/attack.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "sarsfp/errors.hpp"
#include "sarsfp/rng.hpp"

namespace sarsfp {

using nlohmann::json;

ScatteringParams blend_params(const ScatteringParams& object_params,
                              const ScatteringParams& background_params,
                              const BlendCoefficients& coeffs, double delta) {
    const double a = clamp01(coeffs.alpha + delta);
    const double b = clamp01(coeffs.beta + delta);
    ScatteringParams out = object_params;
    out.f_s = (1.0 - a) * object_params.f_s + a * background_params.f_s;
    out.f_d = (1.0 - b) * object_params.f_d + b * background_params.f_d;
    return out;
}

std::vector<ScatteringParams> effective_params(const Scene& scene,
                                               const std::vector<BlendCoefficients>& blend,
                                               double delta,
                                               const std::vector<std::size_t>& delta_meshes) {
    std::vector<ScatteringParams> eff(scene.mesh_count());
    std::vector<char> perturbed(scene.mesh_count(), 0);
    for (std::size_t i : delta_meshes) perturbed[i] = 1;
    for (std::size_t i = 0; i < scene.mesh_count(); ++i)
        eff[i] = blend_params(scene.object_params[i], scene.background_params, blend[i],
                              perturbed[i] ? delta : 0.0);
    return eff;
}

double clip_gradient(double g, double epsilon) {
    if (!(epsilon > 0.0)) throw ValidationError("clip bound must be positive");
    return std::min(std::max(g, -epsilon), epsilon);
}

namespace {

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamGuard = 1e-8;

void adam_update_coeff(AttackState& state, std::size_t coeff, double g, double lr) {
    state.step_count[coeff] += 1;
    const auto t = static_cast<double>(state.step_count[coeff]);
    state.adam_m[coeff] = kBeta1 * state.adam_m[coeff] + (1.0 - kBeta1) * g;
    state.adam_v[coeff] = kBeta2 * state.adam_v[coeff] + (1.0 - kBeta2) * g * g;
    const double m_hat = state.adam_m[coeff] / (1.0 - std::pow(kBeta1, t));
    const double v_hat = state.adam_v[coeff] / (1.0 - std::pow(kBeta2, t));
    const double step = m_hat / (std::sqrt(v_hat) + kAdamGuard);
    double& value = (coeff % 2 == 0) ? state.blend[coeff / 2].alpha : state.blend[coeff / 2].beta;
    value = clamp01(value + lr * step);  // ascent
}

}  // namespace

void adam_step(AttackState& state, const std::vector<std::size_t>& batch, double g, double lr) {
    for (std::size_t mesh : batch) {
        adam_update_coeff(state, 2 * mesh, g, lr);
        adam_update_coeff(state, 2 * mesh + 1, g, lr);
    }
}

void schedule_lr(AttackState& state, const std::vector<double>& thresholds) {
    if (state.loss_history.empty()) return;
    const double avg = state.loss_history.back();
    while (state.thresholds_consumed < thresholds.size() &&
           avg > thresholds[state.thresholds_consumed]) {
        state.current_lr /= 10.0;
        ++state.thresholds_consumed;
    }
}

double estimate_batch_gradient(const LossFn& loss, const std::vector<BlendCoefficients>& blend,
                               const std::vector<std::size_t>& batch, double fd_step,
                               double* loss_before_out) {
    if (batch.empty()) throw ValidationError("estimate_batch_gradient: batch is empty");
    const double loss_before = loss(blend);
    std::vector<BlendCoefficients> perturbed = blend;
    for (std::size_t mesh : batch) {
        perturbed[mesh].alpha = clamp01(perturbed[mesh].alpha + fd_step);
        perturbed[mesh].beta = clamp01(perturbed[mesh].beta + fd_step);
    }
    const double loss_now = loss(perturbed);
    if (loss_before_out) *loss_before_out = loss_before;
    return (loss_now - loss_before) / fd_step;
}

AttackPipeline::AttackPipeline(const Scene& scene, const Classifier& classifier,
                               const AttackConfig& config)
    : scene_(&scene), classifier_(&classifier), config_(config) {
    views_ = config.view_azimuths_deg.empty() ? AttackConfig::default_views()
                                              : config.view_azimuths_deg;
    caches_.reserve(views_.size());
    for (double az : views_) {
        const SensorGeometry sensor =
            sensor_for_scene(scene, config.elevation_deg, az, config.n_rays);
        const Tracer tracer(scene, sensor);
        caches_.emplace_back(tracer, config.render, config.workers);
        grids_.push_back(grid_for_scene(scene, sensor.sensor_distance, config.image_pixels));
        speckle_seeds_.push_back(
            derive_seed(config.seed, "speckle", static_cast<std::uint64_t>(std::llround(az * 1000.0))));
    }
}

SarImage AttackPipeline::render_params(std::size_t view_index,
                                       const std::vector<ScatteringParams>& eff) const {
    const std::vector<EchoSample> echoes = caches_[view_index].render(eff);
    SarImage raw = focus(echoes, grids_[view_index]);
    raw = add_speckle(raw, speckle_seeds_[view_index], config_.speckle);
    return normalize(raw, config_.scale_cap);
}

SarImage AttackPipeline::render_view(std::size_t view_index,
                                     const std::vector<BlendCoefficients>& blend) const {
    return render_params(view_index, effective_params(*scene_, blend));
}

SarImage AttackPipeline::render_view_clean(std::size_t view_index) const {
    return render_params(view_index, scene_->object_params);
}

double AttackPipeline::average_loss(const std::vector<BlendCoefficients>& blend) const {
    const std::vector<ScatteringParams> eff = effective_params(*scene_, blend);
    std::vector<double> losses(views_.size(), 0.0);
    parallel_for(views_.size(), config_.workers, [&](std::size_t begin, std::size_t end) {
        for (std::size_t v = begin; v < end; ++v) {
            const SarImage image = render_params(v, eff);
            const std::vector<double> probs = classifier_->forward(image.pixels);
            losses[v] = cross_entropy(probs, config_.target_class);
        }
    });
    double sum = 0.0;
    for (double l : losses) sum += l;
    return sum / static_cast<double>(losses.size());
}

namespace {

void validate_attack_config(const AttackConfig& config) {
    if (!(config.fd_step > 0.0)) throw ConfigError("fd_step must be positive");
    if (!(config.lr > 0.0)) throw ConfigError("lr must be positive");
    if (config.epochs < 0) throw ConfigError("epochs must be non-negative");
    if (!(config.clip_bound > 0.0)) throw ConfigError("clip_bound must be positive");
    if (!std::is_sorted(config.lr_drop_thresholds.begin(), config.lr_drop_thresholds.end()))
        throw ConfigError("lr_drop_thresholds must be ascending");
    if (!(config.scale_cap > 0.0)) throw ConfigError("scale_cap must be positive");
}

}  // namespace

ParameterSnapshot run_attack(const Scene& scene, const Classifier& classifier,
                             const AttackConfig& config,
                             const std::function<void(int, const AttackState&)>& epoch_callback) {
    validate_attack_config(config);
    const std::size_t n = scene.mesh_count();

    std::vector<std::size_t> mask;
    if (config.component_restriction.empty()) {
        mask.resize(n);
        for (std::size_t i = 0; i < n; ++i) mask[i] = i;
    } else {
        mask = component_mask(scene, config.component_restriction);
        if (mask.empty()) throw ValidationError("component restriction selects no meshes");
    }

    AttackState state;
    state.blend = scene.blend;
    state.adam_m.assign(2 * n, 0.0);
    state.adam_v.assign(2 * n, 0.0);
    state.step_count.assign(2 * n, 0);
    state.current_lr = config.lr;

    ParameterSnapshot snapshot;
    snapshot.config = config;
    snapshot.scene_hash = scene_fingerprint(scene);

    if (config.epochs > 0) {
        AttackPipeline pipeline(scene, classifier, config);
        const LossFn loss = [&pipeline](const std::vector<BlendCoefficients>& b) {
            return pipeline.average_loss(b);
        };
        const std::size_t denominator = std::min(config.batch_denominator, mask.size());
        const BatchSchedule schedule = partition_batches(mask.size(), denominator, config.seed);

        for (int epoch = 0; epoch < config.epochs; ++epoch) {
            const double epoch_lr = state.current_lr;
            double loss_sum = 0.0;
            std::size_t loss_count = 0;
            for (const auto& local_batch : schedule.batches) {
                std::vector<std::size_t> batch;
                batch.reserve(local_batch.size());
                for (std::size_t local : local_batch) batch.push_back(mask[local]);

                if (config.per_parameter_fd) {
                    const double loss_before = loss(state.blend);
                    loss_sum += loss_before;
                    ++loss_count;
                    for (std::size_t mesh : batch) {
                        for (int which = 0; which < 2; ++which) {
                            std::vector<BlendCoefficients> perturbed = state.blend;
                            double& coeff = which == 0 ? perturbed[mesh].alpha : perturbed[mesh].beta;
                            coeff = clamp01(coeff + config.fd_step);
                            const double g = clip_gradient(
                                (loss(perturbed) - loss_before) / config.fd_step, config.clip_bound);
                            adam_update_coeff(state, 2 * mesh + which, g, epoch_lr);
                        }
                    }
                } else {
                    double loss_before = 0.0;
                    const double g_raw = estimate_batch_gradient(loss, state.blend, batch,
                                                                 config.fd_step, &loss_before);
                    loss_sum += loss_before;
                    ++loss_count;
                    const double g = clip_gradient(g_raw, config.clip_bound);
                    adam_step(state, batch, g, epoch_lr);
                }
            }
            state.loss_history.push_back(loss_sum / static_cast<double>(loss_count));
            snapshot.lr_history.push_back(epoch_lr);
            schedule_lr(state, config.lr_drop_thresholds);
            if (epoch_callback) epoch_callback(epoch + 1, state);
        }
    }

    snapshot.blend = state.blend;
    snapshot.loss_history = state.loss_history;
    return snapshot;
}

ParameterSnapshot random_baseline(const Scene& scene, const AttackConfig& config,
                                  std::uint64_t seed) {
    ParameterSnapshot snapshot;
    snapshot.config = config;
    snapshot.scene_hash = scene_fingerprint(scene);
    Rng rng(derive_seed(seed, "random-baseline"));
    snapshot.blend.resize(scene.mesh_count());
    for (auto& b : snapshot.blend) {
        b.alpha = rng.uniform01();
        b.beta = rng.uniform01();
    }
    return snapshot;
}

// Snapshot persistence --------------------------------------------------------

namespace {

constexpr int kSnapshotFormatVersion = 1;

json config_to_json(const AttackConfig& c) {
    return json{{"fd_step", c.fd_step},
                {"lr", c.lr},
                {"epochs", c.epochs},
                {"batch_denominator", c.batch_denominator},
                {"clip_bound", c.clip_bound},
                {"lr_drop_thresholds", c.lr_drop_thresholds},
                {"view_azimuths_deg", c.view_azimuths_deg},
                {"elevation_deg", c.elevation_deg},
                {"target_class", c.target_class},
                {"seed", c.seed},
                {"component_restriction",
                 std::vector<std::string>(c.component_restriction.begin(),
                                          c.component_restriction.end())},
                {"per_parameter_fd", c.per_parameter_fd},
                {"scale_cap", c.scale_cap},
                {"speckle", c.speckle},
                {"n_rays", c.n_rays},
                {"image_pixels", c.image_pixels},
                {"max_bounces", c.render.max_bounces},
                {"intensity_floor", c.render.intensity_floor},
                {"specular_align_deg", c.render.specular_align_deg},
                {"workers", c.workers}};
}

AttackConfig config_from_json(const json& j) {
    AttackConfig c;
    c.fd_step = j.at("fd_step").get<double>();
    c.lr = j.at("lr").get<double>();
    c.epochs = j.at("epochs").get<int>();
    c.batch_denominator = j.at("batch_denominator").get<std::size_t>();
    c.clip_bound = j.at("clip_bound").get<double>();
    c.lr_drop_thresholds = j.at("lr_drop_thresholds").get<std::vector<double>>();
    c.view_azimuths_deg = j.at("view_azimuths_deg").get<std::vector<double>>();
    c.elevation_deg = j.at("elevation_deg").get<double>();
    c.target_class = j.at("target_class").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    const auto restriction = j.at("component_restriction").get<std::vector<std::string>>();
    c.component_restriction = std::set<std::string>(restriction.begin(), restriction.end());
    c.per_parameter_fd = j.at("per_parameter_fd").get<bool>();
    c.scale_cap = j.at("scale_cap").get<double>();
    c.speckle = j.at("speckle").get<bool>();
    c.n_rays = j.at("n_rays").get<int>();
    c.image_pixels = j.at("image_pixels").get<int>();
    c.render.max_bounces = j.at("max_bounces").get<int>();
    c.render.intensity_floor = j.at("intensity_floor").get<double>();
    c.render.specular_align_deg = j.at("specular_align_deg").get<double>();
    c.workers = j.at("workers").get<int>();
    return c;
}

}  // namespace

std::string serialize_snapshot(const ParameterSnapshot& snapshot) {
    json blend = json::array();
    for (const auto& b : snapshot.blend)
        blend.push_back(json{{"alpha", b.alpha}, {"beta", b.beta}});
    json j{{"format_version", kSnapshotFormatVersion},
           {"scene_hash", snapshot.scene_hash},
           {"config", config_to_json(snapshot.config)},
           {"blend", std::move(blend)},
           {"loss_history", snapshot.loss_history},
           {"lr_history", snapshot.lr_history}};
    return j.dump(2);
}

ParameterSnapshot parse_snapshot(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("snapshot parse error: ") + e.what());
    }
    try {
        if (j.at("format_version").get<int>() != kSnapshotFormatVersion)
            throw ParseError("unsupported snapshot format version");
        ParameterSnapshot s;
        s.scene_hash = j.at("scene_hash").get<std::uint64_t>();
        s.config = config_from_json(j.at("config"));
        for (const auto& jb : j.at("blend")) {
            BlendCoefficients b;
            b.alpha = jb.at("alpha").get<double>();
            b.beta = jb.at("beta").get<double>();
            s.blend.push_back(b);
        }
        s.loss_history = j.at("loss_history").get<std::vector<double>>();
        s.lr_history = j.at("lr_history").get<std::vector<double>>();
        return s;
    } catch (const json::exception& e) {
        throw ParseError(std::string("snapshot parse error: ") + e.what());
    }
}

void save_snapshot(const ParameterSnapshot& snapshot, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write snapshot file: " + path);
    out << serialize_snapshot(snapshot) << '\n';
}

ParameterSnapshot load_snapshot(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open snapshot file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_snapshot(ss.str());
}

void write_loss_csv(const ParameterSnapshot& snapshot, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write loss CSV: " + path);
    out << "epoch,avg_loss,lr\n";
    for (std::size_t i = 0; i < snapshot.loss_history.size(); ++i) {
        const double lr = i < snapshot.lr_history.size() ? snapshot.lr_history[i] : 0.0;
        out << (i + 1) << "," << snapshot.loss_history[i] << "," << lr << "\n";
    }
}

}  // namespace sarsfp
