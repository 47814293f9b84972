#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sarsfp/attack.hpp"
#include "sarsfp/classifier.hpp"
#include "sarsfp/scene.hpp"

namespace sarsfp {

struct ViewRecord {
    double azimuth_deg = 0.0;
    int clean_prediction = 0;
    int adversarial_prediction = 0;
    int true_class = 0;
};

struct EvalAggregates {
    std::optional<double> success_rate_percent;  // empty when nothing was attacked
    double clean_accuracy = 0.0;
    double adversarial_accuracy = 0.0;
    std::size_t n_attacked = 0;
    std::size_t n_fooled = 0;
};

struct EvalReport {
    std::string grouping_key;
    std::vector<ViewRecord> records;
    EvalAggregates aggregates;
};

// Eq. 13 with the strict convention: only views the clean model classifies
// correctly count as attacked. `count_clean_errors` switches to the permissive
// convention where every view counts.
std::optional<double> attack_success_rate(const std::vector<ViewRecord>& records,
                                          bool count_clean_errors = false);

EvalAggregates aggregate_records(const std::vector<ViewRecord>& records,
                                 bool count_clean_errors = false);

// Renders clean and adversarial images for the given azimuths and records
// both predictions.
std::vector<ViewRecord> evaluate_views(const Scene& scene, const ParameterSnapshot& snapshot,
                                       const Classifier& classifier,
                                       const std::vector<double>& azimuths_deg,
                                       int true_class);

EvalReport standard_eval(const Scene& scene, const ParameterSnapshot& snapshot,
                         const Classifier& classifier, const std::vector<double>& azimuths_deg,
                         int true_class, bool count_clean_errors = false);

std::vector<EvalReport> cross_view_eval(const Scene& scene, const ParameterSnapshot& snapshot,
                                        const Classifier& classifier, double elevation_deg,
                                        double azimuth_step_deg, double group_size_deg,
                                        int true_class, bool count_clean_errors = false);

// Entry (i, j): snapshot optimized against model i evaluated on model j.
std::vector<std::vector<EvalReport>> cross_model_eval(
    const Scene& scene, const std::vector<ParameterSnapshot>& snapshots,
    const std::vector<const Classifier*>& classifiers, const std::vector<double>& azimuths_deg,
    int true_class, bool count_clean_errors = false);

struct AblationResult {
    std::string component;
    std::size_t mesh_count = 0;
    double area_share = 0.0;
    EvalReport report;
};

std::vector<AblationResult> ablation_eval(const Scene& scene, const Classifier& classifier,
                                          const AttackConfig& config,
                                          const std::vector<std::string>& components);

struct SweepResult {
    int epochs = 0;
    ParameterSnapshot snapshot;
    EvalReport report;
};

// Captures prefix snapshots of a single max(epoch_list)-epoch run.
std::vector<SweepResult> iteration_sweep(const Scene& scene, const Classifier& classifier,
                                         const AttackConfig& config,
                                         const std::vector<int>& epoch_list);

std::string report_to_json(const EvalReport& report, const std::string& protocol);
std::string report_table(const std::vector<EvalReport>& reports, const std::string& title);

}  // namespace sarsfp
