#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gestura/adaptui.hpp"
#include "gestura/metrics.hpp"
#include "gestura/model.hpp"
#include "gestura/synthdata.hpp"

namespace gestura {

// Probability that a participant performs a gesture as intended, before recognition.
double execution_probability(const ParticipantProfile& profile);

struct GroupMetrics {
    std::optional<double> f1;
    double task_success_rate = 0.0;
    double accessibility_score = 0.0;
    std::size_t users = 0;
};

struct MetricsReport {
    std::string row;
    std::optional<double> f1;                 // macro (or micro) F1; empty for the static row
    std::vector<double> per_class_f1;
    double latency_ms = 0.0;
    double latency_p95_ms = 0.0;
    double task_success_rate = 0.0;
    double accessibility_score = 0.0;
    GroupMetrics impaired;
    GroupMetrics unimpaired;
    double recognizer_accuracy_impaired = 0.0;
    double recognizer_accuracy_unimpaired = 0.0;
    double wall_latency_ms = 0.0;  // measured; kept out of metrics.json so that file stays reproducible
};

struct ComparisonConfig {
    std::size_t episodes_per_user = 10;
    LatencyModel latency;
    double static_latency_ms = 300.0;  // modeling constant for the non-adaptive row
    bool micro_f1 = false;
    std::uint64_t seed = 0;
    std::size_t threads = 1;
};

struct RecognizerArtifact {
    std::string row;
    const GestureModel* model = nullptr;
    const ModelParameters* params = nullptr;
};

struct RecognizerAccuracy {
    ConfusionMatrix pooled;
    ConfusionMatrix impaired;
    ConfusionMatrix unimpaired;
};

RecognizerAccuracy evaluate_by_group(const GestureModel& model, const ModelParameters& params, const Dataset& dataset,
                                     std::span<const std::size_t> samples, std::size_t threads = 1);

// One simulated user per participant, with gesture accuracy = execution probability times
// the recognizer's accuracy on that participant's group.
std::vector<SimulatedUser> build_users(const Dataset& dataset, double accuracy_impaired, double accuracy_unimpaired,
                                       const UserModelConfig& config = {});

// Simulated SUS questionnaire for a user whose mean satisfaction is `satisfaction` in [0, 1].
SusResponse simulate_sus(double satisfaction, Rng& rng);

// Rows in order: the fused recognizer with the adaptive policy, each single-modality
// recognizer with the adaptive policy, then the fused recognizer on the static interface.
// `recognizers` must hold the fused artifact first.
std::vector<MetricsReport> run_comparison(const Dataset& dataset, std::span<const std::size_t> test_samples,
                                          std::span<const RecognizerArtifact> recognizers, const QTable* policy,
                                          const RLHyperparams& rl, const ComparisonConfig& config);

inline constexpr const char* kStaticRow = "Static";

// Number formatting used by every metrics file: 6 significant digits.
std::string format_metric(double value);

std::string table1_csv(std::span<const MetricsReport> rows);
std::string metrics_json(std::span<const MetricsReport> rows);
std::string format_table(std::span<const MetricsReport> rows);

}  // namespace gestura
