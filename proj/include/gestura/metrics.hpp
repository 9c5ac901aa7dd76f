#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace gestura {

// Rows are true classes, columns predicted classes.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(std::size_t classes = 15);

    void add(std::size_t truth, std::size_t predicted, std::uint64_t count = 1);
    void merge(const ConfusionMatrix& other);

    std::size_t classes() const noexcept { return classes_; }
    std::uint64_t at(std::size_t truth, std::size_t predicted) const;
    std::uint64_t total() const noexcept { return total_; }
    std::uint64_t true_positives(std::size_t c) const { return at(c, c); }
    std::uint64_t false_positives(std::size_t c) const;
    std::uint64_t false_negatives(std::size_t c) const;

    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

private:
    std::size_t classes_;
    std::vector<std::uint64_t> counts_;
    std::uint64_t total_ = 0;
};

// Per-class F1 with F1 = 0 when precision and recall are both undefined or zero.
std::vector<double> f1_per_class(const ConfusionMatrix& cm);
double f1_macro(const ConfusionMatrix& cm);
double f1_micro(const ConfusionMatrix& cm);
double accuracy(const ConfusionMatrix& cm);

struct LatencySummary {
    double mean_ms = 0.0;
    double p95_ms = 0.0;
};

// Mean and nearest-rank 95th percentile; empty input is a parameter error.
LatencySummary adjustment_latency(std::span<const double> latencies_ms);

struct TaskOutcome {
    bool success = false;
    double time_s = 0.0;
};

inline constexpr double kTaskTimeLimitS = 30.0;

// Percentage of outcomes that succeeded within the time limit (closed boundary).
double task_success_rate(std::span<const TaskOutcome> outcomes);

inline constexpr std::size_t kSusItems = 10;
using SusResponse = std::array<int, kSusItems>;

// Standard SUS score of one respondent, rescaled to [0, 1].
double sus_score(const SusResponse& response);
// Mean SUS score over respondents; empty input is a parameter error.
double accessibility_score(std::span<const SusResponse> responses);

}  // namespace gestura
