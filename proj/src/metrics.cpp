#include "gestura/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gestura/errors.hpp"

namespace gestura {

ConfusionMatrix::ConfusionMatrix(std::size_t classes) : classes_(classes), counts_(classes * classes, 0) {
    if (classes == 0) throw ParameterError("confusion matrix needs at least one class");
}

void ConfusionMatrix::add(std::size_t truth, std::size_t predicted, std::uint64_t count) {
    if (truth >= classes_ || predicted >= classes_) {
        throw ParameterError("class index out of range: " + std::to_string(std::max(truth, predicted)));
    }
    counts_[truth * classes_ + predicted] += count;
    total_ += count;
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
    if (other.classes_ != classes_) throw ShapeError("confusion matrices differ in class count");
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
    total_ += other.total_;
}

std::uint64_t ConfusionMatrix::at(std::size_t truth, std::size_t predicted) const {
    if (truth >= classes_ || predicted >= classes_) throw ParameterError("class index out of range");
    return counts_[truth * classes_ + predicted];
}

std::uint64_t ConfusionMatrix::false_positives(std::size_t c) const {
    std::uint64_t n = 0;
    for (std::size_t t = 0; t < classes_; ++t) {
        if (t != c) n += at(t, c);
    }
    return n;
}

std::uint64_t ConfusionMatrix::false_negatives(std::size_t c) const {
    std::uint64_t n = 0;
    for (std::size_t p = 0; p < classes_; ++p) {
        if (p != c) n += at(c, p);
    }
    return n;
}

std::vector<double> f1_per_class(const ConfusionMatrix& cm) {
    std::vector<double> out(cm.classes(), 0.0);
    for (std::size_t c = 0; c < cm.classes(); ++c) {
        // 2PR/(P+R) reduces to 2TP/(2TP+FP+FN).
        const auto tp = static_cast<double>(cm.true_positives(c));
        const auto denom = 2.0 * tp + static_cast<double>(cm.false_positives(c) + cm.false_negatives(c));
        out[c] = denom > 0.0 ? 2.0 * tp / denom : 0.0;
    }
    return out;
}

double f1_macro(const ConfusionMatrix& cm) {
    const auto per = f1_per_class(cm);
    double sum = 0.0;
    for (double f : per) sum += f;
    return sum / static_cast<double>(per.size());
}

double f1_micro(const ConfusionMatrix& cm) {
    std::uint64_t tp = 0, fp = 0, fn = 0;
    for (std::size_t c = 0; c < cm.classes(); ++c) {
        tp += cm.true_positives(c);
        fp += cm.false_positives(c);
        fn += cm.false_negatives(c);
    }
    const double denom = 2.0 * static_cast<double>(tp) + static_cast<double>(fp + fn);
    return denom > 0.0 ? 2.0 * static_cast<double>(tp) / denom : 0.0;
}

double accuracy(const ConfusionMatrix& cm) {
    if (cm.total() == 0) return 0.0;
    std::uint64_t tp = 0;
    for (std::size_t c = 0; c < cm.classes(); ++c) tp += cm.true_positives(c);
    return static_cast<double>(tp) / static_cast<double>(cm.total());
}

LatencySummary adjustment_latency(std::span<const double> latencies_ms) {
    if (latencies_ms.empty()) throw ParameterError("adjustment latency needs at least one record");
    double sum = 0.0;
    for (double v : latencies_ms) {
        if (!std::isfinite(v) || v < 0.0) throw ValidationError("latency must be finite and non-negative");
        sum += v;
    }
    std::vector<double> sorted(latencies_ms.begin(), latencies_ms.end());
    std::sort(sorted.begin(), sorted.end());
    const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(sorted.size())));
    return {sum / static_cast<double>(sorted.size()), sorted[std::max<std::size_t>(rank, 1) - 1]};
}

double task_success_rate(std::span<const TaskOutcome> outcomes) {
    if (outcomes.empty()) throw ParameterError("task success rate needs at least one record");
    std::size_t ok = 0;
    for (const auto& o : outcomes) {
        if (o.time_s < 0.0) throw ParameterError("task time must be non-negative");
        if (o.success && o.time_s <= kTaskTimeLimitS) ++ok;
    }
    return 100.0 * static_cast<double>(ok) / static_cast<double>(outcomes.size());
}

double sus_score(const SusResponse& response) {
    int points = 0;
    for (std::size_t i = 0; i < kSusItems; ++i) {
        const int v = response[i];
        if (v < 1 || v > 5) throw ValidationError("SUS item " + std::to_string(i + 1) + " outside 1..5");
        // Odd-numbered items are positively worded, even-numbered negatively.
        points += (i % 2 == 0) ? v - 1 : 5 - v;
    }
    return static_cast<double>(points) * 2.5 / 100.0;
}

double accessibility_score(std::span<const SusResponse> responses) {
    if (responses.empty()) throw ParameterError("accessibility score needs at least one respondent");
    double sum = 0.0;
    for (const auto& r : responses) sum += sus_score(r);
    return sum / static_cast<double>(responses.size());
}

}  // namespace gestura
