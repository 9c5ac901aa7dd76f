#include "gestura/comparison.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <nlohmann/json.hpp>

#include "gestura/errors.hpp"
#include "gestura/parallel.hpp"
#include "gestura/training.hpp"

namespace gestura {

using nlohmann::ordered_json;

double execution_probability(const ParticipantProfile& p) {
    const double v = 1.0 - 1.2 * p.tremor_amplitude - 0.4 * (1.0 - p.speed_factor) - 0.3 * (1.0 - p.amplitude_scale);
    return std::clamp(v, 0.2, 1.0);
}

RecognizerAccuracy evaluate_by_group(const GestureModel& model, const ModelParameters& params, const Dataset& dataset,
                                     std::span<const std::size_t> samples, std::size_t threads) {
    const auto classes = model.config().classes;
    std::vector<std::size_t> predicted(samples.size());
    parallel_for(samples.size(), threads, [&](std::size_t i) {
        predicted[i] = predict_label(model, params, dataset.samples.at(samples[i]).input);
    });
    RecognizerAccuracy out{ConfusionMatrix(classes), ConfusionMatrix(classes), ConfusionMatrix(classes)};
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = dataset.samples[samples[i]];
        out.pooled.add(s.label, predicted[i]);
        (dataset.participants.at(s.participant).impaired ? out.impaired : out.unimpaired).add(s.label, predicted[i]);
    }
    return out;
}

std::vector<SimulatedUser> build_users(const Dataset& dataset, double accuracy_impaired, double accuracy_unimpaired,
                                       const UserModelConfig& config) {
    std::vector<SimulatedUser> users;
    users.reserve(dataset.participants.size());
    for (const auto& p : dataset.participants) {
        const double acc = execution_probability(p) * (p.impaired ? accuracy_impaired : accuracy_unimpaired);
        users.emplace_back(p.id, p.impaired, std::clamp(acc, 0.0, 1.0), config);
    }
    return users;
}

SusResponse simulate_sus(double satisfaction, Rng& rng) {
    const double s = std::clamp(satisfaction, 0.0, 1.0);
    SusResponse r{};
    for (std::size_t i = 0; i < kSusItems; ++i) {
        // Odd-numbered items are positively worded, even-numbered negatively.
        const double centre = i % 2 == 0 ? 1.0 + 4.0 * s : 5.0 - 4.0 * s;
        r[i] = static_cast<int>(std::clamp(std::lround(centre + rng.normal(0.0, 0.6)), 1L, 5L));
    }
    return r;
}

namespace {

double group_accuracy(const ConfusionMatrix& cm, double fallback) {
    return cm.total() == 0 ? fallback : accuracy(cm);
}

struct UserRun {
    std::vector<TaskOutcome> outcomes;
    std::vector<double> latencies;
    double wall_ms = 0.0;
    SusResponse sus{};
};

void fill_interaction(MetricsReport& row, const std::vector<SimulatedUser>& users, const QTable* policy,
                      std::optional<InterfaceConfig> fixed, const RLHyperparams& rl, const LatencyModel& latency,
                      const ComparisonConfig& config) {
    std::vector<UserRun> runs(users.size());
    parallel_for(users.size(), config.threads, [&](std::size_t i) {
        const auto& user = users[i];
        // Same per-user seed for every row, so rows differ only by recognizer and policy.
        const auto trans = run_policy(user, policy, fixed, rl, config.episodes_per_user, latency,
                                      derive_seed(config.seed, user.id()));
        auto& run = runs[i];
        double feedback = 0.0;
        for (const auto& t : trans) {
            run.outcomes.push_back({t.success, t.time_s});
            run.latencies.push_back(t.latency_ms);
            run.wall_ms += t.wall_latency_ms;
            feedback += t.feedback;
        }
        const auto n = static_cast<double>(std::max<std::size_t>(1, trans.size()));
        run.wall_ms /= n;
        Rng rng(derive_seed(derive_seed(config.seed, "sus"), user.id()));
        run.sus = simulate_sus(feedback / n, rng);
    });

    auto summarize = [&](auto&& keep, GroupMetrics& g) {
        std::vector<TaskOutcome> outcomes;
        std::vector<SusResponse> sus;
        for (std::size_t i = 0; i < users.size(); ++i) {
            if (!keep(users[i])) continue;
            outcomes.insert(outcomes.end(), runs[i].outcomes.begin(), runs[i].outcomes.end());
            sus.push_back(runs[i].sus);
        }
        g.users = sus.size();
        if (sus.empty()) return;
        g.task_success_rate = task_success_rate(outcomes);
        g.accessibility_score = accessibility_score(sus);
    };
    GroupMetrics all;
    summarize([](const SimulatedUser&) { return true; }, all);
    summarize([](const SimulatedUser& u) { return u.impaired(); }, row.impaired);
    summarize([](const SimulatedUser& u) { return !u.impaired(); }, row.unimpaired);
    row.task_success_rate = all.task_success_rate;
    row.accessibility_score = all.accessibility_score;

    std::vector<double> lat;
    double wall = 0.0;
    for (const auto& r : runs) {
        lat.insert(lat.end(), r.latencies.begin(), r.latencies.end());
        wall += r.wall_ms;
    }
    const auto summary = adjustment_latency(lat);
    row.latency_ms = summary.mean_ms;
    row.latency_p95_ms = summary.p95_ms;
    row.wall_latency_ms = wall / static_cast<double>(runs.size());
}

}  // namespace

std::vector<MetricsReport> run_comparison(const Dataset& dataset, std::span<const std::size_t> test_samples,
                                          std::span<const RecognizerArtifact> recognizers, const QTable* policy,
                                          const RLHyperparams& rl, const ComparisonConfig& config) {
    if (recognizers.empty()) throw ConfigError("comparison needs at least the fused recognizer");
    for (const auto& r : recognizers) {
        if (!r.model || !r.params) throw ConfigError("missing checkpoint for row " + r.row);
        if (*r.params->layout != *r.model->layout()) {
            throw ConfigError("checkpoint for row " + r.row + " does not match its model");
        }
    }
    if (!policy) throw ConfigError("missing adaptation policy for row " + recognizers.front().row);
    if (test_samples.empty()) throw ParameterError("comparison needs a non-empty test split");
    if (dataset.participants.empty()) throw ParameterError("comparison needs participants");
    rl.validate();

    std::vector<MetricsReport> rows;
    double fused_imp = 0.0;
    double fused_unimp = 0.0;
    for (std::size_t k = 0; k < recognizers.size(); ++k) {
        const auto& r = recognizers[k];
        const auto acc = evaluate_by_group(*r.model, *r.params, dataset, test_samples, config.threads);
        auto score = [&](const ConfusionMatrix& cm) { return config.micro_f1 ? f1_micro(cm) : f1_macro(cm); };

        MetricsReport row;
        row.row = r.row;
        row.f1 = score(acc.pooled);
        row.per_class_f1 = f1_per_class(acc.pooled);
        if (acc.impaired.total() > 0) row.impaired.f1 = score(acc.impaired);
        if (acc.unimpaired.total() > 0) row.unimpaired.f1 = score(acc.unimpaired);
        row.recognizer_accuracy_impaired = group_accuracy(acc.impaired, accuracy(acc.pooled));
        row.recognizer_accuracy_unimpaired = group_accuracy(acc.unimpaired, accuracy(acc.pooled));
        if (k == 0) {
            fused_imp = row.recognizer_accuracy_impaired;
            fused_unimp = row.recognizer_accuracy_unimpaired;
        }

        const auto users = build_users(dataset, row.recognizer_accuracy_impaired, row.recognizer_accuracy_unimpaired);
        LatencyModel latency = config.latency;
        latency.recognizer_macs = r.model->mac_count();
        fill_interaction(row, users, policy, std::nullopt, rl, latency, config);
        rows.push_back(std::move(row));
    }

    MetricsReport fixed;
    fixed.row = kStaticRow;
    fixed.recognizer_accuracy_impaired = fused_imp;
    fixed.recognizer_accuracy_unimpaired = fused_unimp;
    const auto users = build_users(dataset, fused_imp, fused_unimp);
    LatencyModel latency = config.latency;
    latency.recognizer_macs = recognizers.front().model->mac_count();
    fill_interaction(fixed, users, nullptr, kStaticConfig, rl, latency, config);
    fixed.latency_ms = config.static_latency_ms;
    fixed.latency_p95_ms = config.static_latency_ms;
    rows.push_back(std::move(fixed));
    return rows;
}

std::string format_metric(double value) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", value);
    return buf;
}

std::string table1_csv(std::span<const MetricsReport> rows) {
    std::string out = "Model,F1-Score,Latency (ms),Task Success Rate (%),Accessibility Score\n";
    for (const auto& r : rows) {
        out += r.row + ',' + (r.f1 ? format_metric(*r.f1) : std::string("-")) + ',' + format_metric(r.latency_ms) +
               ',' + format_metric(r.task_success_rate) + ',' + format_metric(r.accessibility_score) + '\n';
    }
    return out;
}

namespace {

// Numbers go through format_metric so the JSON matches the CSV digit for digit.
ordered_json number(double v) { return ordered_json::parse(format_metric(v)); }

ordered_json optional_number(const std::optional<double>& v) { return v ? number(*v) : ordered_json(nullptr); }

ordered_json group_json(const GroupMetrics& g) {
    return {{"f1", optional_number(g.f1)},
            {"task_success_rate", number(g.task_success_rate)},
            {"accessibility_score", number(g.accessibility_score)},
            {"users", g.users}};
}

}  // namespace

std::string metrics_json(std::span<const MetricsReport> rows) {
    ordered_json arr = ordered_json::array();
    for (const auto& r : rows) {
        ordered_json per_class = ordered_json::array();
        for (double v : r.per_class_f1) per_class.push_back(number(v));
        arr.push_back({{"model", r.row},
                       {"f1", optional_number(r.f1)},
                       {"per_class_f1", per_class},
                       {"latency_ms", number(r.latency_ms)},
                       {"latency_p95_ms", number(r.latency_p95_ms)},
                       {"task_success_rate", number(r.task_success_rate)},
                       {"accessibility_score", number(r.accessibility_score)},
                       {"recognizer_accuracy", {{"impaired", number(r.recognizer_accuracy_impaired)},
                                                {"unimpaired", number(r.recognizer_accuracy_unimpaired)}}},
                       {"impaired", group_json(r.impaired)},
                       {"unimpaired", group_json(r.unimpaired)}});
    }
    return ordered_json{{"rows", arr}}.dump(2) + '\n';
}

std::string format_table(std::span<const MetricsReport> rows) {
    std::ostringstream os;
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-8s %10s %14s %18s %14s\n", "Model", "F1-Score", "Latency (ms)",
                  "Task Success (%)", "Accessibility");
    os << buf;
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%-8s %10s %14s %18s %14s\n", r.row.c_str(),
                      r.f1 ? format_metric(*r.f1).c_str() : "-", format_metric(r.latency_ms).c_str(),
                      format_metric(r.task_success_rate).c_str(), format_metric(r.accessibility_score).c_str());
        os << buf;
    }
    return os.str();
}

}  // namespace gestura
