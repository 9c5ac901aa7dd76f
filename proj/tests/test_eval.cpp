#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "gestura/comparison.hpp"
#include "gestura/errors.hpp"
#include "support.hpp"

using namespace gestura;

namespace {

struct Pair {
    std::size_t truth;
    std::size_t predicted;
};

// F1 from raw prediction lists via precision and recall, no confusion matrix.
double oracle_macro_f1(const std::vector<Pair>& pairs, std::size_t classes) {
    double sum = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
        double tp = 0, predicted = 0, actual = 0;
        for (const auto& p : pairs) {
            tp += p.truth == c && p.predicted == c;
            predicted += p.predicted == c;
            actual += p.truth == c;
        }
        const double precision = predicted > 0 ? tp / predicted : 0.0;
        const double recall = actual > 0 ? tp / actual : 0.0;
        sum += precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
    }
    return sum / static_cast<double>(classes);
}

ConfusionMatrix matrix(const std::vector<Pair>& pairs, std::size_t classes) {
    ConfusionMatrix cm(classes);
    for (const auto& p : pairs) cm.add(p.truth, p.predicted);
    return cm;
}

double oracle_sus(const SusResponse& r) {
    double odd = 0, even = 0;
    for (std::size_t i = 0; i < kSusItems; i += 2) odd += r[i] - 1;
    for (std::size_t i = 1; i < kSusItems; i += 2) even += 5 - r[i];
    return (odd + even) * 2.5 / 100.0;
}

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("f1 examples") {
    ConfusionMatrix diag(3);
    for (std::size_t c = 0; c < 3; ++c) diag.add(c, c, 5);
    CHECK(f1_macro(diag) == 1.0);
    CHECK(f1_micro(diag) == 1.0);

    ConfusionMatrix two(2);
    two.add(0, 0, 2);  // TP 2
    two.add(1, 0, 1);  // FP 1
    two.add(0, 1, 1);  // FN 1
    CHECK(f1_per_class(two)[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));

    // every prediction is class 0
    std::vector<Pair> pairs;
    for (std::size_t i = 0; i < 30; ++i) pairs.push_back({i % 3, 0});
    const auto cm = matrix(pairs, 3);
    CHECK(f1_macro(cm) == doctest::Approx(oracle_macro_f1(pairs, 3)).epsilon(1e-14));
    CHECK(f1_per_class(cm)[1] == 0.0);
    CHECK(f1_per_class(cm)[2] == 0.0);

    CHECK(f1_macro(ConfusionMatrix(4)) == 0.0);
    CHECK_THROWS_AS(diag.add(3, 0), ParameterError);
}

TEST_CASE("f1 against prediction-list oracle") {
    Rng rng(11);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t classes = 2 + rng.below(14);
        const std::size_t n = 1 + rng.below(300);
        std::vector<Pair> pairs;
        for (std::size_t i = 0; i < n; ++i) {
            const auto t = rng.below(classes);
            pairs.push_back({t, rng.bernoulli(0.6) ? t : rng.below(classes)});
        }
        const auto cm = matrix(pairs, classes);
        CHECK(std::abs(f1_macro(cm) - oracle_macro_f1(pairs, classes)) < 1e-12);
        double correct = 0;
        for (const auto& p : pairs) correct += p.truth == p.predicted;
        // single-label micro F1 equals accuracy
        CHECK(std::abs(f1_micro(cm) - correct / static_cast<double>(n)) < 1e-12);
        CHECK(std::abs(accuracy(cm) - correct / static_cast<double>(n)) < 1e-12);
    }
}

TEST_CASE("metric ranges") {
    Rng rng(12);
    for (int trial = 0; trial < 10000; ++trial) {
        ConfusionMatrix cm(1 + rng.below(15));
        const std::size_t n = rng.below(20);
        for (std::size_t i = 0; i < n; ++i) cm.add(rng.below(cm.classes()), rng.below(cm.classes()));
        const double f = f1_macro(cm);
        CHECK(f >= 0.0);
        CHECK(f <= 1.0);

        std::vector<TaskOutcome> outcomes(1 + rng.below(10));
        for (auto& o : outcomes) o = {rng.bernoulli(0.5), rng.uniform(0.0, 60.0)};
        const double t = task_success_rate(outcomes);
        CHECK(t >= 0.0);
        CHECK(t <= 100.0);

        std::vector<SusResponse> sus(1 + rng.below(5));
        for (auto& r : sus)
            for (auto& v : r) v = 1 + static_cast<int>(rng.below(5));
        const double a = accessibility_score(sus);
        CHECK(a >= 0.0);
        CHECK(a <= 1.0);
    }
}

TEST_CASE("latency summary") {
    const std::vector<double> one{7.0};
    CHECK(adjustment_latency(one).mean_ms == 7.0);
    CHECK(adjustment_latency(one).p95_ms == 7.0);
    const std::vector<double> three{10.0, 20.0, 30.0};
    CHECK(adjustment_latency(three).mean_ms == 20.0);
    CHECK(adjustment_latency(three).p95_ms == 30.0);
    std::vector<double> hundred(100);
    for (std::size_t i = 0; i < 100; ++i) hundred[i] = static_cast<double>(100 - i);
    CHECK(adjustment_latency(hundred).p95_ms == 95.0);
    CHECK_THROWS_AS(adjustment_latency(std::vector<double>{}), ParameterError);
    CHECK_THROWS_AS(adjustment_latency(std::vector<double>{-1.0}), ValidationError);
}

TEST_CASE("task success") {
    const std::vector<TaskOutcome> boundary{{true, 30.0}};
    CHECK(task_success_rate(boundary) == 100.0);
    const std::vector<TaskOutcome> over{{true, 30.000001}};
    CHECK(task_success_rate(over) == 0.0);
    const std::vector<TaskOutcome> four{{true, 5.0}, {true, 12.0}, {false, 3.0}, {true, 29.0}};
    CHECK(task_success_rate(four) == 75.0);
    CHECK_THROWS_AS(task_success_rate(std::vector<TaskOutcome>{}), ParameterError);

    Rng rng(13);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<TaskOutcome> o(1 + rng.below(50));
        double ok = 0;
        for (auto& x : o) {
            x = {rng.bernoulli(0.7), rng.uniform(0.0, 45.0)};
            ok += x.success && !(x.time_s > 30.0);
        }
        CHECK(std::abs(task_success_rate(o) - 100.0 * ok / static_cast<double>(o.size())) < 1e-12);
    }
}

TEST_CASE("SUS scoring") {
    SusResponse fives;
    fives.fill(5);
    CHECK(sus_score(fives) == 0.5);
    SusResponse best{5, 1, 5, 1, 5, 1, 5, 1, 5, 1};
    CHECK(sus_score(best) == 1.0);
    SusResponse worst{1, 5, 1, 5, 1, 5, 1, 5, 1, 5};
    CHECK(sus_score(worst) == 0.0);
    SusResponse threes;
    threes.fill(3);
    CHECK(sus_score(threes) == 0.5);
    SusResponse bad = threes;
    bad[4] = 6;
    CHECK_THROWS_AS(sus_score(bad), ValidationError);
    CHECK_THROWS_AS(accessibility_score(std::vector<SusResponse>{}), ParameterError);

    Rng rng(14);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<SusResponse> rs(1 + rng.below(12));
        double sum = 0;
        for (auto& r : rs) {
            for (auto& v : r) v = 1 + static_cast<int>(rng.below(5));
            sum += oracle_sus(r);
        }
        const double a = accessibility_score(rs);
        CHECK(std::abs(a - sum / static_cast<double>(rs.size())) < 1e-12);
        std::reverse(rs.begin(), rs.end());
        CHECK(std::abs(accessibility_score(rs) - a) < 1e-12);
    }
}

TEST_CASE("simulated SUS tracks satisfaction") {
    Rng rng(15);
    double low = 0, high = 0;
    for (int i = 0; i < 500; ++i) {
        low += sus_score(simulate_sus(0.1, rng));
        high += sus_score(simulate_sus(0.9, rng));
    }
    CHECK(high > low);
}

TEST_CASE("comparison table") {
    DatasetSpec spec;
    spec.sample_count = 90;
    spec.participant_count = 10;
    spec.seed = 21;
    spec.synth.frame_size = 8;
    spec.synth.series_length = 16;
    spec.synth.electrodes = 4;
    const auto dataset = generate_dataset(spec);
    const auto split = split_dataset(dataset, spec);

    auto make = [](ModalitySet m) {
        ModelConfig mc;
        mc.encoders.dim = 8;
        mc.encoders.heads = 2;
        mc.encoders.frame_size = 8;
        mc.encoders.vit_blocks = 1;
        mc.encoders.electrodes = 4;
        mc.encoders.emg_windows = 2;
        mc.encoders.denoise_kernel = 3;
        mc.encoders.dilations = {1, 2};
        mc.context.dim = 4;
        mc.modalities = m;
        return GestureModel(mc);
    };
    const GestureModel fused = make({});
    const GestureModel vis = make({true, false, false});
    const GestureModel acc = make({false, true, false});
    const GestureModel emg = make({false, false, true});
    const auto pf = fused.initialize(1), pv = vis.initialize(2), pa = acc.initialize(3), pe = emg.initialize(4);
    std::vector<RecognizerArtifact> recognizers{
        {"Fused", &fused, &pf}, {"Visual", &vis, &pv}, {"Accel", &acc, &pa}, {"EMG", &emg, &pe}};

    QTable policy;
    RLHyperparams rl;
    ComparisonConfig cc;
    cc.episodes_per_user = 2;
    cc.seed = 3;
    std::vector<std::size_t> test = split.test;
    test.insert(test.end(), split.validation.begin(), split.validation.end());

    const auto rows = run_comparison(dataset, test, recognizers, &policy, rl, cc);
    REQUIRE(rows.size() == 5);
    CHECK(rows[0].row == "Fused");
    CHECK(rows[4].row == kStaticRow);
    CHECK_FALSE(rows[4].f1.has_value());
    CHECK(rows[4].latency_ms == cc.static_latency_ms);
    for (std::size_t i = 0; i < 4; ++i) {
        REQUIRE(rows[i].f1.has_value());
        CHECK(*rows[i].f1 >= 0.0);
        CHECK(*rows[i].f1 <= 1.0);
    }
    const auto csv = table1_csv(rows);
    CHECK(csv.rfind("Model,F1-Score,Latency (ms),Task Success Rate (%),Accessibility Score\n", 0) == 0);
    CHECK(csv.find("\nStatic,-,") != std::string::npos);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 6);

    cc.threads = 3;
    const auto again = run_comparison(dataset, test, recognizers, &policy, rl, cc);
    CHECK(table1_csv(again) == csv);
    CHECK(metrics_json(again) == metrics_json(rows));

    auto missing = recognizers;
    missing[2].params = nullptr;
    try {
        run_comparison(dataset, test, missing, &policy, rl, cc);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("Accel") != std::string::npos);
    }
    auto swapped = recognizers;
    swapped[1].params = &pa;
    CHECK_THROWS_AS(run_comparison(dataset, test, swapped, &policy, rl, cc), ConfigError);
    CHECK_THROWS_AS(run_comparison(dataset, test, recognizers, nullptr, rl, cc), ConfigError);
}

TEST_CASE("metric formatting") {
    CHECK(format_metric(0.5) == "0.5");
    CHECK(format_metric(1.0 / 3.0) == "0.333333");
    CHECK(format_metric(91.25) == "91.25");
}

}  // TEST_SUITE
