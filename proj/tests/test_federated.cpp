#include <doctest.h>

#include <cmath>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "gestura/aggregation.hpp"
#include "gestura/errors.hpp"
#include "gestura/federated.hpp"
#include "support.hpp"

using namespace gestura;

namespace {

ModelParameters flat(std::vector<double> v) {
    auto layout = std::make_shared<ParamLayout>();
    layout->add("flat.values", {v.size()}, InitKind::Zeros);
    return {std::move(v), layout};
}

// Weighted mean in long double, clients visited last to first.
std::vector<double> oracle_mean(const std::vector<ClientUpdate>& updates) {
    long double n = 0;
    for (const auto& u : updates) n += u.sample_count;
    std::vector<double> out(updates.front().parameters.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        long double acc = 0;
        for (std::size_t k = updates.size(); k-- > 0;) {
            acc += static_cast<long double>(updates[k].sample_count) * updates[k].parameters.values[i];
        }
        out[i] = static_cast<double>(acc / n);
    }
    return out;
}

struct Toy {
    DatasetSpec spec;
    Dataset dataset;
    DatasetSplit split;
    GestureModel model;

    static ModelConfig model_config() {
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
        return mc;
    }

    static DatasetSpec dataset_spec() {
        DatasetSpec s;
        s.sample_count = 120;
        s.participant_count = 10;
        s.seed = 5;
        s.synth.frame_size = 8;
        s.synth.series_length = 16;
        s.synth.electrodes = 4;
        return s;
    }

    Toy() : spec(dataset_spec()), dataset(generate_dataset(spec)), split(split_dataset(dataset, spec)), model(model_config()) {}
};

const Toy& toy() {
    static const Toy t;
    return t;
}

RoundConfig quick_round() {
    RoundConfig c;
    c.rounds = 4;
    c.patience = 10;
    c.batch_size = 8;
    c.optimizer = {OptimizerKind::Adam, 0.01};
    return c;
}

}  // namespace

TEST_SUITE("federated") {

TEST_CASE("aggregate examples") {
    std::vector<ClientUpdate> two{{0, flat({0.0}), 1, {}}, {1, flat({4.0}), 3, {}}};
    CHECK(aggregate(two).values[0] == 3.0);

    Rng rng(1);
    std::vector<double> theta(1000);
    for (auto& v : theta) v = rng.normal();
    std::vector<ClientUpdate> same;
    for (std::size_t k = 0; k < 7; ++k) same.push_back({k, flat(theta), 1 + rng.below(100), {}});
    CHECK(aggregate(same).values == theta);

    std::vector<ClientUpdate> single{{4, flat(theta), 17, {}}};
    CHECK(aggregate(single).values == theta);

    CHECK_THROWS_AS(aggregate({}), ParameterError);
    std::vector<ClientUpdate> ragged{{0, flat({1.0, 2.0}), 1, {}}, {1, flat({1.0}), 1, {}}};
    CHECK_THROWS_AS(aggregate(ragged), ShapeError);
}

TEST_CASE("aggregate matches an independent weighted mean") {
    Rng rng(2024);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t K = 2 + rng.below(19);
        std::vector<ClientUpdate> updates;
        for (std::size_t k = 0; k < K; ++k) {
            std::vector<double> v(1000);
            for (auto& x : v) x = rng.uniform(-3, 3);
            updates.push_back({k, flat(std::move(v)), 1 + rng.below(500), {}});
        }
        const auto got = aggregate(updates).values;
        const auto want = oracle_mean(updates);
        for (std::size_t i = 0; i < got.size(); ++i) REQUIRE(std::abs(got[i] - want[i]) <= 1e-12);

        // common scaling of n_k
        auto scaled = updates;
        for (auto& u : scaled) u.sample_count *= 7;
        const auto s = aggregate(scaled).values;
        for (std::size_t i = 0; i < got.size(); ++i) REQUIRE(std::abs(s[i] - got[i]) <= 1e-12);

        // client order in the input does not matter
        auto shuffled = updates;
        rng.shuffle(shuffled.begin(), shuffled.end());
        CHECK(aggregate(shuffled).values == got);
    }
}

TEST_CASE("sample_clients") {
    CHECK(sample_clients(5, 1.0, 3) == std::vector<std::size_t>{0, 1, 2, 3, 4});
    const auto half = sample_clients(10, 0.25, 3);
    CHECK(half.size() == 3);
    CHECK(std::is_sorted(half.begin(), half.end()));
    CHECK(half == sample_clients(10, 0.25, 3));
}

TEST_CASE("local_train") {
    const auto& t = toy();
    const auto global = t.model.initialize(3);
    const auto parts = partition_clients(t.dataset, t.split.train, 3, 1);
    auto cfg = quick_round();
    cfg.optimizer = {OptimizerKind::Sgd, 0.0};
    for (const auto& p : parts) {
        const auto u = local_train(t.model, global, t.dataset, p, cfg, 9);
        CHECK(u.parameters.values == global.values);
        CHECK(u.sample_count == p.samples.size());
        CHECK(u.client_id == p.client_id);
        for (double l : u.losses) CHECK(std::isfinite(l));
    }
    ClientPartition empty{7, {}, {}};
    CHECK_THROWS_AS(local_train(t.model, global, t.dataset, empty, cfg, 1), ParameterError);
}

TEST_CASE("local training lowers the loss on average") {
    const auto& t = toy();
    const RoundConfig cfg;  // library defaults
    ClientPartition all{0, t.split.train, t.split.train_participants};
    double first = 0, last = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto global = t.model.initialize(100 + seed);
        auto c = cfg;
        c.local_epochs = 3;
        const auto u = local_train(t.model, global, t.dataset, all, c, seed);
        REQUIRE(u.losses.size() >= 2);
        first += u.losses.front();
        last += u.losses.back();
    }
    MESSAGE("mean first-batch loss " << first / 10 << ", last-batch loss " << last / 10);
    CHECK(last <= first);
}

TEST_CASE("run_round") {
    const auto& t = toy();
    const auto global = t.model.initialize(4);
    const auto parts = partition_clients(t.dataset, t.split.train, 4, 2);

    auto frozen = quick_round();
    frozen.optimizer = {OptimizerKind::Sgd, 0.0};
    const auto r0 = run_round(t.model, global, t.dataset, parts, t.split.validation, frozen, 0, 11);
    CHECK(r0.global.values == global.values);

    const auto r = run_round(t.model, global, t.dataset, parts, t.split.validation, quick_round(), 0, 11, 1);
    const auto r3 = run_round(t.model, global, t.dataset, parts, t.split.validation, quick_round(), 0, 11, 3);
    CHECK(r.global.values == r3.global.values);
    CHECK(r.report.validation_f1 == r3.report.validation_f1);

    std::size_t total = 0;
    for (const auto& c : r.report.clients) total += c.sample_count;
    CHECK(total == t.split.train.size());
    CHECK(r.report.validation_f1 >= 0.0);
    CHECK(r.report.validation_f1 <= 1.0);
}

TEST_CASE("a single client round equals one centralized epoch") {
    const auto& t = toy();
    const auto global = t.model.initialize(6);
    const auto parts = partition_clients(t.dataset, t.split.train, 1, 2);
    auto cfg = quick_round();
    cfg.rounds = 3;
    const auto fed = run_training(t.model, global, t.dataset, parts, t.split.validation, cfg, 21);
    const auto central = train_centralized(t.model, global, t.dataset, t.split.train, t.split.validation, cfg, 21);
    REQUIRE(fed.history.size() == central.history.size());
    CHECK(fed.state.global.values == central.state.global.values);
    CHECK(fed.state.best.values == central.state.best.values);
    for (std::size_t i = 0; i < fed.history.size(); ++i) {
        CHECK(fed.history[i].validation_f1 == central.history[i].validation_f1);
        CHECK(fed.history[i].clients[0].losses == central.history[i].clients[0].losses);
    }
}

TEST_CASE("early stopping") {
    const auto& t = toy();
    auto cfg = quick_round();
    cfg.rounds = 12;
    cfg.patience = 0;
    cfg.optimizer = {OptimizerKind::Sgd, 0.0};  // F1 never moves, so round 1 is the first non-improving one
    const auto parts = partition_clients(t.dataset, t.split.train, 2, 2);
    const auto res = run_training(t.model, t.model.initialize(1), t.dataset, parts, t.split.validation, cfg, 3);
    CHECK(res.history.size() == 2);
    CHECK(res.state.stopped);
    CHECK(res.state.best_round == 0);

    cfg.optimizer = {OptimizerKind::Adam, 0.01};
    cfg.rounds = 6;
    for (std::size_t patience : {0u, 1u, 2u}) {
        cfg.patience = patience;
        const auto r = run_training(t.model, t.model.initialize(2), t.dataset, parts, t.split.validation, cfg, 3);
        CHECK(r.history.size() <= cfg.rounds);
        // replay the stopping rule on the recorded scores
        double best = -1;
        std::size_t stale = 0, expected = 0;
        for (const auto& h : r.history) {
            ++expected;
            if (h.validation_f1 > best) best = h.validation_f1, stale = 0;
            else ++stale;
            if (stale > patience) break;
        }
        CHECK(r.history.size() == expected);
        CHECK(r.state.best_f1 == best);
    }
}

TEST_CASE("training artifacts and resume") {
    const auto& t = toy();
    auto cfg = quick_round();
    cfg.rounds = 5;
    const auto parts = partition_clients(t.dataset, t.split.train, 3, 2);
    const auto init = t.model.initialize(8);

    testing::TempDir full("full"), cut("cut");
    TrainingOptions o;
    o.output_dir = full.path();
    const auto whole = run_training(t.model, init, t.dataset, parts, t.split.validation, cfg, 13, o);
    for (const char* f : {"global.ckpt", "best.ckpt", "state.json", "history.jsonl", "best.ckpt.json"})
        CHECK(std::filesystem::exists(full.path() / f));

    TrainingOptions partial;
    partial.output_dir = cut.path();
    partial.stop_after_round = 1;
    const auto first = run_training(t.model, init, t.dataset, parts, t.split.validation, cfg, 13, partial);
    CHECK(first.history.size() == 2);
    TrainingOptions rest;
    rest.output_dir = cut.path();
    const auto second = resume_training(t.model, t.dataset, parts, t.split.validation, cfg, 13, rest);
    CHECK(first.history.size() + second.history.size() == whole.history.size());
    CHECK(second.state.global.values == whole.state.global.values);

    auto slurp = [](const std::filesystem::path& p) {
        std::ifstream in(p);
        return std::string((std::istreambuf_iterator<char>(in)), {});
    };
    CHECK(slurp(full.path() / "history.jsonl") == slurp(cut.path() / "history.jsonl"));
    CHECK(slurp(full.path() / "best.ckpt") == slurp(cut.path() / "best.ckpt"));

    const auto lines = slurp(full.path() / "history.jsonl");
    CHECK(static_cast<std::size_t>(std::count(lines.begin(), lines.end(), '\n')) == whole.history.size());
    auto first_line = nlohmann::json::parse(lines.substr(0, lines.find('\n')));
    CHECK(first_line["round"] == 0);
    CHECK(first_line["clients"].size() == 3);
    CHECK(first_line.contains("validation"));
}

TEST_CASE("inverse-frequency class weights") {
    const auto& t = toy();
    std::vector<std::size_t> some(t.split.train.begin(), t.split.train.begin() + 40);
    const auto w = inverse_frequency_weights(t.dataset, some, kGestureClasses);
    REQUIRE(w.size() == kGestureClasses);
    std::vector<std::size_t> counts(kGestureClasses, 0);
    for (auto i : some) ++counts[t.dataset.samples[i].label];
    for (std::size_t c = 0; c < kGestureClasses; ++c) {
        if (counts[c] == 0) CHECK(w[c] == 1.0);
        else CHECK(w[c] == doctest::Approx(40.0 / (kGestureClasses * static_cast<double>(counts[c]))));
    }

    auto cfg = quick_round();
    cfg.class_weights = std::vector<double>(3, 1.0);
    ClientPartition all{0, t.split.train, {}};
    CHECK_THROWS(local_train(t.model, t.model.initialize(1), t.dataset, all, cfg, 1));
}

TEST_CASE("round config validation") {
    RoundConfig c;
    c.client_fraction = 0.0;
    CHECK_THROWS_AS(c.validate(), ParameterError);
    c.client_fraction = 1.0;
    c.local_epochs = 0;
    CHECK_THROWS_AS(c.validate(), ParameterError);
}

}  // TEST_SUITE
