#include <doctest.h>

#include <chrono>
#include <cmath>
#include <fstream>
#include <set>

#include "gestura/adaptui.hpp"
#include "gestura/errors.hpp"
#include "support.hpp"

using namespace gestura;

namespace {

std::vector<SimulatedUser> population(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<SimulatedUser> users;
    for (std::size_t i = 0; i < n; ++i) {
        const bool impaired = i % 5 < 2;
        const double acc = impaired ? rng.uniform(0.3, 0.8) : rng.uniform(0.85, 0.98);
        users.emplace_back(i, impaired, acc);
    }
    return users;
}

}  // namespace

TEST_SUITE("adaptui") {

TEST_CASE("interface and state indexing") {
    std::set<std::size_t> seen;
    for (std::size_t i = 0; i < kInterfaceConfigs; ++i) {
        const auto c = InterfaceConfig::from_index(i);
        CHECK(c.index() == i);
        seen.insert(c.index());
    }
    CHECK(seen.size() == 18);
    for (std::size_t i = 0; i < kUserStates; ++i) CHECK(UserState::from_index(i).index() == i);
    CHECK_THROWS_AS(InterfaceConfig::from_index(18), ParameterError);
    CHECK(kStaticConfig.changed_fields(kAccessibleConfig) == 3);
    CHECK(kStaticConfig.changed_fields(kStaticConfig) == 0);
    QTable q;
    CHECK(q.values().size() == 54 * 18);
}

TEST_CASE("capability thresholds") {
    CHECK(capability_from_accuracy(0.0) == Capability::Low);
    CHECK(capability_from_accuracy(0.599) == Capability::Low);
    CHECK(capability_from_accuracy(0.6) == Capability::Medium);
    CHECK(capability_from_accuracy(0.849) == Capability::Medium);
    CHECK(capability_from_accuracy(0.85) == Capability::High);
    CHECK(capability_from_accuracy(1.0) == Capability::High);

    AccuracyWindow w(10);
    for (int i = 0; i < 25; ++i) w.push(true);
    CHECK(w.size() == 10);
    CHECK(capability_from_accuracy(w.accuracy()) == Capability::High);
    for (int i = 0; i < 5; ++i) w.push(false);
    CHECK(w.accuracy() == 0.5);
}

TEST_CASE("reward examples") {
    RLHyperparams p;
    p.w_time = p.w_feedback = 0.5;
    CHECK(compute_reward(3.0, false, 0.0, p) == 0.0);
    CHECK(compute_reward(0.0, true, 1.0, p) == 1.0);
    CHECK(compute_reward(30.0, true, 0.0, p) == 0.0);
    CHECK(compute_reward(45.0, true, 0.0, p) == 0.0);
    CHECK_THROWS_AS(compute_reward(-1.0, true, 0.0, p), ParameterError);
    Rng rng(1);
    for (int i = 0; i < 10000; ++i) {
        const double r = compute_reward(rng.uniform(0, 60), rng.bernoulli(0.5), rng.uniform(), p);
        CHECK(r >= 0.0);
        CHECK(r <= p.w_time + p.w_feedback);
    }
}

TEST_CASE("q_update examples") {
    RLHyperparams p;
    p.learning_rate = 0.5;
    p.discount = 0.9;
    QTable q;
    q.at(7, 3) = 2.0;
    q_update(q, 0, 0, 1.0, 7, p);
    CHECK(q.at(0, 0) == doctest::Approx(1.4).epsilon(1e-15));

    QTable t;
    p.learning_rate = 1.0;
    q_update(t, 5, 5, 1.0, std::nullopt, p);
    CHECK(t.at(5, 5) == 1.0);

    // q_update itself does not validate, so a zero rate is a no-op
    QTable u;
    u.at(1, 1) = 0.3;
    const auto before = u;
    RLHyperparams zero = p;
    zero.learning_rate = 0.0;
    q_update(u, 1, 1, 5.0, 2, zero);
    CHECK(u == before);
}

TEST_CASE("q_update touches one cell and respects fixed points") {
    Rng rng(4);
    RLHyperparams p;
    p.learning_rate = 0.7;
    p.discount = 0.8;
    for (int trial = 0; trial < 1000; ++trial) {
        QTable q;
        for (std::size_t s = 0; s < q.states(); ++s)
            for (std::size_t a = 0; a < q.actions(); ++a) q.at(s, a) = rng.normal();
        const auto s = rng.below(kUserStates), a = rng.below(kInterfaceConfigs), next = rng.below(kUserStates);
        const double r = rng.normal();
        auto changed = q;
        q_update(changed, s, a, r, next, p);
        std::size_t diffs = 0;
        for (std::size_t i = 0; i < q.values().size(); ++i) diffs += q.values()[i] != changed.values()[i];
        CHECK(diffs <= 1);

        auto fixed = q;
        fixed.at(s, a) = 0.0;
        const double target = r + p.discount * fixed.max_value(next);
        fixed.at(s, a) = target;
        if (next == s) continue;  // target would depend on the cell itself
        auto updated = fixed;
        q_update(updated, s, a, r, next, p);
        CHECK(std::abs(updated.at(s, a) - fixed.at(s, a)) < 1e-12);
    }
}

TEST_CASE("select_action") {
    QTable q;
    q.at(3, 11) = 1.0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) CHECK(select_action(q, 3, 0.0, seed) == 11);
    CHECK(select_action(q, 4, 0.0, 1) == 0);
    CHECK_THROWS_AS(select_action(q, 4, 1.5, 1), ParameterError);

    // epsilon = 1: uniform over 18 actions, chi-square against the critical value at p = 0.01
    Rng rng(2025);
    std::vector<double> counts(kInterfaceConfigs, 0.0);
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) ++counts[select_action(q, 3, 1.0, rng)];
    const double expected = static_cast<double>(draws) / kInterfaceConfigs;
    double chi2 = 0.0;
    for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
    MESSAGE("chi-square statistic " << chi2);
    CHECK(chi2 < 33.409);  // 99th percentile of chi-square with 17 degrees of freedom
}

TEST_CASE("epsilon schedule") {
    RLHyperparams p;
    CHECK(p.epsilon_at(0) == 0.3);
    CHECK(p.epsilon_at(1) == doctest::Approx(0.3 * 0.995));
    CHECK(p.epsilon_at(10000) == p.epsilon_min);
    for (std::size_t e = 1; e < 500; ++e) CHECK(p.epsilon_at(e) <= p.epsilon_at(e - 1));
}

TEST_CASE("simulated user structure") {
    for (double acc = 0.0; acc <= 1.0; acc += 0.05) {
        SimulatedUser u(0, true, acc);
        const auto good = u.preference(Capability::Low, kAccessibleConfig);
        const auto bad = u.preference(Capability::Low, {MenuSize::Small, InteractionMode::Gesture, Contrast::Low});
        CHECK(good.success_probability > bad.success_probability);
        for (std::size_t c = 0; c < kCapabilities; ++c) {
            for (std::size_t i = 0; i < kInterfaceConfigs; ++i) {
                const auto p = u.preference(static_cast<Capability>(c), InterfaceConfig::from_index(i));
                CHECK(p.success_probability >= 0.0);
                CHECK(p.success_probability <= 1.0);
                CHECK(p.mean_time_s > 0.0);
                CHECK(p.feedback >= 0.0);
                CHECK(p.feedback <= 1.0);
            }
        }
    }
    CHECK_THROWS_AS(SimulatedUser(0, false, 1.5), ParameterError);
}

TEST_CASE("step_episode") {
    RLHyperparams p;
    const LatencyModel lat;
    SimulatedUser det(0, true, 0.7, {0.25, 0.08, true});
    auto run = [&](const SimulatedUser& user, std::uint64_t seed, double eps) {
        QTable q;
        Rng rng(seed);
        auto ep = begin_episode(user, p, false, rng);
        std::vector<Transition> out;
        for (int i = 0; i < 30; ++i) out.push_back(step_episode(user, q, ep, p, eps, lat, true, rng));
        return std::make_pair(out, q);
    };
    const auto [a, qa] = run(det, 5, 0.0);
    const auto [b, qb] = run(det, 5, 0.0);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].state == b[i].state);
        CHECK(a[i].action == b[i].action);
        CHECK(a[i].reward == b[i].reward);
        CHECK(a[i].next_state == b[i].next_state);
        CHECK(a[i].latency_ms == b[i].latency_ms);
    }
    CHECK(qa == qb);

    SimulatedUser noisy(1, true, 0.6);
    const auto [c, qc] = run(noisy, 9, 0.3);
    for (std::size_t i = 0; i < c.size(); ++i) {
        CHECK(c[i].reward == compute_reward(c[i].time_s, c[i].success, c[i].feedback, p));
        if (i) CHECK(c[i].state == c[i - 1].next_state);
        CHECK(c[i].latency_ms >= lat.base_ms);
        CHECK(c[i].wall_latency_ms >= 0.0);
    }

    SimulatedUser perfect(2, false, 1.0);
    Rng rng(3);
    auto ep = begin_episode(perfect, p, false, rng);
    CHECK(ep.state.capability == Capability::High);
    CHECK(ep.state.config == kStaticConfig);
}

TEST_CASE("train_policy") {
    auto users = population(20, 1);
    RLHyperparams quiet;
    quiet.w_time = quiet.w_feedback = 0.0;
    quiet.episodes = 200;
    const auto z = train_policy(users, quiet, 3);
    for (double v : z.q.values()) CHECK(v == 0.0);

    RLHyperparams none;
    none.episodes = 0;
    const auto empty = train_policy(users, none, 3);
    for (double v : empty.q.values()) CHECK(v == 0.0);
    CHECK(empty.episode_returns.empty());

    RLHyperparams p;
    p.episodes = 3000;
    const auto a = train_policy(users, p, 8);
    const auto b = train_policy(users, p, 8);
    CHECK(a.q == b.q);
    CHECK(a.episode_returns.size() == 3000);
    CHECK(a.q.all_finite());
}

TEST_CASE("learning progress over seeds") {
    RLHyperparams p;  // default schedule
    double early = 0, late = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto users = population(40, 100 + seed);
        const auto t = train_policy(users, p, seed);
        const std::size_t tenth = t.episode_returns.size() / 10;
        for (std::size_t i = 0; i < tenth; ++i) {
            early += t.episode_returns[i];
            late += t.episode_returns[t.episode_returns.size() - 1 - i];
        }
    }
    MESSAGE("first-decile return " << early << ", last-decile return " << late);
    CHECK(late >= early);
}

TEST_CASE("diagnostic MDP: Q-learning meets value iteration") {
    const auto start = std::chrono::steady_clock::now();
    const auto mdp = DiagnosticMdp::standard();
    RLHyperparams p;
    p.learning_rate = 0.5;
    p.discount = 0.9;
    const auto vi = value_iteration(mdp, p.discount);
    const auto ql = train_diagnostic(mdp, p, 2000);
    for (std::size_t s = 0; s < mdp.states; ++s) {
        CHECK(greedy_action(ql, s) == greedy_action(vi, s));
        for (std::size_t a = 0; a < mdp.actions; ++a) CHECK(std::abs(ql.at(s, a) - vi.at(s, a)) < 1e-6);
    }
    // greedy policy is not trivially constant
    std::set<std::size_t> actions;
    for (std::size_t s = 0; s < mdp.states; ++s) actions.insert(greedy_action(vi, s));
    CHECK(actions.size() == 2);

    for (double c : {0.1, 3.0, 250.0}) {
        const auto scaled = train_diagnostic(mdp, p, 2000, c);
        for (std::size_t s = 0; s < mdp.states; ++s) {
            CHECK(greedy_action(scaled, s) == greedy_action(ql, s));
            for (std::size_t a = 0; a < mdp.actions; ++a)
                CHECK(std::abs(scaled.at(s, a) - c * ql.at(s, a)) < 1e-9 * std::max(1.0, c));
        }
    }
    CHECK(std::chrono::steady_clock::now() - start < std::chrono::seconds(5));
}

TEST_CASE("policy export") {
    RLHyperparams p;
    p.episodes = 500;
    const auto t = train_policy(population(10, 2), p, 4);
    testing::TempDir dir("policy");
    export_policy_csv(t.q, dir.path() / "policy.csv");
    export_policy_json(t.q, dir.path() / "policy.json");
    export_curves_csv(t, dir.path() / "curves.csv");

    std::ifstream csv(dir.path() / "policy.csv");
    std::string line;
    std::size_t rows = 0;
    std::getline(csv, line);  // header
    while (std::getline(csv, line)) rows += !line.empty();
    CHECK(rows == 54 * 18);

    CHECK(load_policy_json(dir.path() / "policy.json") == t.q);

    std::ifstream curves(dir.path() / "curves.csv");
    rows = 0;
    std::getline(curves, line);
    while (std::getline(curves, line)) rows += !line.empty();
    CHECK(rows == 500);
}

}  // TEST_SUITE
