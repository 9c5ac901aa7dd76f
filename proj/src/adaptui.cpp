#include "gestura/adaptui.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

#include "gestura/errors.hpp"
#include "gestura/metrics.hpp"

namespace gestura {

namespace {

constexpr std::array<std::array<double, 3>, 3> kMotor{{
    {0.50, 0.65, 0.85},  // low capability: small, medium, large menu
    {0.80, 0.88, 0.92},
    {0.95, 0.96, 0.93},
}};
constexpr std::array<std::array<double, 3>, 3> kMenuTime{{
    {1.20, 1.00, 0.85},
    {1.05, 1.00, 0.95},
    {0.90, 1.00, 1.10},
}};
constexpr std::array<std::array<double, 2>, 3> kContrastSuccess{{
    {0.72, 1.00},
    {0.92, 1.00},
    {1.00, 0.99},
}};
constexpr std::array<std::array<double, 2>, 3> kContrastTime{{
    {1.10, 1.00},
    {1.00, 1.00},
    {1.00, 1.00},
}};
constexpr std::array<double, 3> kBaseTime{18.0, 12.0, 8.0};
constexpr std::array<double, 3> kModeTime{1.00, 1.35, 1.10};  // gesture, voice, hybrid
constexpr double kVoiceSuccess = 0.75;
constexpr double kHybridFallback = 0.3;  // share of missed gestures not rescued by voice

std::string fmt17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::size_t idx(auto e) { return static_cast<std::size_t>(e); }

}  // namespace

std::string to_string(MenuSize v) {
    switch (v) {
        case MenuSize::Small: return "small";
        case MenuSize::Medium: return "medium";
        case MenuSize::Large: return "large";
    }
    return "?";
}

std::string to_string(InteractionMode v) {
    switch (v) {
        case InteractionMode::Gesture: return "gesture";
        case InteractionMode::Voice: return "voice";
        case InteractionMode::Hybrid: return "hybrid";
    }
    return "?";
}

std::string to_string(Contrast v) { return v == Contrast::Low ? "low" : "high"; }

std::string to_string(Capability v) {
    switch (v) {
        case Capability::Low: return "low";
        case Capability::Medium: return "medium";
        case Capability::High: return "high";
    }
    return "?";
}

std::size_t InterfaceConfig::index() const noexcept { return idx(menu) * 6 + idx(mode) * 2 + idx(contrast); }

InterfaceConfig InterfaceConfig::from_index(std::size_t index) {
    if (index >= kInterfaceConfigs) throw ParameterError("interface config index out of range");
    return {static_cast<MenuSize>(index / 6), static_cast<InteractionMode>((index / 2) % 3),
            static_cast<Contrast>(index % 2)};
}

std::size_t InterfaceConfig::changed_fields(const InterfaceConfig& other) const noexcept {
    return std::size_t{menu != other.menu} + (mode != other.mode) + (contrast != other.contrast);
}

Capability capability_from_accuracy(double accuracy, const CapabilityThresholds& thresholds) {
    if (accuracy < thresholds.low) return Capability::Low;
    if (accuracy < thresholds.medium) return Capability::Medium;
    return Capability::High;
}

std::size_t UserState::index() const noexcept { return idx(capability) * kInterfaceConfigs + config.index(); }

UserState UserState::from_index(std::size_t index) {
    if (index >= kUserStates) throw ParameterError("user state index out of range");
    return {static_cast<Capability>(index / kInterfaceConfigs), InterfaceConfig::from_index(index % kInterfaceConfigs)};
}

QTable::QTable(std::size_t states, std::size_t actions)
    : states_(states), actions_(actions), values_(states * actions, 0.0) {
    if (states == 0 || actions == 0) throw ParameterError("Q-table needs at least one state and action");
}

double& QTable::at(std::size_t s, std::size_t a) {
    if (s >= states_ || a >= actions_) throw ParameterError("Q-table cell out of range");
    return values_[s * actions_ + a];
}

double QTable::at(std::size_t s, std::size_t a) const {
    if (s >= states_ || a >= actions_) throw ParameterError("Q-table cell out of range");
    return values_[s * actions_ + a];
}

std::span<const double> QTable::row(std::size_t s) const {
    if (s >= states_) throw ParameterError("Q-table state out of range");
    return std::span<const double>(values_).subspan(s * actions_, actions_);
}

double QTable::max_value(std::size_t s) const {
    const auto r = row(s);
    return *std::max_element(r.begin(), r.end());
}

bool QTable::all_finite() const noexcept {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

void RLHyperparams::validate() const {
    if (!(learning_rate > 0.0 && learning_rate <= 1.0)) throw ParameterError("learning_rate outside (0, 1]");
    if (!(discount >= 0.0 && discount < 1.0)) throw ParameterError("discount outside [0, 1)");
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ParameterError("epsilon outside [0, 1]");
    if (!(epsilon_min >= 0.0 && epsilon_min <= 1.0)) throw ParameterError("epsilon_min outside [0, 1]");
    if (!(epsilon_decay > 0.0 && epsilon_decay <= 1.0)) throw ParameterError("epsilon_decay outside (0, 1]");
    if (episode_length == 0) throw ParameterError("episode_length must be positive");
    if (!(w_time >= 0.0) || !(w_feedback >= 0.0)) throw ParameterError("reward weights must be non-negative");
    if (accuracy_window == 0) throw ParameterError("accuracy_window must be positive");
    if (!(thresholds.low <= thresholds.medium)) throw ParameterError("capability thresholds out of order");
}

double RLHyperparams::epsilon_at(std::size_t episode) const {
    return std::max(epsilon_min, epsilon * std::pow(epsilon_decay, static_cast<double>(episode)));
}

double compute_reward(double time_s, bool success, double feedback, const RLHyperparams& params) {
    if (!(time_s >= 0.0)) throw ParameterError("completion time must be non-negative");
    const double time_term = success ? std::max(0.0, 1.0 - time_s / kTaskTimeLimitS) : 0.0;
    return params.w_time * time_term + params.w_feedback * feedback;
}

void q_update(QTable& q, std::size_t state, std::size_t action, double reward, std::optional<std::size_t> next_state,
              const RLHyperparams& params) {
    const double future = next_state ? q.max_value(*next_state) : 0.0;
    double& cell = q.at(state, action);
    cell += params.learning_rate * (reward + params.discount * future - cell);
}

std::size_t greedy_action(const QTable& q, std::size_t state) {
    const auto r = q.row(state);
    return static_cast<std::size_t>(std::max_element(r.begin(), r.end()) - r.begin());
}

std::size_t select_action(const QTable& q, std::size_t state, double epsilon, Rng& rng) {
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ParameterError("epsilon outside [0, 1]");
    if (epsilon > 0.0 && rng.uniform() < epsilon) return static_cast<std::size_t>(rng.below(q.actions()));
    return greedy_action(q, state);
}

std::size_t select_action(const QTable& q, std::size_t state, double epsilon, std::uint64_t seed) {
    Rng rng(seed);
    return select_action(q, state, epsilon, rng);
}

SimulatedUser::SimulatedUser(std::size_t id, bool impaired, double gesture_accuracy, UserModelConfig config)
    : id_(id), impaired_(impaired), gesture_accuracy_(gesture_accuracy), config_(config) {
    if (!(gesture_accuracy >= 0.0 && gesture_accuracy <= 1.0)) throw ParameterError("gesture accuracy outside [0, 1]");
    if (config.time_noise < 0.0 || config.feedback_noise < 0.0) throw ParameterError("noise must be non-negative");
}

Preference SimulatedUser::preference(Capability capability, const InterfaceConfig& config) const {
    const auto c = idx(capability), m = idx(config.menu), k = idx(config.contrast);
    double input = gesture_accuracy_;
    if (config.mode == InteractionMode::Voice) input = kVoiceSuccess;
    if (config.mode == InteractionMode::Hybrid) input = 1.0 - (1.0 - gesture_accuracy_) * kHybridFallback;

    Preference p;
    p.success_probability = std::clamp(kMotor[c][m] * input * kContrastSuccess[c][k], 0.0, 1.0);
    p.mean_time_s = kBaseTime[c] * kMenuTime[c][m] * kModeTime[idx(config.mode)] * kContrastTime[c][k];
    p.feedback = std::clamp(0.15 + 0.6 * p.success_probability + 0.25 * (1.0 - p.mean_time_s / kTaskTimeLimitS), 0.0, 1.0);
    return p;
}

TaskResult SimulatedUser::perform(Capability capability, const InterfaceConfig& config, Rng& rng) const {
    const auto p = preference(capability, config);
    TaskResult r;
    if (config_.deterministic) {
        r.gesture_recognized = gesture_accuracy_ >= 0.5;
        r.success = p.success_probability >= 0.5;
        r.time_s = r.success ? p.mean_time_s : kTaskTimeLimitS;
        r.feedback = p.feedback;
        return r;
    }
    r.gesture_recognized = rng.bernoulli(gesture_accuracy_);
    r.success = rng.bernoulli(p.success_probability);
    const double sigma = config_.time_noise;
    const double time = p.mean_time_s * std::exp(sigma * rng.normal() - 0.5 * sigma * sigma);
    r.time_s = r.success ? time : kTaskTimeLimitS;
    r.feedback = std::clamp(p.feedback + rng.normal(0.0, config_.feedback_noise), 0.0, 1.0);
    return r;
}

AccuracyWindow::AccuracyWindow(std::size_t size) : capacity_(size) {
    if (size == 0) throw ParameterError("accuracy window must be positive");
}

void AccuracyWindow::push(bool recognized) {
    items_.push_back(recognized);
    if (items_.size() > capacity_) items_.pop_front();
}

double AccuracyWindow::accuracy() const {
    if (items_.empty()) return 1.0;
    return static_cast<double>(std::count(items_.begin(), items_.end(), true)) / static_cast<double>(items_.size());
}

double LatencyModel::adaptation_ms(std::size_t changed_fields) const {
    return base_ms + static_cast<double>(recognizer_macs) * ns_per_mac * 1e-6 +
           per_field_ms * static_cast<double>(changed_fields);
}

EpisodeState begin_episode(const SimulatedUser& user, const RLHyperparams& params, bool exploring_start, Rng& rng) {
    EpisodeState e{UserState{}, AccuracyWindow(params.accuracy_window)};
    for (std::size_t i = 0; i < params.accuracy_window; ++i) {
        e.window.push(user.config().deterministic ? user.gesture_accuracy() >= 0.5
                                                  : rng.bernoulli(user.gesture_accuracy()));
    }
    e.state.capability = capability_from_accuracy(e.window.accuracy(), params.thresholds);
    e.state.config = exploring_start ? InterfaceConfig::from_index(rng.below(kInterfaceConfigs)) : kStaticConfig;
    return e;
}

Transition step_episode(const SimulatedUser& user, QTable& q, EpisodeState& episode, const RLHyperparams& params,
                        double epsilon, const LatencyModel& latency, bool learn, Rng& rng) {
    Transition t;
    t.state = episode.state.index();
    const auto start = std::chrono::steady_clock::now();
    t.action = select_action(q, t.state, epsilon, rng);
    const auto config = InterfaceConfig::from_index(t.action);
    const auto changed = config.changed_fields(episode.state.config);
    t.wall_latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    t.latency_ms = latency.adaptation_ms(changed);

    const auto result = user.perform(episode.state.capability, config, rng);
    t.success = result.success;
    t.time_s = result.time_s;
    t.feedback = result.feedback;
    t.reward = compute_reward(result.time_s, result.success, result.feedback, params);

    episode.window.push(result.gesture_recognized);
    episode.state = {capability_from_accuracy(episode.window.accuracy(), params.thresholds), config};
    t.next_state = episode.state.index();
    if (learn) q_update(q, t.state, t.action, t.reward, t.next_state, params);
    return t;
}

PolicyTraining train_policy(std::span<const SimulatedUser> users, const RLHyperparams& params, std::uint64_t seed,
                            const LatencyModel& latency) {
    params.validate();
    PolicyTraining out;
    if (users.empty() || params.episodes == 0) return out;
    Rng rng(seed);
    out.episode_returns.reserve(params.episodes);
    for (std::size_t e = 0; e < params.episodes; ++e) {
        const auto& user = users[rng.below(users.size())];
        const double eps = params.epsilon_at(e);
        auto episode = begin_episode(user, params, true, rng);
        double ret = 0.0;
        for (std::size_t step = 0; step < params.episode_length; ++step) {
            ret += step_episode(user, out.q, episode, params, eps, latency, true, rng).reward;
        }
        out.episode_returns.push_back(ret);
        out.epsilons.push_back(eps);
    }
    return out;
}

std::vector<Transition> run_policy(const SimulatedUser& user, const QTable* q, std::optional<InterfaceConfig> fixed,
                                   const RLHyperparams& params, std::size_t episodes, const LatencyModel& latency,
                                   std::uint64_t seed) {
    params.validate();
    if (!q && !fixed) throw ParameterError("run_policy needs a Q-table or a fixed configuration");
    QTable pinned;
    if (fixed) {
        // A table whose every row prefers the fixed action reproduces the static interface.
        for (std::size_t s = 0; s < kUserStates; ++s) pinned.at(s, fixed->index()) = 1.0;
        q = &pinned;
    }
    QTable table = *q;
    Rng rng(seed);
    std::vector<Transition> out;
    out.reserve(episodes * params.episode_length);
    for (std::size_t e = 0; e < episodes; ++e) {
        auto episode = begin_episode(user, params, false, rng);
        for (std::size_t step = 0; step < params.episode_length; ++step) {
            out.push_back(step_episode(user, table, episode, params, 0.0, latency, false, rng));
        }
    }
    return out;
}

double accessible_choice_rate(const QTable& q) {
    std::size_t hits = 0;
    for (std::size_t c = 0; c < kInterfaceConfigs; ++c) {
        const UserState s{Capability::Low, InterfaceConfig::from_index(c)};
        if (greedy_action(q, s.index()) == kAccessibleConfig.index()) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(kInterfaceConfigs);
}

DiagnosticMdp DiagnosticMdp::standard() {
    // State 2 pays well for staying but is only reachable through the unrewarded
    // advance actions, so the optimum needs discounted lookahead.
    DiagnosticMdp m;
    m.next = {0, 1, 0, 2, 2, 0};
    m.reward = {0.1, 0.0, 0.2, 0.0, 1.0, 0.5};
    return m;
}

QTable value_iteration(const DiagnosticMdp& mdp, double discount, double tolerance, std::size_t max_iterations) {
    if (mdp.next.size() != mdp.states * mdp.actions || mdp.reward.size() != mdp.states * mdp.actions) {
        throw ShapeError("diagnostic MDP tables do not match its dimensions");
    }
    QTable q(mdp.states, mdp.actions);
    for (std::size_t it = 0; it < max_iterations; ++it) {
        QTable next(mdp.states, mdp.actions);
        double change = 0.0;
        for (std::size_t s = 0; s < mdp.states; ++s) {
            for (std::size_t a = 0; a < mdp.actions; ++a) {
                const auto k = s * mdp.actions + a;
                next.at(s, a) = mdp.reward[k] + discount * q.max_value(mdp.next[k]);
                change = std::max(change, std::abs(next.at(s, a) - q.at(s, a)));
            }
        }
        q = std::move(next);
        if (change < tolerance) break;
    }
    return q;
}

QTable train_diagnostic(const DiagnosticMdp& mdp, const RLHyperparams& params, std::size_t sweeps,
                        double reward_scale) {
    params.validate();
    QTable q(mdp.states, mdp.actions);
    for (std::size_t sweep = 0; sweep < sweeps; ++sweep) {
        for (std::size_t s = 0; s < mdp.states; ++s) {
            for (std::size_t a = 0; a < mdp.actions; ++a) {
                const auto k = s * mdp.actions + a;
                q_update(q, s, a, reward_scale * mdp.reward[k], mdp.next[k], params);
            }
        }
    }
    return q;
}

void export_policy_csv(const QTable& q, const std::filesystem::path& path) {
    if (q.states() != kUserStates || q.actions() != kInterfaceConfigs) throw ShapeError("policy export needs a 54x18 table");
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "capability,menu,mode,contrast,action_menu,action_mode,action_contrast,q\n";
    for (std::size_t s = 0; s < q.states(); ++s) {
        const auto st = UserState::from_index(s);
        for (std::size_t a = 0; a < q.actions(); ++a) {
            const auto ac = InterfaceConfig::from_index(a);
            out << to_string(st.capability) << ',' << to_string(st.config.menu) << ',' << to_string(st.config.mode)
                << ',' << to_string(st.config.contrast) << ',' << to_string(ac.menu) << ',' << to_string(ac.mode) << ','
                << to_string(ac.contrast) << ',' << fmt17(q.at(s, a)) << '\n';
        }
    }
    if (!out) throw IoError("failed writing " + path.string());
}

void export_policy_json(const QTable& q, const std::filesystem::path& path) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t s = 0; s < q.states(); ++s) {
        const auto r = q.row(s);
        rows.push_back(std::vector<double>(r.begin(), r.end()));
    }
    nlohmann::json j = {{"states", q.states()}, {"actions", q.actions()}, {"values", rows}};
    if (q.states() == kUserStates && q.actions() == kInterfaceConfigs) {
        nlohmann::json greedy = nlohmann::json::array();
        for (std::size_t s = 0; s < q.states(); ++s) greedy.push_back(greedy_action(q, s));
        j["greedy"] = greedy;
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(1) << '\n';
    if (!out) throw IoError("failed writing " + path.string());
}

QTable load_policy_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    nlohmann::json j;
    try {
        in >> j;
        QTable q(j.at("states").get<std::size_t>(), j.at("actions").get<std::size_t>());
        const auto& rows = j.at("values");
        if (rows.size() != q.states()) throw ConfigError("policy " + path.string() + " has the wrong row count");
        for (std::size_t s = 0; s < q.states(); ++s) {
            const auto r = rows.at(s).get<std::vector<double>>();
            if (r.size() != q.actions()) throw ConfigError("policy " + path.string() + " has a short row");
            for (std::size_t a = 0; a < q.actions(); ++a) q.at(s, a) = r[a];
        }
        return q;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("malformed policy " + path.string() + ": " + e.what());
    }
}

void export_curves_csv(const PolicyTraining& training, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "episode,epsilon,return\n";
    for (std::size_t e = 0; e < training.episode_returns.size(); ++e) {
        out << e << ',' << fmt17(training.epsilons[e]) << ',' << fmt17(training.episode_returns[e]) << '\n';
    }
    if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace gestura
