#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gestura/rng.hpp"

namespace gestura {

enum class MenuSize { Small, Medium, Large };
enum class InteractionMode { Gesture, Voice, Hybrid };
enum class Contrast { Low, High };
enum class Capability { Low, Medium, High };

std::string to_string(MenuSize v);
std::string to_string(InteractionMode v);
std::string to_string(Contrast v);
std::string to_string(Capability v);

inline constexpr std::size_t kInterfaceConfigs = 18;
inline constexpr std::size_t kCapabilities = 3;
inline constexpr std::size_t kUserStates = kCapabilities * kInterfaceConfigs;

struct InterfaceConfig {
    MenuSize menu = MenuSize::Medium;
    InteractionMode mode = InteractionMode::Gesture;
    Contrast contrast = Contrast::Low;

    // menu * 6 + mode * 2 + contrast
    std::size_t index() const noexcept;
    static InterfaceConfig from_index(std::size_t index);
    // Number of fields that differ from `other` (0..3).
    std::size_t changed_fields(const InterfaceConfig& other) const noexcept;
    friend bool operator==(const InterfaceConfig&, const InterfaceConfig&) = default;
};

// The interface a non-adaptive system ships with.
inline constexpr InterfaceConfig kStaticConfig{MenuSize::Medium, InteractionMode::Gesture, Contrast::Low};
// The configuration expected to serve low-capability users best.
inline constexpr InterfaceConfig kAccessibleConfig{MenuSize::Large, InteractionMode::Hybrid, Contrast::High};

struct CapabilityThresholds {
    double low = 0.6;     // accuracy below this is low capability
    double medium = 0.85; // below this (and >= low) is medium

    friend bool operator==(const CapabilityThresholds&, const CapabilityThresholds&) = default;
};

Capability capability_from_accuracy(double accuracy, const CapabilityThresholds& thresholds = {});

struct UserState {
    Capability capability = Capability::Medium;
    InterfaceConfig config;

    // capability * 18 + config index
    std::size_t index() const noexcept;
    static UserState from_index(std::size_t index);
    friend bool operator==(const UserState&, const UserState&) = default;
};

// Dense state-action value table, zero-initialized.
class QTable {
public:
    QTable(std::size_t states = kUserStates, std::size_t actions = kInterfaceConfigs);

    std::size_t states() const noexcept { return states_; }
    std::size_t actions() const noexcept { return actions_; }
    double& at(std::size_t s, std::size_t a);
    double at(std::size_t s, std::size_t a) const;
    std::span<const double> row(std::size_t s) const;
    std::span<const double> values() const noexcept { return values_; }
    double max_value(std::size_t s) const;
    bool all_finite() const noexcept;

    friend bool operator==(const QTable&, const QTable&) = default;

private:
    std::size_t states_;
    std::size_t actions_;
    std::vector<double> values_;
};

struct RLHyperparams {
    double learning_rate = 0.1;
    double discount = 0.3;
    double epsilon = 0.3;
    double epsilon_decay = 0.995;
    double epsilon_min = 0.2;
    std::size_t episode_length = 20;
    std::size_t episodes = 30000;
    double w_time = 0.5;
    double w_feedback = 0.5;
    std::size_t accuracy_window = 10;
    CapabilityThresholds thresholds;

    void validate() const;
    double epsilon_at(std::size_t episode) const;

    friend bool operator==(const RLHyperparams&, const RLHyperparams&) = default;
};

// R = w_time * max(0, 1 - time / 30) * [success] + w_feedback * feedback
double compute_reward(double time_s, bool success, double feedback, const RLHyperparams& params);

// One tabular Q-learning step. `next_state` empty means terminal (its value is 0).
void q_update(QTable& q, std::size_t state, std::size_t action, double reward, std::optional<std::size_t> next_state,
              const RLHyperparams& params);

// Highest-valued action; ties go to the lowest index.
std::size_t greedy_action(const QTable& q, std::size_t state);
std::size_t select_action(const QTable& q, std::size_t state, double epsilon, Rng& rng);
std::size_t select_action(const QTable& q, std::size_t state, double epsilon, std::uint64_t seed);

// Expected outcome of one task for a capability level under an interface configuration.
struct Preference {
    double mean_time_s = 0.0;
    double success_probability = 0.0;
    double feedback = 0.0;
};

struct TaskResult {
    bool success = false;
    double time_s = 0.0;
    double feedback = 0.0;
    bool gesture_recognized = false;
};

struct UserModelConfig {
    double time_noise = 0.25;      // lognormal sigma on completion time
    double feedback_noise = 0.08;  // Gaussian sigma on feedback
    bool deterministic = false;    // expected outcomes only, no sampling

    friend bool operator==(const UserModelConfig&, const UserModelConfig&) = default;
};

// Stand-in for a human participant: latent preferences by capability and interface, plus a
// gesture accuracy (execution reliability times recognizer accuracy) that drives the
// rolling-accuracy capability estimate.
class SimulatedUser {
public:
    SimulatedUser(std::size_t id, bool impaired, double gesture_accuracy, UserModelConfig config = {});

    std::size_t id() const noexcept { return id_; }
    bool impaired() const noexcept { return impaired_; }
    double gesture_accuracy() const noexcept { return gesture_accuracy_; }
    const UserModelConfig& config() const noexcept { return config_; }

    Preference preference(Capability capability, const InterfaceConfig& config) const;
    TaskResult perform(Capability capability, const InterfaceConfig& config, Rng& rng) const;

private:
    std::size_t id_;
    bool impaired_;
    double gesture_accuracy_;
    UserModelConfig config_;
};

// Rolling recognition accuracy over the last W interactions.
class AccuracyWindow {
public:
    explicit AccuracyWindow(std::size_t size);
    void push(bool recognized);
    double accuracy() const;
    std::size_t size() const noexcept { return items_.size(); }

private:
    std::size_t capacity_;
    std::deque<bool> items_;
};

// Deterministic cost model of applying an interface change, in milliseconds: a fixed
// base, the recognizer's compute, and a per-field UI update cost.
struct LatencyModel {
    double base_ms = 20.0;
    double ns_per_mac = 0.05;
    double per_field_ms = 15.0;
    std::size_t recognizer_macs = 0;

    double adaptation_ms(std::size_t changed_fields) const;

    friend bool operator==(const LatencyModel&, const LatencyModel&) = default;
};

struct Transition {
    std::size_t state = 0;
    std::size_t action = 0;
    double reward = 0.0;
    std::size_t next_state = 0;
    double latency_ms = 0.0;       // modeled, deterministic
    double wall_latency_ms = 0.0;  // measured selection + application time
    bool success = false;
    double time_s = 0.0;
    double feedback = 0.0;
};

struct EpisodeState {
    UserState state;
    AccuracyWindow window;
};

// Starts an episode: seeds the accuracy window with W simulated recognitions and picks
// the starting interface (uniform when `exploring_start`, otherwise the static default).
EpisodeState begin_episode(const SimulatedUser& user, const RLHyperparams& params, bool exploring_start, Rng& rng);

// Selects an action, simulates the task, computes the reward, applies q_update (when
// `learn`), and advances the capability estimate.
Transition step_episode(const SimulatedUser& user, QTable& q, EpisodeState& episode, const RLHyperparams& params,
                        double epsilon, const LatencyModel& latency, bool learn, Rng& rng);

struct PolicyTraining {
    QTable q;
    std::vector<double> episode_returns;
    std::vector<double> epsilons;
};

PolicyTraining train_policy(std::span<const SimulatedUser> users, const RLHyperparams& params, std::uint64_t seed,
                            const LatencyModel& latency = {});

// Runs a fixed (non-learning) policy: greedy over `q`, or the constant `fixed` config when given.
std::vector<Transition> run_policy(const SimulatedUser& user, const QTable* q, std::optional<InterfaceConfig> fixed,
                                   const RLHyperparams& params, std::size_t episodes, const LatencyModel& latency,
                                   std::uint64_t seed);

// Fraction of low-capability states whose greedy action is kAccessibleConfig.
double accessible_choice_rate(const QTable& q);

// Small deterministic MDP with known transitions and rewards, for checking Q-learning
// against value iteration.
struct DiagnosticMdp {
    std::size_t states = 3;
    std::size_t actions = 2;
    std::vector<std::size_t> next;  // next[s * actions + a]
    std::vector<double> reward;     // reward[s * actions + a]

    static DiagnosticMdp standard();
};

QTable value_iteration(const DiagnosticMdp& mdp, double discount, double tolerance = 1e-13,
                       std::size_t max_iterations = 100000);

// Q-learning on the diagnostic MDP with uniformly random exploration (sweeps over
// every state-action pair), scaled rewards by `reward_scale`.
QTable train_diagnostic(const DiagnosticMdp& mdp, const RLHyperparams& params, std::size_t sweeps,
                        double reward_scale = 1.0);

void export_policy_csv(const QTable& q, const std::filesystem::path& path);
void export_policy_json(const QTable& q, const std::filesystem::path& path);
void export_curves_csv(const PolicyTraining& training, const std::filesystem::path& path);
QTable load_policy_json(const std::filesystem::path& path);

}  // namespace gestura
