#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "gestura/aggregation.hpp"
#include "gestura/training.hpp"

namespace gestura {

struct RoundConfig {
    std::size_t local_epochs = 1;
    std::size_t batch_size = 16;
    OptimizerConfig optimizer;
    double client_fraction = 1.0;
    std::size_t rounds = 50;
    std::size_t patience = 10;
    std::vector<double> class_weights;  // empty means uniform

    void validate() const;
    LocalTrainConfig local() const { return {local_epochs, batch_size, optimizer, class_weights}; }

    friend bool operator==(const RoundConfig&, const RoundConfig&) = default;
};

// Seed of client `client` in round `round`. Centralized training uses client 0.
std::uint64_t client_round_seed(std::uint64_t seed, std::size_t round, std::size_t client);

ClientUpdate local_train(const GestureModel& model, const ModelParameters& global, const Dataset& dataset,
                         const ClientPartition& partition, const RoundConfig& config, std::uint64_t seed);

// Clients taking part in a round: all when fraction is 1, otherwise ceil(fraction * K)
// chosen uniformly without replacement. Returned ascending.
std::vector<std::size_t> sample_clients(std::size_t client_count, double fraction, std::uint64_t seed);

struct ClientReport {
    std::size_t client_id = 0;
    std::size_t sample_count = 0;
    double final_loss = 0.0;
    std::vector<double> losses;
};

struct RoundReport {
    std::size_t round = 0;
    std::vector<ClientReport> clients;
    double validation_f1 = 0.0;
    double validation_accuracy = 0.0;
    double wall_seconds = 0.0;  // not part of the persisted history
};

struct RoundResult {
    ModelParameters global;
    RoundReport report;
};

RoundResult run_round(const GestureModel& model, const ModelParameters& global, const Dataset& dataset,
                      std::span<const ClientPartition> partitions, std::span<const std::size_t> validation,
                      const RoundConfig& config, std::size_t round, std::uint64_t seed, std::size_t threads = 1);

// Everything needed to continue a run exactly where it stopped.
struct TrainingState {
    std::size_t next_round = 0;
    ModelParameters global;
    ModelParameters best;
    double best_f1 = -1.0;
    std::size_t best_round = 0;
    std::size_t stale_rounds = 0;
    bool stopped = false;

    // Applies one round's validation score: returns true when training should stop.
    bool record(const RoundResult& result, std::size_t patience);
};

struct TrainingResult {
    TrainingState state;
    std::vector<RoundReport> history;
};

struct TrainingOptions {
    std::size_t threads = 1;
    std::optional<std::filesystem::path> output_dir;  // best.ckpt, state, history.jsonl
    std::optional<std::size_t> stop_after_round;      // interrupt (for resume tests)
    std::function<void(const RoundReport&)> on_round;
};

TrainingResult run_training(const GestureModel& model, const ModelParameters& initial, const Dataset& dataset,
                            std::span<const ClientPartition> partitions, std::span<const std::size_t> validation,
                            const RoundConfig& config, std::uint64_t seed, const TrainingOptions& options = {});

// Continues from a state previously persisted by run_training in `options.output_dir`.
TrainingResult resume_training(const GestureModel& model, const Dataset& dataset,
                               std::span<const ClientPartition> partitions, std::span<const std::size_t> validation,
                               const RoundConfig& config, std::uint64_t seed, const TrainingOptions& options);

// Plain (non-federated) training with the same epoch schedule and early stopping.
TrainingResult train_centralized(const GestureModel& model, const ModelParameters& initial, const Dataset& dataset,
                                 std::span<const std::size_t> train, std::span<const std::size_t> validation,
                                 const RoundConfig& config, std::uint64_t seed, std::size_t threads = 1);

std::string round_history_line(const RoundReport& report);

}  // namespace gestura
