#include "gestura/federated.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "gestura/errors.hpp"
#include "gestura/parallel.hpp"
#include "gestura/rng.hpp"

namespace gestura {

namespace fs = std::filesystem;
using nlohmann::json;

void RoundConfig::validate() const {
    if (local_epochs < 1) throw ParameterError("local_epochs must be at least 1");
    if (batch_size < 1) throw ParameterError("batch_size must be at least 1");
    if (!(client_fraction > 0.0 && client_fraction <= 1.0)) throw ParameterError("client_fraction outside (0, 1]");
    if (!(optimizer.learning_rate >= 0.0) || !std::isfinite(optimizer.learning_rate)) {
        throw ParameterError("learning rate must be finite and non-negative");
    }
}

std::uint64_t client_round_seed(std::uint64_t seed, std::size_t round, std::size_t client) {
    return derive_seed(derive_seed(seed, round), client);
}

ClientUpdate local_train(const GestureModel& model, const ModelParameters& global, const Dataset& dataset,
                         const ClientPartition& partition, const RoundConfig& config, std::uint64_t seed) {
    if (partition.samples.empty()) {
        throw ParameterError("client " + std::to_string(partition.client_id) + " has an empty partition");
    }
    ClientUpdate update;
    update.client_id = partition.client_id;
    update.parameters = global;
    update.sample_count = partition.samples.size();
    update.losses = train_epochs(model, update.parameters, dataset, partition.samples, config.local(), seed);
    return update;
}

std::vector<std::size_t> sample_clients(std::size_t client_count, double fraction, std::uint64_t seed) {
    std::vector<std::size_t> ids(client_count);
    for (std::size_t i = 0; i < client_count; ++i) ids[i] = i;
    if (fraction >= 1.0) return ids;
    const auto take = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(client_count))));
    Rng rng(seed);
    rng.shuffle(ids.begin(), ids.end());
    ids.resize(std::min(take, client_count));
    std::sort(ids.begin(), ids.end());
    return ids;
}

RoundResult run_round(const GestureModel& model, const ModelParameters& global, const Dataset& dataset,
                      std::span<const ClientPartition> partitions, std::span<const std::size_t> validation,
                      const RoundConfig& config, std::size_t round, std::uint64_t seed, std::size_t threads) {
    config.validate();
    if (partitions.empty()) throw ParameterError("run_round needs at least one client partition");
    const auto start = std::chrono::steady_clock::now();

    const auto chosen =
        sample_clients(partitions.size(), config.client_fraction, derive_seed(derive_seed(seed, round), "sample"));
    std::vector<ClientUpdate> updates(chosen.size());
    parallel_for(chosen.size(), threads, [&](std::size_t i) {
        const auto& part = partitions[chosen[i]];
        updates[i] = local_train(model, global, dataset, part, config, client_round_seed(seed, round, part.client_id));
    });

    RoundResult result;
    result.report.round = round;
    for (const auto& u : updates) {
        ClientReport c{u.client_id, u.sample_count, u.losses.empty() ? 0.0 : u.losses.back(), u.losses};
        for (double l : u.losses) {
            if (!std::isfinite(l)) {
                throw NumericError("non-finite loss from client " + std::to_string(u.client_id), round);
            }
        }
        result.report.clients.push_back(std::move(c));
    }
    std::sort(result.report.clients.begin(), result.report.clients.end(),
              [](const auto& a, const auto& b) { return a.client_id < b.client_id; });
    result.global = aggregate(updates);
    if (!result.global.all_finite()) throw NumericError("non-finite parameters after aggregation", round);

    if (!validation.empty()) {
        const auto cm = evaluate_model(model, result.global, dataset, validation, threads);
        result.report.validation_f1 = f1_macro(cm);
        result.report.validation_accuracy = accuracy(cm);
    }
    result.report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

bool TrainingState::record(const RoundResult& result, std::size_t patience) {
    global = result.global;
    next_round = result.report.round + 1;
    if (result.report.validation_f1 > best_f1) {
        best_f1 = result.report.validation_f1;
        best = result.global;
        best_round = result.report.round;
        stale_rounds = 0;
    } else {
        ++stale_rounds;
    }
    stopped = stale_rounds > patience;
    return stopped;
}

std::string round_history_line(const RoundReport& report) {
    json clients = json::array();
    for (const auto& c : report.clients) {
        clients.push_back({{"client_id", c.client_id}, {"sample_count", c.sample_count}, {"final_loss", c.final_loss}});
    }
    json line = {{"round", report.round},
                 {"clients", clients},
                 {"validation", {{"macro_f1", report.validation_f1}, {"accuracy", report.validation_accuracy}}}};
    return line.dump();
}

namespace {

void write_state(const fs::path& dir, const TrainingState& state) {
    save_checkpoint(dir / "global.ckpt", state.global);
    save_checkpoint(dir / "best.ckpt", state.best);
    json j = {{"next_round", state.next_round},   {"best_f1", state.best_f1},
              {"best_round", state.best_round},   {"stale_rounds", state.stale_rounds},
              {"stopped", state.stopped}};
    const auto path = dir / "state.json";
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw IoError("failed writing " + path.string());
}

TrainingState read_state(const fs::path& dir) {
    const auto path = dir / "state.json";
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw IoError("malformed " + path.string() + ": " + e.what());
    }
    TrainingState s;
    s.next_round = j.at("next_round").get<std::size_t>();
    s.best_f1 = j.at("best_f1").get<double>();
    s.best_round = j.at("best_round").get<std::size_t>();
    s.stale_rounds = j.at("stale_rounds").get<std::size_t>();
    s.stopped = j.at("stopped").get<bool>();
    s.global = load_checkpoint(dir / "global.ckpt");
    s.best = load_checkpoint(dir / "best.ckpt");
    return s;
}

TrainingResult continue_training(const GestureModel& model, TrainingState state, const Dataset& dataset,
                                 std::span<const ClientPartition> partitions, std::span<const std::size_t> validation,
                                 const RoundConfig& config, std::uint64_t seed, const TrainingOptions& options) {
    TrainingResult result;
    std::ofstream history;
    if (options.output_dir) {
        fs::create_directories(*options.output_dir);
        const auto path = *options.output_dir / "history.jsonl";
        history.open(path, state.next_round == 0 ? std::ios::trunc : std::ios::app);
        if (!history) throw IoError("cannot write " + path.string());
        if (state.next_round == 0) write_state(*options.output_dir, state);
    }
    while (!state.stopped && state.next_round < config.rounds) {
        const auto round = state.next_round;
        auto r = run_round(model, state.global, dataset, partitions, validation, config, round, seed, options.threads);
        state.record(r, config.patience);
        if (options.on_round) options.on_round(r.report);
        if (options.output_dir) {
            history << round_history_line(r.report) << '\n' << std::flush;
            if (!history) throw IoError("failed writing history in " + options.output_dir->string());
            write_state(*options.output_dir, state);
        }
        result.history.push_back(std::move(r.report));
        if (options.stop_after_round && round >= *options.stop_after_round) break;
    }
    result.state = std::move(state);
    return result;
}

}  // namespace

TrainingResult run_training(const GestureModel& model, const ModelParameters& initial, const Dataset& dataset,
                            std::span<const ClientPartition> partitions, std::span<const std::size_t> validation,
                            const RoundConfig& config, std::uint64_t seed, const TrainingOptions& options) {
    config.validate();
    TrainingState state;
    state.global = initial;
    state.best = initial;
    return continue_training(model, std::move(state), dataset, partitions, validation, config, seed, options);
}

TrainingResult resume_training(const GestureModel& model, const Dataset& dataset,
                               std::span<const ClientPartition> partitions, std::span<const std::size_t> validation,
                               const RoundConfig& config, std::uint64_t seed, const TrainingOptions& options) {
    config.validate();
    if (!options.output_dir) throw ConfigError("resume needs an output directory holding a saved state");
    auto state = read_state(*options.output_dir);
    if (*state.global.layout != *model.layout()) throw ConfigError("saved state does not match the model layout");
    return continue_training(model, std::move(state), dataset, partitions, validation, config, seed, options);
}

TrainingResult train_centralized(const GestureModel& model, const ModelParameters& initial, const Dataset& dataset,
                                 std::span<const std::size_t> train, std::span<const std::size_t> validation,
                                 const RoundConfig& config, std::uint64_t seed, std::size_t threads) {
    config.validate();
    std::vector<std::size_t> order(train.begin(), train.end());
    std::sort(order.begin(), order.end());
    TrainingResult result;
    result.state.global = initial;
    result.state.best = initial;
    for (std::size_t epoch = 0; epoch < config.rounds && !result.state.stopped; ++epoch) {
        RoundResult r;
        r.global = result.state.global;
        const auto losses = train_epochs(model, r.global, dataset, order, config.local(),
                                         client_round_seed(seed, epoch, 0));
        r.report.round = epoch;
        r.report.clients.push_back({0, order.size(), losses.empty() ? 0.0 : losses.back(), losses});
        if (!r.global.all_finite()) throw NumericError("non-finite parameters", epoch);
        if (!validation.empty()) {
            const auto cm = evaluate_model(model, r.global, dataset, validation, threads);
            r.report.validation_f1 = f1_macro(cm);
            r.report.validation_accuracy = accuracy(cm);
        }
        result.state.record(r, config.patience);
        result.history.push_back(std::move(r.report));
    }
    return result;
}

}  // namespace gestura
