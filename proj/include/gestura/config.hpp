#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gestura/adaptui.hpp"
#include "gestura/comparison.hpp"
#include "gestura/federated.hpp"
#include "gestura/model.hpp"
#include "gestura/synthdata.hpp"
#include "gestura/training.hpp"

namespace gestura {

enum class Scale { Desk, Paper };
enum class PartitionKind { Participant, Iid };

std::string to_string(Scale s);
std::string to_string(PartitionKind p);

struct FederatedSettings {
    std::size_t clients = 10;
    PartitionKind partition = PartitionKind::Participant;
    RoundConfig round;
    bool inverse_frequency_weights = false;  // class-weighted cross-entropy

    friend bool operator==(const FederatedSettings&, const FederatedSettings&) = default;
};

struct EvaluationSettings {
    std::size_t episodes_per_user = 10;
    double static_latency_ms = 300.0;
    bool micro_f1 = false;
    LatencyModel latency;
    // Single-modality baselines to train and compare, in row order.
    std::vector<Modality> baselines{Modality::Visual, Modality::Accel, Modality::Emg};

    friend bool operator==(const EvaluationSettings&, const EvaluationSettings&) = default;
};

struct ExperimentConfig {
    Scale scale = Scale::Desk;
    std::uint64_t seed = 7;
    std::string output_dir = "runs/desk";

    DatasetSpec dataset;
    EncoderConfig encoders;  // frame_size and electrodes follow the dataset section
    ContextConfig context;
    bool use_context = true;

    bool pretrain_denoiser = true;
    DenoiserConfig denoiser;
    FederatedSettings federated;

    RLHyperparams rl;
    UserModelConfig users;
    EvaluationSettings evaluation;

    static ExperimentConfig desk();
    static ExperimentConfig paper();
    static ExperimentConfig for_scale(Scale s);

    // Throws ConfigError naming the offending field.
    void validate() const;

    // Dataset spec with the master seed and model-facing shapes applied.
    DatasetSpec dataset_spec() const;
    ModelConfig model_config(const ModalitySet& modalities) const;
    ComparisonConfig comparison_config(std::size_t threads) const;

    friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

// Parses TOML text. Keys that are absent keep the preset of the file's `scale` (desk when
// omitted); unknown keys and type mismatches are ConfigErrors with "source:line: field" prefixes.
ExperimentConfig parse_config(const std::string& text, const std::string& source = "config");
ExperimentConfig load_config(const std::filesystem::path& path);

// Complete TOML rendering; parse_config(to_toml(c)) == c.
std::string to_toml(const ExperimentConfig& config);

}  // namespace gestura
