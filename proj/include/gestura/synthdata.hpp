#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "gestura/fusion.hpp"
#include "gestura/model.hpp"

namespace gestura {

struct ParticipantProfile {
    std::size_t id = 0;
    bool impaired = false;
    double tremor_amplitude = 0.0;   // g
    double tremor_frequency = 8.0;   // Hz, within [4, 12]
    double speed_factor = 1.0;       // (0, 1]; 1 = unimpaired pace
    double amplitude_scale = 1.0;    // (0, 1]
    double fatigue_base = 0.0;       // [0, 1]
    std::array<double, 8> electrode_gain{1, 1, 1, 1, 1, 1, 1, 1};

    void validate() const;
};

struct GestureSample {
    std::size_t index = 0;
    GestureLabel label = 0;
    std::size_t participant = 0;
    MultimodalInput input;
};

// Signal-level generation knobs. Noise sigmas of zero give noise-free signals.
struct SynthConfig {
    std::size_t frame_size = 16;
    std::size_t series_length = 64;
    double sample_rate_hz = 50.0;
    std::size_t electrodes = 8;
    double stroke_extent_m = 0.3;
    double accel_noise_g = 0.02;
    double visual_noise = 0.06;
    double emg_noise = 0.05;
    bool tremor_in_visual = true;

    static SynthConfig noise_free();

    friend bool operator==(const SynthConfig&, const SynthConfig&) = default;
};

struct DatasetSpec {
    std::size_t sample_count = 1000;
    std::size_t participant_count = 40;
    double impaired_fraction = 0.4;
    std::size_t class_count = kGestureClasses;
    std::array<double, 3> split{0.8, 0.1, 0.1};
    std::uint64_t seed = 7;
    SynthConfig synth;

    void validate() const;
    static DatasetSpec desk();
    static DatasetSpec paper();

    friend bool operator==(const DatasetSpec&, const DatasetSpec&) = default;
};

struct Dataset {
    DatasetSpec spec;
    std::vector<ParticipantProfile> participants;
    std::vector<GestureSample> samples;
    std::vector<std::uint8_t> adjacency;

    std::vector<std::size_t> samples_of(std::size_t participant) const;
};

struct DatasetSplit {
    std::vector<std::size_t> train, validation, test;                        // sample indices, ascending
    std::vector<std::size_t> train_participants, validation_participants, test_participants;
};

struct ClientPartition {
    std::size_t client_id = 0;
    std::vector<std::size_t> samples;       // ascending
    std::vector<std::size_t> participants;  // ascending

    friend bool operator==(const ClientPartition&, const ClientPartition&) = default;
};

// Names of the stroke templates, one per gesture class.
const std::array<std::string, kGestureClasses>& gesture_names();

// Stroke position (meters, before impairment transforms) at phase tau in [0, 1).
std::array<double, 3> stroke_position(GestureLabel label, double tau);

ParticipantProfile generate_participant(std::uint64_t seed, bool impaired, std::size_t id = 0);

GestureSample generate_sample(const ParticipantProfile& profile, GestureLabel label, std::uint64_t seed,
                              const SynthConfig& config = {});

struct AccelPair {
    Tensor clean;
    Tensor noisy;
};

// Noise-free accel series for a gesture and the same series with additive N(0, sigma^2) noise.
AccelPair generate_accel_pair(const ParticipantProfile& profile, GestureLabel label, std::uint64_t seed,
                              double noise_sigma, const SynthConfig& config = {});

Dataset generate_dataset(const DatasetSpec& spec, std::size_t threads = 1);

DatasetSplit split_dataset(const Dataset& dataset, const DatasetSpec& spec);

// Participant-level (non-IID) assignment: seeded shuffle then round-robin.
std::vector<ClientPartition> partition_clients(const Dataset& dataset, const std::vector<std::size_t>& train_samples,
                                               std::size_t client_count, std::uint64_t seed);

// Sample-level IID assignment, used as the federated-vs-centralized control.
std::vector<ClientPartition> partition_clients_iid(const Dataset& dataset,
                                                   const std::vector<std::size_t>& train_samples,
                                                   std::size_t client_count, std::uint64_t seed);

}  // namespace gestura
