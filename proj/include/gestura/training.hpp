#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gestura/metrics.hpp"
#include "gestura/model.hpp"
#include "gestura/optim.hpp"
#include "gestura/synthdata.hpp"

namespace gestura {

struct LocalTrainConfig {
    std::size_t epochs = 1;
    std::size_t batch_size = 16;
    OptimizerConfig optimizer;
    std::vector<double> class_weights;  // per-class loss weights; empty means uniform
};

// Cross-entropy loss of one sample (scaled by `weight`); adds its gradient (trainable
// entries only) into `grad`.
double accumulate_gradient(const GestureModel& model, const ModelParameters& params, const std::vector<bool>& trainable,
                           const GestureSample& sample, std::span<double> grad, double weight = 1.0);

// Inverse-frequency class weights n / (C * n_c) over `samples`; classes without samples get 1.
std::vector<double> inverse_frequency_weights(const Dataset& dataset, std::span<const std::size_t> samples,
                                              std::size_t classes);

// Mini-batch training over `samples` (visited in a seeded shuffled order per epoch).
// Returns the mean loss of every batch in order. A fresh optimizer is created per call.
std::vector<double> train_epochs(const GestureModel& model, ModelParameters& params, const Dataset& dataset,
                                 std::span<const std::size_t> samples, const LocalTrainConfig& config,
                                 std::uint64_t seed);

struct DenoiserConfig {
    std::size_t pairs = 240;
    std::size_t epochs = 4;
    std::size_t batch_size = 16;
    double impaired_fraction = 0.4;
    OptimizerConfig optimizer{OptimizerKind::Adam, 0.01};

    friend bool operator==(const DenoiserConfig&, const DenoiserConfig&) = default;
};

// Fits the accel denoising pre-pass to (clean, noisy) synthetic pairs, leaving every
// other entry untouched. Returns the per-batch reconstruction loss.
std::vector<double> pretrain_denoiser(const GestureModel& model, ModelParameters& params, const SynthConfig& synth,
                                      const DenoiserConfig& config, std::uint64_t seed);

std::size_t predict_label(const GestureModel& model, const ModelParameters& params, const MultimodalInput& input);

ConfusionMatrix evaluate_model(const GestureModel& model, const ModelParameters& params, const Dataset& dataset,
                               std::span<const std::size_t> samples, std::size_t threads = 1);

}  // namespace gestura
