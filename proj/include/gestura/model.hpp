#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gestura/context.hpp"
#include "gestura/encoders.hpp"
#include "gestura/fusion.hpp"
#include "gestura/params.hpp"

namespace gestura {

// Everything a recognizer consumes for one gesture.
struct MultimodalInput {
    VisualInput visual;
    AccelInput accel;
    EmgInput emg;
    ContextInput context;
};

struct ModalitySet {
    bool visual = true;
    bool accel = true;
    bool emg = true;

    std::size_t count() const noexcept { return std::size_t{visual} + accel + emg; }
    friend bool operator==(const ModalitySet&, const ModalitySet&) = default;
};

struct ModelConfig {
    EncoderConfig encoders;
    ContextConfig context;
    ModalitySet modalities;
    bool use_context = true;
    std::size_t classes = kGestureClasses;
};

// Encoders for the enabled modalities, softmax-weighted fusion (when more than one
// modality is active), optional context refinement, and the classification head.
class GestureModel {
public:
    explicit GestureModel(ModelConfig config);

    const ModelConfig& config() const noexcept { return config_; }
    std::shared_ptr<const ParamLayout> layout() const noexcept { return layout_; }
    ModelParameters initialize(std::uint64_t seed) const;

    // Entries updated by classification training; the denoising pre-pass is trained separately.
    std::vector<bool> trainable_mask() const;
    std::vector<std::string> frozen_prefixes() const;

    ad::Var feature(ad::Tape& tape, const ParamBinding& params, const MultimodalInput& input) const;
    ad::Var logits(ad::Tape& tape, const ParamBinding& params, const MultimodalInput& input) const;

    std::vector<double> probabilities(const ModelParameters& params, const MultimodalInput& input) const;
    std::size_t predict(const ModelParameters& params, const MultimodalInput& input) const;

    std::size_t mac_count() const;

    const VisualEncoder* visual() const { return visual_ ? &*visual_ : nullptr; }
    const AccelEncoder* accel() const { return accel_ ? &*accel_ : nullptr; }
    const EmgEncoder* emg() const { return emg_ ? &*emg_ : nullptr; }
    const ContextEncoder* context() const { return context_ ? &*context_ : nullptr; }
    std::size_t fusion_entry() const noexcept { return fusion_; }

private:
    ModelConfig config_;
    std::shared_ptr<ParamLayout> layout_;
    std::optional<VisualEncoder> visual_;
    std::optional<AccelEncoder> accel_;
    std::optional<EmgEncoder> emg_;
    std::size_t fusion_ = kNoParam;
    std::optional<ContextEncoder> context_;
    std::optional<ContextRefiner> refiner_;
    std::optional<Classifier> classifier_;
};

}  // namespace gestura
