#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gestura/autodiff.hpp"
#include "gestura/layers.hpp"
#include "gestura/params.hpp"

namespace gestura {

enum class Modality { Visual, Accel, Emg };

std::string to_string(Modality m);

// Camera frame [H x W x C], values in [0, 1].
struct VisualInput {
    Tensor frame;
};

// Wrist accelerometer series [T x 3] in units of g.
struct AccelInput {
    Tensor series;
    double sample_rate_hz = 50.0;
};

// Surface EMG series [T x E] plus the symmetric electrode adjacency (row-major E x E, self-loops set).
struct EmgInput {
    Tensor series;
    std::vector<std::uint8_t> adjacency;
};

struct ModalEmbedding {
    Tensor vector;  // [d]
    Modality modality = Modality::Visual;
};

struct EncoderConfig {
    std::size_t dim = 32;
    std::size_t heads = 4;

    // visual transformer
    std::size_t frame_size = 32;
    std::size_t frame_channels = 1;
    std::size_t patch = 4;
    std::size_t vit_blocks = 2;
    std::size_t ffn_multiplier = 2;

    // temporal conv net
    std::size_t accel_channels = 3;
    std::size_t min_series_length = 8;
    std::size_t tcn_kernel = 3;
    std::vector<std::size_t> dilations{1, 2, 4};
    std::size_t denoise_kernel = 7;

    // graph attention net
    std::size_t electrodes = 8;
    std::size_t emg_windows = 4;
    std::size_t gat_layers = 2;
    double gat_negative_slope = 0.2;

    friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

// Ring adjacency with self-loops and extra links `skip` electrodes away.
std::vector<std::uint8_t> ring_adjacency(std::size_t electrodes, std::size_t skip = 2);
std::vector<std::uint8_t> full_adjacency(std::size_t electrodes);

// Toy ViT: patchify, linear patch embedding + learned positions, pre-norm transformer
// blocks, mean pool, output projection.
class VisualEncoder {
public:
    VisualEncoder(const EncoderConfig& config, ParamLayout& layout, const std::string& prefix = "visual");

    // Patch matrix [num_patches x patch*patch*C]; validates shape and value range.
    Tensor patchify(const VisualInput& input) const;
    ad::Var forward(ad::Tape& tape, const ParamBinding& params, const VisualInput& input,
                    AttentionTrace* trace = nullptr) const;
    std::size_t num_patches() const noexcept { return patches_; }
    std::size_t mac_count() const;

private:
    EncoderConfig config_;
    std::size_t patches_ = 0;
    layers::Linear embed_;
    std::size_t positions_ = kNoParam;
    std::vector<layers::TransformerBlock> blocks_;
    layers::Norm final_norm_;
    layers::Linear projection_;
};

// TCN with a learned denoising pre-pass: centered conv smoother, causal dilated conv
// stack with residuals, one self-attention layer over time, mean pool, projection.
class AccelEncoder {
public:
    AccelEncoder(const EncoderConfig& config, ParamLayout& layout, const std::string& prefix = "accel");

    void validate(const AccelInput& input) const;
    ad::Var denoise(ad::Tape& tape, const ParamBinding& params, ad::Var series) const;
    // Causal dilated stack applied to an (already denoised) series; output [T x d].
    ad::Var conv_stack(const ParamBinding& params, ad::Var series) const;
    ad::Var forward(ad::Tape& tape, const ParamBinding& params, const AccelInput& input,
                    AttentionTrace* trace = nullptr) const;
    std::size_t receptive_field() const;
    std::size_t mac_count(std::size_t length) const;
    const std::string& denoise_prefix() const noexcept { return denoise_prefix_; }

private:
    EncoderConfig config_;
    std::string denoise_prefix_;
    std::size_t denoise_kernel_ = kNoParam;
    struct ConvLayer {
        std::size_t kernel = kNoParam;
        std::size_t bias = kNoParam;
        std::size_t dilation = 1;
        bool residual = false;
    };
    std::vector<ConvLayer> convs_;
    layers::Norm attention_norm_;
    layers::SelfAttention attention_;
    layers::Linear projection_;
};

// Classical per-electrode statistics (MAV, RMS, zero-crossing rate) over equal windows: [E x 3W].
Tensor emg_node_features(const Tensor& series, std::size_t windows);

// GAT over electrode graph: per-layer shared projection, additive attention logits with
// LeakyReLU, neighborhood-masked softmax, mean over nodes, projection.
class EmgEncoder {
public:
    EmgEncoder(const EncoderConfig& config, ParamLayout& layout, const std::string& prefix = "emg");

    void validate(const EmgInput& input) const;
    ad::Var forward(ad::Tape& tape, const ParamBinding& params, const EmgInput& input,
                    AttentionTrace* trace = nullptr) const;
    // Node-level output before pooling, [E x d]; exposed for equivariance checks.
    ad::Var node_states(ad::Tape& tape, const ParamBinding& params, const EmgInput& input,
                        AttentionTrace* trace = nullptr) const;
    std::size_t mac_count() const;

private:
    EncoderConfig config_;
    struct GatLayer {
        layers::Linear transform;
        std::size_t attend_source = kNoParam;
        std::size_t attend_target = kNoParam;
        std::size_t bias = kNoParam;
    };
    std::vector<GatLayer> layers_;
    layers::Linear projection_;
};

}  // namespace gestura
