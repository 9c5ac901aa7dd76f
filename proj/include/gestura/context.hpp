#pragma once

#include <vector>

#include "gestura/autodiff.hpp"
#include "gestura/fusion.hpp"
#include "gestura/layers.hpp"

namespace gestura {

// Ambient conditions for one interaction; every channel is normalized to [0, 1].
struct ContextInput {
    double lighting = 1.0;
    double fatigue = 0.0;
    std::vector<double> extra;

    std::vector<double> channels() const;
    void validate() const;
};

struct ContextEmbedding {
    Tensor vector;  // [d_ctx]
};

struct ContextConfig {
    std::size_t dim = 8;
    std::size_t extra_channels = 0;
    bool output_bias = true;

    friend bool operator==(const ContextConfig&, const ContextConfig&) = default;
};

// One self-attention block over context channels treated as tokens
// (token = value * embedding + position), mean pool, linear output.
class ContextEncoder {
public:
    ContextEncoder(const ContextConfig& config, ParamLayout& layout, const std::string& prefix = "context");

    ad::Var forward(ad::Tape& tape, const ParamBinding& params, const ContextInput& input,
                    AttentionTrace* trace = nullptr) const;
    std::size_t tokens() const noexcept { return 2 + config_.extra_channels; }
    std::size_t dim() const noexcept { return config_.dim; }
    std::size_t mac_count() const;

private:
    ContextConfig config_;
    std::size_t value_embed_ = kNoParam;
    std::size_t positions_ = kNoParam;
    layers::SelfAttention attention_;
    layers::Linear output_;
};

// Feature-wise conditioning x' = x * (1 + s(c)) + t(c); s and t start at zero so a
// fresh refiner is the identity.
class ContextRefiner {
public:
    ContextRefiner(ParamLayout& layout, std::size_t context_dim, std::size_t feature_dim,
                   const std::string& prefix = "refine");

    ad::Var apply(const ParamBinding& params, ad::Var feature, ad::Var context) const;
    std::size_t mac_count() const noexcept { return 2 * scale_.in * scale_.out; }

private:
    layers::Linear scale_;
    layers::Linear shift_;
};

}  // namespace gestura
