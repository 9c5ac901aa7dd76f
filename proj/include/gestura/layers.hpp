#pragma once

#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "gestura/autodiff.hpp"
#include "gestura/params.hpp"

namespace gestura {

inline constexpr std::size_t kNoParam = std::numeric_limits<std::size_t>::max();

// Attention maps captured during a forward pass, one matrix per head and layer.
struct AttentionTrace {
    std::vector<Tensor> maps;
};

namespace layers {

struct Linear {
    std::size_t weight = kNoParam;
    std::size_t bias = kNoParam;
    std::size_t in = 0, out = 0;
};

Linear declare_linear(ParamLayout& layout, const std::string& name, std::size_t in, std::size_t out,
                      bool bias = true, InitKind weight_init = InitKind::FanIn);
ad::Var apply(const Linear& l, ad::Var x, const ParamBinding& p);

struct Norm {
    std::size_t gain = kNoParam;
    std::size_t bias = kNoParam;
};

Norm declare_norm(ParamLayout& layout, const std::string& name, std::size_t dim);
ad::Var apply(const Norm& n, ad::Var x, const ParamBinding& p);

// Multi-head scaled dot-product self-attention over the rows of x.
struct SelfAttention {
    Linear query, key, value, output;
    std::size_t heads = 1;
};

SelfAttention declare_attention(ParamLayout& layout, const std::string& name, std::size_t dim, std::size_t heads);
ad::Var apply(const SelfAttention& a, ad::Var x, const ParamBinding& p, AttentionTrace* trace = nullptr);
std::size_t mac_count(const SelfAttention& a, std::size_t tokens);

// Pre-norm transformer block: x + attn(norm(x)), then h + ffn(norm(h)).
struct TransformerBlock {
    Norm norm1;
    SelfAttention attention;
    Norm norm2;
    Linear ff1, ff2;
};

TransformerBlock declare_block(ParamLayout& layout, const std::string& name, std::size_t dim, std::size_t heads,
                               std::size_t hidden);
ad::Var apply(const TransformerBlock& b, ad::Var x, const ParamBinding& p, AttentionTrace* trace = nullptr);
std::size_t mac_count(const TransformerBlock& b, std::size_t tokens);

}  // namespace layers
}  // namespace gestura
