#include "gestura/layers.hpp"

#include <cmath>

#include "gestura/errors.hpp"

namespace gestura::layers {

Linear declare_linear(ParamLayout& layout, const std::string& name, std::size_t in, std::size_t out, bool bias,
                      InitKind weight_init) {
    Linear l;
    l.in = in;
    l.out = out;
    l.weight = layout.add(name + ".weight", {in, out}, weight_init, in);
    if (bias) l.bias = layout.add(name + ".bias", {out}, InitKind::Zeros);
    return l;
}

ad::Var apply(const Linear& l, ad::Var x, const ParamBinding& p) {
    auto y = ad::matmul(x, p[l.weight]);
    if (l.bias != kNoParam) y = ad::add_row(y, p[l.bias]);
    return y;
}

Norm declare_norm(ParamLayout& layout, const std::string& name, std::size_t dim) {
    return {layout.add(name + ".gain", {dim}, InitKind::Ones), layout.add(name + ".bias", {dim}, InitKind::Zeros)};
}

ad::Var apply(const Norm& n, ad::Var x, const ParamBinding& p) {
    return ad::add_row(ad::mul_row(ad::layer_norm(x), p[n.gain]), p[n.bias]);
}

SelfAttention declare_attention(ParamLayout& layout, const std::string& name, std::size_t dim, std::size_t heads) {
    if (heads == 0 || dim % heads != 0) {
        throw ParameterError("attention width " + std::to_string(dim) + " not divisible into " +
                             std::to_string(heads) + " heads");
    }
    SelfAttention a;
    a.heads = heads;
    a.query = declare_linear(layout, name + ".query", dim, dim);
    a.key = declare_linear(layout, name + ".key", dim, dim);
    a.value = declare_linear(layout, name + ".value", dim, dim);
    a.output = declare_linear(layout, name + ".output", dim, dim);
    return a;
}

ad::Var apply(const SelfAttention& a, ad::Var x, const ParamBinding& p, AttentionTrace* trace) {
    const std::size_t dim = a.query.out;
    const std::size_t width = dim / a.heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(width));
    auto q = apply(a.query, x, p);
    auto k = apply(a.key, x, p);
    auto v = apply(a.value, x, p);
    std::vector<ad::Var> heads;
    heads.reserve(a.heads);
    for (std::size_t h = 0; h < a.heads; ++h) {
        ad::Var qh = a.heads == 1 ? q : ad::col_slice(q, h * width, (h + 1) * width);
        ad::Var kh = a.heads == 1 ? k : ad::col_slice(k, h * width, (h + 1) * width);
        ad::Var vh = a.heads == 1 ? v : ad::col_slice(v, h * width, (h + 1) * width);
        auto weights = ad::softmax(ad::scale(ad::matmul(qh, ad::transpose(kh)), scale));
        if (trace) trace->maps.push_back(weights.value());
        heads.push_back(ad::matmul(weights, vh));
    }
    auto merged = a.heads == 1 ? heads.front() : ad::concat_cols(heads);
    return apply(a.output, merged, p);
}

std::size_t mac_count(const SelfAttention& a, std::size_t tokens) {
    const std::size_t d = a.query.out;
    return 4 * tokens * d * d + 2 * tokens * tokens * d;
}

TransformerBlock declare_block(ParamLayout& layout, const std::string& name, std::size_t dim, std::size_t heads,
                               std::size_t hidden) {
    TransformerBlock b;
    b.norm1 = declare_norm(layout, name + ".norm1", dim);
    b.attention = declare_attention(layout, name + ".attention", dim, heads);
    b.norm2 = declare_norm(layout, name + ".norm2", dim);
    b.ff1 = declare_linear(layout, name + ".ff1", dim, hidden);
    b.ff2 = declare_linear(layout, name + ".ff2", hidden, dim);
    return b;
}

ad::Var apply(const TransformerBlock& b, ad::Var x, const ParamBinding& p, AttentionTrace* trace) {
    auto h = ad::add(x, apply(b.attention, apply(b.norm1, x, p), p, trace));
    auto f = apply(b.ff2, ad::gelu(apply(b.ff1, apply(b.norm2, h, p), p)), p);
    return ad::add(h, f);
}

std::size_t mac_count(const TransformerBlock& b, std::size_t tokens) {
    return mac_count(b.attention, tokens) + 2 * tokens * b.ff1.in * b.ff1.out;
}

}  // namespace gestura::layers
