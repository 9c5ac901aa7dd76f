#include "gestura/context.hpp"

#include <cmath>

#include "gestura/errors.hpp"

namespace gestura {

std::vector<double> ContextInput::channels() const {
    std::vector<double> c{lighting, fatigue};
    c.insert(c.end(), extra.begin(), extra.end());
    return c;
}

void ContextInput::validate() const {
    const auto c = channels();
    for (std::size_t i = 0; i < c.size(); ++i) {
        if (!(c[i] >= 0.0 && c[i] <= 1.0)) {
            throw ValidationError("context channel " + std::to_string(i) + " out of range [0, 1]: " +
                                  std::to_string(c[i]));
        }
    }
}

ContextEncoder::ContextEncoder(const ContextConfig& config, ParamLayout& layout, const std::string& prefix)
    : config_(config) {
    value_embed_ = layout.add(prefix + ".value_embed", {1, config.dim}, InitKind::FanIn, 1);
    positions_ = layout.add(prefix + ".positions", {tokens(), config.dim}, InitKind::FanIn, config.dim);
    attention_ = layers::declare_attention(layout, prefix + ".attention", config.dim, 1);
    output_ = layers::declare_linear(layout, prefix + ".output", config.dim, config.dim, config.output_bias);
}

ad::Var ContextEncoder::forward(ad::Tape& tape, const ParamBinding& params, const ContextInput& input,
                                AttentionTrace* trace) const {
    input.validate();
    const auto values = input.channels();
    if (values.size() != tokens()) {
        throw ShapeError("context has " + std::to_string(values.size()) + " channels, encoder expects " +
                         std::to_string(tokens()));
    }
    auto column = tape.constant(Tensor({values.size(), 1}, values));
    auto x = ad::add(ad::matmul(column, params[value_embed_]), params[positions_]);
    auto h = ad::add(x, layers::apply(attention_, x, params, trace));
    return ad::reshape(layers::apply(output_, ad::mean_rows(h), params), {config_.dim});
}

std::size_t ContextEncoder::mac_count() const {
    return tokens() * config_.dim + layers::mac_count(attention_, tokens()) + config_.dim * config_.dim;
}

ContextRefiner::ContextRefiner(ParamLayout& layout, std::size_t context_dim, std::size_t feature_dim,
                               const std::string& prefix)
    : scale_(layers::declare_linear(layout, prefix + ".scale", context_dim, feature_dim, true, InitKind::Zeros)),
      shift_(layers::declare_linear(layout, prefix + ".shift", context_dim, feature_dim, true, InitKind::Zeros)) {}

ad::Var ContextRefiner::apply(const ParamBinding& params, ad::Var feature, ad::Var context) const {
    const std::size_t d = feature.value().size();
    if (d != scale_.out) {
        throw ShapeError("refine feature width " + std::to_string(d) + " != " + std::to_string(scale_.out));
    }
    if (context.value().size() != scale_.in) {
        throw ShapeError("refine context width " + std::to_string(context.value().size()) + " != " +
                         std::to_string(scale_.in));
    }
    auto c = ad::reshape(context, {1, scale_.in});
    auto s = ad::reshape(layers::apply(scale_, c, params), {d});
    auto t = ad::reshape(layers::apply(shift_, c, params), {d});
    // x * (1 + s) + t == x + x * s + t
    return ad::add(ad::add(feature, ad::mul(feature, s)), t);
}

}  // namespace gestura
