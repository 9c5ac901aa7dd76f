#include "gestura/encoders.hpp"

#include <cmath>

#include "gestura/errors.hpp"

namespace gestura {

std::string to_string(Modality m) {
    switch (m) {
        case Modality::Visual: return "visual";
        case Modality::Accel: return "accel";
        case Modality::Emg: return "emg";
    }
    return "visual";
}

std::vector<std::uint8_t> ring_adjacency(std::size_t electrodes, std::size_t skip) {
    std::vector<std::uint8_t> adj(electrodes * electrodes, 0);
    for (std::size_t i = 0; i < electrodes; ++i) {
        adj[i * electrodes + i] = 1;
        for (std::size_t step : {std::size_t{1}, skip}) {
            if (step == 0 || step >= electrodes) continue;
            const std::size_t j = (i + step) % electrodes;
            adj[i * electrodes + j] = adj[j * electrodes + i] = 1;
        }
    }
    return adj;
}

std::vector<std::uint8_t> full_adjacency(std::size_t electrodes) {
    return std::vector<std::uint8_t>(electrodes * electrodes, 1);
}

// ---------------------------------------------------------------------------
// Visual transformer

VisualEncoder::VisualEncoder(const EncoderConfig& config, ParamLayout& layout, const std::string& prefix)
    : config_(config) {
    if (config.patch == 0 || config.frame_size % config.patch != 0) {
        throw ShapeError("frame size " + std::to_string(config.frame_size) + " not divisible by patch size " +
                         std::to_string(config.patch));
    }
    const std::size_t grid = config.frame_size / config.patch;
    patches_ = grid * grid;
    const std::size_t d = config.dim;
    embed_ = layers::declare_linear(layout, prefix + ".patch_embed", config.patch * config.patch * config.frame_channels, d);
    positions_ = layout.add(prefix + ".positions", {patches_, d}, InitKind::FanIn, d);
    for (std::size_t b = 0; b < config.vit_blocks; ++b) {
        blocks_.push_back(layers::declare_block(layout, prefix + ".block" + std::to_string(b), d, config.heads,
                                                d * config.ffn_multiplier));
    }
    final_norm_ = layers::declare_norm(layout, prefix + ".final_norm", d);
    projection_ = layers::declare_linear(layout, prefix + ".projection", d, d);
}

Tensor VisualEncoder::patchify(const VisualInput& input) const {
    const auto& f = input.frame;
    if (f.rank() != 3) throw ShapeError("visual frame must be [H x W x C], got " + to_string(f.shape()));
    const std::size_t H = f.dim(0), W = f.dim(1), C = f.dim(2), p = config_.patch;
    if (H % p != 0 || W % p != 0) {
        throw ShapeError("visual frame " + to_string(f.shape()) + " not divisible into " + std::to_string(p) + "x" +
                         std::to_string(p) + " patches");
    }
    if (H != config_.frame_size || W != config_.frame_size || C != config_.frame_channels) {
        throw ShapeError("visual frame " + to_string(f.shape()) + " does not match configured " +
                         std::to_string(config_.frame_size) + "x" + std::to_string(config_.frame_size) + "x" +
                         std::to_string(config_.frame_channels));
    }
    for (double v : f.data()) {
        if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("visual frame values must lie in [0, 1]");
    }
    const std::size_t gw = W / p, width = p * p * C;
    Tensor out({(H / p) * gw, width});
    for (std::size_t r = 0; r < H; ++r)
        for (std::size_t c = 0; c < W; ++c)
            for (std::size_t ch = 0; ch < C; ++ch) {
                const std::size_t patch = (r / p) * gw + c / p;
                const std::size_t within = ((r % p) * p + c % p) * C + ch;
                out[patch * width + within] = f[(r * W + c) * C + ch];
            }
    return out;
}

ad::Var VisualEncoder::forward(ad::Tape& tape, const ParamBinding& params, const VisualInput& input,
                               AttentionTrace* trace) const {
    auto x = tape.constant(patchify(input));
    auto h = ad::add(layers::apply(embed_, x, params), params[positions_]);
    for (const auto& block : blocks_) h = layers::apply(block, h, params, trace);
    auto pooled = ad::mean_rows(layers::apply(final_norm_, h, params));
    return ad::reshape(layers::apply(projection_, pooled, params), {config_.dim});
}

std::size_t VisualEncoder::mac_count() const {
    std::size_t macs = patches_ * embed_.in * embed_.out;
    for (const auto& b : blocks_) macs += layers::mac_count(b, patches_);
    return macs + config_.dim * config_.dim;
}

// ---------------------------------------------------------------------------
// Temporal conv net

AccelEncoder::AccelEncoder(const EncoderConfig& config, ParamLayout& layout, const std::string& prefix)
    : config_(config), denoise_prefix_(prefix + ".denoise") {
    if (config.denoise_kernel % 2 == 0) throw ParameterError("denoise kernel length must be odd");
    const std::size_t c = config.accel_channels, d = config.dim, K = config.tcn_kernel;
    denoise_kernel_ = layout.add(denoise_prefix_ + ".kernel", {config.denoise_kernel, c, c}, InitKind::CenterTap);
    std::size_t in = c;
    for (std::size_t i = 0; i < config.dilations.size(); ++i) {
        if (config.dilations[i] < 1) throw ParameterError("TCN dilation must be >= 1");
        ConvLayer layer;
        const auto name = prefix + ".conv" + std::to_string(i);
        layer.kernel = layout.add(name + ".kernel", {K, in, d}, InitKind::FanIn, K * in);
        layer.bias = layout.add(name + ".bias", {d}, InitKind::Zeros);
        layer.dilation = config.dilations[i];
        layer.residual = in == d;
        convs_.push_back(layer);
        in = d;
    }
    attention_norm_ = layers::declare_norm(layout, prefix + ".attention_norm", d);
    attention_ = layers::declare_attention(layout, prefix + ".attention", d, 1);
    projection_ = layers::declare_linear(layout, prefix + ".projection", d, d);
}

void AccelEncoder::validate(const AccelInput& input) const {
    const auto& s = input.series;
    if (s.rank() != 2 || s.dim(1) != config_.accel_channels) {
        throw ShapeError("accel series must be [T x " + std::to_string(config_.accel_channels) + "], got " +
                         to_string(s.shape()));
    }
    if (s.dim(0) < config_.min_series_length) {
        throw ShapeError("accel series too short: T=" + std::to_string(s.dim(0)) + " < " +
                         std::to_string(config_.min_series_length));
    }
    if (!s.all_finite()) throw ValidationError("accel series contains non-finite values");
}

ad::Var AccelEncoder::denoise(ad::Tape&, const ParamBinding& params, ad::Var series) const {
    return ad::conv1d(series, params[denoise_kernel_], 1, (config_.denoise_kernel - 1) / 2);
}

ad::Var AccelEncoder::conv_stack(const ParamBinding& params, ad::Var series) const {
    auto h = series;
    for (const auto& layer : convs_) {
        auto y = ad::gelu(ad::add_row(ad::conv1d_dilated(h, params[layer.kernel], layer.dilation), params[layer.bias]));
        h = layer.residual ? ad::add(h, y) : y;
    }
    return h;
}

ad::Var AccelEncoder::forward(ad::Tape& tape, const ParamBinding& params, const AccelInput& input,
                              AttentionTrace* trace) const {
    validate(input);
    auto x = denoise(tape, params, tape.constant(input.series));
    auto h = conv_stack(params, x);
    h = ad::add(h, layers::apply(attention_, layers::apply(attention_norm_, h, params), params, trace));
    return ad::reshape(layers::apply(projection_, ad::mean_rows(h), params), {config_.dim});
}

std::size_t AccelEncoder::receptive_field() const {
    std::size_t r = 1;
    for (const auto& l : convs_) r += (config_.tcn_kernel - 1) * l.dilation;
    return r;
}

std::size_t AccelEncoder::mac_count(std::size_t length) const {
    const std::size_t c = config_.accel_channels, d = config_.dim;
    std::size_t macs = length * config_.denoise_kernel * c * c;
    std::size_t in = c;
    for (std::size_t i = 0; i < convs_.size(); ++i) {
        macs += length * config_.tcn_kernel * in * d;
        in = d;
    }
    return macs + layers::mac_count(attention_, length) + d * d;
}

// ---------------------------------------------------------------------------
// Graph attention net

Tensor emg_node_features(const Tensor& series, std::size_t windows) {
    if (series.rank() != 2) throw ShapeError("EMG series must be [T x E], got " + to_string(series.shape()));
    const std::size_t T = series.dim(0), E = series.dim(1);
    if (windows == 0 || T < windows) throw ShapeError("EMG series shorter than window count");
    Tensor out({E, 3 * windows});
    const std::size_t base = T / windows;
    for (std::size_t e = 0; e < E; ++e) {
        for (std::size_t w = 0; w < windows; ++w) {
            const std::size_t begin = w * base;
            const std::size_t end = (w + 1 == windows) ? T : begin + base;
            double abs_sum = 0.0, sq_sum = 0.0;
            std::size_t crossings = 0;
            for (std::size_t t = begin; t < end; ++t) {
                const double v = series[t * E + e];
                abs_sum += std::fabs(v);
                sq_sum += v * v;
                if (t > begin) {
                    const double prev = series[(t - 1) * E + e];
                    if ((prev < 0.0 && v >= 0.0) || (prev >= 0.0 && v < 0.0)) ++crossings;
                }
            }
            const double n = static_cast<double>(end - begin);
            out[e * 3 * windows + 3 * w + 0] = abs_sum / n;
            out[e * 3 * windows + 3 * w + 1] = std::sqrt(sq_sum / n);
            out[e * 3 * windows + 3 * w + 2] = static_cast<double>(crossings) / n;
        }
    }
    return out;
}

EmgEncoder::EmgEncoder(const EncoderConfig& config, ParamLayout& layout, const std::string& prefix) : config_(config) {
    const std::size_t d = config.dim;
    std::size_t in = 3 * config.emg_windows;
    for (std::size_t l = 0; l < config.gat_layers; ++l) {
        const auto name = prefix + ".gat" + std::to_string(l);
        GatLayer g;
        g.transform = layers::declare_linear(layout, name + ".transform", in, d, false);
        g.attend_source = layout.add(name + ".attend_source", {d, 1}, InitKind::FanIn, d);
        g.attend_target = layout.add(name + ".attend_target", {d, 1}, InitKind::FanIn, d);
        g.bias = layout.add(name + ".bias", {d}, InitKind::Zeros);
        layers_.push_back(g);
        in = d;
    }
    projection_ = layers::declare_linear(layout, prefix + ".projection", d, d);
}

void EmgEncoder::validate(const EmgInput& input) const {
    const auto& s = input.series;
    const std::size_t E = config_.electrodes;
    if (s.rank() != 2 || s.dim(1) != E) {
        throw ShapeError("EMG series must be [T x " + std::to_string(E) + "], got " + to_string(s.shape()));
    }
    if (!s.all_finite()) throw ValidationError("EMG series contains non-finite values");
    if (input.adjacency.size() != E * E) throw ValidationError("EMG adjacency must be E x E");
    for (std::size_t i = 0; i < E; ++i) {
        if (!input.adjacency[i * E + i]) throw ValidationError("EMG adjacency diagonal must be set (self-loops)");
        for (std::size_t j = i + 1; j < E; ++j) {
            if (static_cast<bool>(input.adjacency[i * E + j]) != static_cast<bool>(input.adjacency[j * E + i])) {
                throw ValidationError("EMG adjacency is not symmetric at (" + std::to_string(i) + ", " +
                                      std::to_string(j) + ")");
            }
        }
    }
}

ad::Var EmgEncoder::node_states(ad::Tape& tape, const ParamBinding& params, const EmgInput& input,
                                AttentionTrace* trace) const {
    validate(input);
    auto h = tape.constant(emg_node_features(input.series, config_.emg_windows));
    for (const auto& g : layers_) {
        auto wh = layers::apply(g.transform, h, params);
        auto source = ad::matmul(wh, params[g.attend_source]);
        auto target = ad::transpose(ad::matmul(wh, params[g.attend_target]));
        auto logits = ad::leaky_relu(ad::outer_add(source, target), config_.gat_negative_slope);
        auto weights = ad::masked_softmax(logits, input.adjacency);
        if (trace) trace->maps.push_back(weights.value());
        h = ad::gelu(ad::add_row(ad::matmul(weights, wh), params[g.bias]));
    }
    return h;
}

ad::Var EmgEncoder::forward(ad::Tape& tape, const ParamBinding& params, const EmgInput& input,
                            AttentionTrace* trace) const {
    auto h = node_states(tape, params, input, trace);
    return ad::reshape(layers::apply(projection_, ad::mean_rows(h), params), {config_.dim});
}

std::size_t EmgEncoder::mac_count() const {
    const std::size_t E = config_.electrodes, d = config_.dim;
    std::size_t macs = 0;
    for (const auto& g : layers_) macs += E * g.transform.in * d + 2 * E * d + E * E * d;
    return macs + d * d;
}

}  // namespace gestura
