#include "gestura/training.hpp"

#include <algorithm>

#include "gestura/errors.hpp"
#include "gestura/parallel.hpp"
#include "gestura/rng.hpp"

namespace gestura {

double accumulate_gradient(const GestureModel& model, const ModelParameters& params, const std::vector<bool>& trainable,
                           const GestureSample& sample, std::span<double> grad, double weight) {
    if (grad.size() != params.size()) throw ShapeError("gradient buffer length does not match parameters");
    ad::Tape tape;
    ParamBinding binding(tape, params, &trainable);
    auto logits = model.logits(tape, binding, sample.input);
    auto loss = ad::cross_entropy(logits, sample.label, weight);
    tape.backward(loss);
    const auto g = binding.gradient();
    for (std::size_t i = 0; i < g.size(); ++i) grad[i] += g[i];
    return loss.value()[0];
}

std::vector<double> train_epochs(const GestureModel& model, ModelParameters& params, const Dataset& dataset,
                                 std::span<const std::size_t> samples, const LocalTrainConfig& config,
                                 std::uint64_t seed) {
    if (samples.empty()) throw ParameterError("training needs at least one sample");
    if (config.batch_size == 0) throw ParameterError("batch size must be positive");
    if (!config.class_weights.empty() && config.class_weights.size() != model.config().classes) {
        throw ShapeError("class_weights needs one entry per class");
    }
    const auto trainable = model.trainable_mask();
    Optimizer optimizer(config.optimizer, params.size());
    Rng rng(seed);
    std::vector<std::size_t> order(samples.begin(), samples.end());
    std::vector<double> grad(params.size());
    std::vector<double> losses;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(order.begin(), order.end());
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            std::fill(grad.begin(), grad.end(), 0.0);
            double loss = 0.0;
            for (std::size_t i = start; i < end; ++i) {
                const auto& sample = dataset.samples.at(order[i]);
                const double w = config.class_weights.empty() ? 1.0 : config.class_weights.at(sample.label);
                loss += accumulate_gradient(model, params, trainable, sample, grad, w);
            }
            const double inv = 1.0 / static_cast<double>(end - start);
            for (auto& g : grad) g *= inv;
            losses.push_back(loss * inv);
            optimizer.step(params.values, grad);
        }
    }
    return losses;
}

std::vector<double> inverse_frequency_weights(const Dataset& dataset, std::span<const std::size_t> samples,
                                              std::size_t classes) {
    std::vector<std::size_t> counts(classes, 0);
    for (auto i : samples) ++counts.at(dataset.samples.at(i).label);
    std::vector<double> w(classes, 1.0);
    for (std::size_t c = 0; c < classes; ++c) {
        if (counts[c] > 0) {
            w[c] = static_cast<double>(samples.size()) / (static_cast<double>(classes) * static_cast<double>(counts[c]));
        }
    }
    return w;
}

std::vector<double> pretrain_denoiser(const GestureModel& model, ModelParameters& params, const SynthConfig& synth,
                                      const DenoiserConfig& config, std::uint64_t seed) {
    const auto* accel = model.accel();
    if (!accel) return {};
    if (config.batch_size == 0) throw ParameterError("batch size must be positive");

    std::vector<AccelPair> pairs;
    pairs.reserve(config.pairs);
    for (std::size_t i = 0; i < config.pairs; ++i) {
        const auto s = derive_seed(seed, i);
        Rng rng(s);
        const bool impaired = rng.bernoulli(config.impaired_fraction);
        const auto label = static_cast<GestureLabel>(rng.below(kGestureClasses));
        const auto profile = generate_participant(derive_seed(s, "participant"), impaired);
        pairs.push_back(generate_accel_pair(profile, label, derive_seed(s, "pair"), synth.accel_noise_g, synth));
    }

    const auto& layout = *model.layout();
    std::vector<bool> trainable(layout.entries().size(), false);
    for (std::size_t e = 0; e < trainable.size(); ++e) {
        trainable[e] = layout.entry(e).name.starts_with(accel->denoise_prefix());
    }

    Optimizer optimizer(config.optimizer, params.size());
    Rng rng(derive_seed(seed, "order"));
    std::vector<std::size_t> order(pairs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::vector<double> grad(params.size());
    std::vector<double> losses;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(order.begin(), order.end());
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            std::fill(grad.begin(), grad.end(), 0.0);
            double loss = 0.0;
            for (std::size_t i = start; i < end; ++i) {
                const auto& pair = pairs[order[i]];
                ad::Tape tape;
                ParamBinding binding(tape, params, &trainable);
                auto out = accel->denoise(tape, binding, tape.constant(pair.noisy));
                auto l = ad::mse(out, pair.clean);
                tape.backward(l);
                const auto g = binding.gradient();
                for (std::size_t j = 0; j < g.size(); ++j) grad[j] += g[j];
                loss += l.value()[0];
            }
            const double inv = 1.0 / static_cast<double>(end - start);
            for (auto& g : grad) g *= inv;
            losses.push_back(loss * inv);
            optimizer.step(params.values, grad);
        }
    }
    return losses;
}

std::size_t predict_label(const GestureModel& model, const ModelParameters& params, const MultimodalInput& input) {
    ad::Tape tape;
    const std::vector<bool> frozen(model.layout()->entries().size(), false);
    ParamBinding binding(tape, params, &frozen);
    const auto logits = model.logits(tape, binding, input).value();
    const auto d = logits.data();
    return static_cast<std::size_t>(std::max_element(d.begin(), d.end()) - d.begin());
}

ConfusionMatrix evaluate_model(const GestureModel& model, const ModelParameters& params, const Dataset& dataset,
                               std::span<const std::size_t> samples, std::size_t threads) {
    std::vector<std::size_t> predicted(samples.size());
    parallel_for(samples.size(), threads, [&](std::size_t i) {
        predicted[i] = predict_label(model, params, dataset.samples.at(samples[i]).input);
    });
    ConfusionMatrix cm(model.config().classes);
    for (std::size_t i = 0; i < samples.size(); ++i) cm.add(dataset.samples[samples[i]].label, predicted[i]);
    return cm;
}

}  // namespace gestura
