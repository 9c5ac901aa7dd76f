#include "gestura/model.hpp"

#include <algorithm>

#include "gestura/errors.hpp"

namespace gestura {

GestureModel::GestureModel(ModelConfig config) : config_(std::move(config)), layout_(std::make_shared<ParamLayout>()) {
    if (config_.modalities.count() == 0) throw ParameterError("model needs at least one modality");
    auto& layout = *layout_;
    if (config_.modalities.visual) visual_.emplace(config_.encoders, layout);
    if (config_.modalities.accel) accel_.emplace(config_.encoders, layout);
    if (config_.modalities.emg) emg_.emplace(config_.encoders, layout);
    if (config_.modalities.count() > 1) {
        fusion_ = layout.add("fusion.raw_weights", {config_.modalities.count()}, InitKind::Zeros);
    }
    if (config_.use_context) {
        context_.emplace(config_.context, layout);
        refiner_.emplace(layout, config_.context.dim, config_.encoders.dim);
    }
    classifier_.emplace(layout, config_.encoders.dim, config_.classes);
}

ModelParameters GestureModel::initialize(std::uint64_t seed) const { return initialize_parameters(layout_, seed); }

std::vector<std::string> GestureModel::frozen_prefixes() const {
    if (accel_) return {accel_->denoise_prefix()};
    return {};
}

std::vector<bool> GestureModel::trainable_mask() const {
    const auto frozen = frozen_prefixes();
    return layout_->trainable_mask(frozen);
}

ad::Var GestureModel::feature(ad::Tape& tape, const ParamBinding& params, const MultimodalInput& input) const {
    std::vector<ad::Var> embeddings;
    if (visual_) embeddings.push_back(visual_->forward(tape, params, input.visual));
    if (accel_) embeddings.push_back(accel_->forward(tape, params, input.accel));
    if (emg_) embeddings.push_back(emg_->forward(tape, params, input.emg));
    ad::Var x;
    if (embeddings.size() == 3) {
        x = fuse(embeddings[0], embeddings[1], embeddings[2], params[fusion_]);
    } else if (embeddings.size() == 2) {
        auto w = ad::softmax(params[fusion_]);
        x = ad::add(ad::scale_by(embeddings[0], ad::element(w, 0)), ad::scale_by(embeddings[1], ad::element(w, 1)));
    } else {
        x = embeddings.front();
    }
    if (context_) x = refiner_->apply(params, x, context_->forward(tape, params, input.context));
    return x;
}

ad::Var GestureModel::logits(ad::Tape& tape, const ParamBinding& params, const MultimodalInput& input) const {
    return classifier_->logits(params, feature(tape, params, input));
}

std::vector<double> GestureModel::probabilities(const ModelParameters& params, const MultimodalInput& input) const {
    ad::Tape tape;
    std::vector<bool> frozen(layout_->entries().size(), false);
    ParamBinding binding(tape, params, &frozen);
    return ad::softmax(logits(tape, binding, input).value().data());
}

std::size_t GestureModel::predict(const ModelParameters& params, const MultimodalInput& input) const {
    const auto p = probabilities(params, input);
    return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

std::size_t GestureModel::mac_count() const {
    std::size_t macs = classifier_->mac_count();
    if (visual_) macs += visual_->mac_count();
    if (accel_) macs += accel_->mac_count(64);
    if (emg_) macs += emg_->mac_count();
    if (context_) macs += context_->mac_count() + refiner_->mac_count();
    return macs;
}

}  // namespace gestura
