#include "gestura/optim.hpp"

#include <cmath>

#include "gestura/errors.hpp"

namespace gestura {

std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::Adam ? "adam" : "sgd"; }

OptimizerKind optimizer_from_string(const std::string& name) {
    if (name == "sgd") return OptimizerKind::Sgd;
    if (name == "adam") return OptimizerKind::Adam;
    throw ConfigError("unknown optimizer '" + name + "' (expected sgd or adam)");
}

Optimizer::Optimizer(const OptimizerConfig& config, std::size_t parameter_count) : config_(config) {
    if (!(config.learning_rate >= 0.0)) throw ParameterError("learning rate must be non-negative");
    state_.learning_rate = config.learning_rate;
    state_.first_moment.assign(parameter_count, 0.0);
    state_.second_moment.assign(parameter_count, 0.0);
}

void Optimizer::step(std::span<double> params, std::span<const double> grads) {
    if (params.size() != grads.size() || params.size() != state_.first_moment.size()) {
        throw ShapeError("optimizer step: " + std::to_string(params.size()) + " parameters vs " +
                         std::to_string(grads.size()) + " gradients (state sized " +
                         std::to_string(state_.first_moment.size()) + ")");
    }
    ++state_.step;
    const double lr = config_.learning_rate;
    if (config_.kind == OptimizerKind::Sgd) {
        for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grads[i];
        return;
    }
    const double b1 = config_.beta1, b2 = config_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(state_.step));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(state_.step));
    auto& m = state_.first_moment;
    auto& v = state_.second_moment;
    for (std::size_t i = 0; i < params.size(); ++i) {
        m[i] = b1 * m[i] + (1.0 - b1) * grads[i];
        v[i] = b2 * v[i] + (1.0 - b2) * grads[i] * grads[i];
        params[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.epsilon);
    }
}

}  // namespace gestura
