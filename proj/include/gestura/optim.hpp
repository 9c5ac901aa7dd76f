#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace gestura {

enum class OptimizerKind { Sgd, Adam };

std::string to_string(OptimizerKind kind);
OptimizerKind optimizer_from_string(const std::string& name);

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::Sgd;
    double learning_rate = 0.05;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    friend bool operator==(const OptimizerConfig&, const OptimizerConfig&) = default;
};

struct OptimizerState {
    double learning_rate = 0.0;
    std::vector<double> first_moment;
    std::vector<double> second_moment;
    std::uint64_t step = 0;
};

// First-order optimizer over a flat parameter vector. Plain SGD applies p <- p - lr * g exactly.
class Optimizer {
public:
    Optimizer(const OptimizerConfig& config, std::size_t parameter_count);

    void step(std::span<double> params, std::span<const double> grads);
    const OptimizerState& state() const noexcept { return state_; }

private:
    OptimizerConfig config_;
    OptimizerState state_;
};

}  // namespace gestura
