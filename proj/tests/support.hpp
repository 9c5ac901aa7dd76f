#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include <unistd.h>

#include "gestura/autodiff.hpp"
#include "gestura/params.hpp"
#include "gestura/rng.hpp"

namespace testing {

using gestura::Rng;
using gestura::Tensor;
namespace ad = gestura::ad;

inline Tensor random_tensor(gestura::Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    for (auto& v : t.data()) v = rng.uniform(lo, hi);
    return t;
}

// Relative error with a 1e-6 floor on the denominator. Central differences at h = 1e-5 carry
// about 1e-11 of round-off, so below the floor a relative figure measures noise, not the gradient.
inline constexpr double kGradientFloor = 1e-6;

inline double gradient_error(double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), kGradientFloor});
}

// Scalar probe of an arbitrary output: sum(out * weights), weights drawn once per check.
inline ad::Var project(ad::Var out, const Tensor& weights) {
    auto& tape = *out.tape();
    return ad::sum(ad::mul(out, tape.constant(weights)));
}

struct GradReport {
    double worst = 0.0;
    std::size_t coordinates = 0;
    double analytic = 0.0;  // at the worst coordinate
    double numeric = 0.0;

    void note(double a, double n) {
        const double e = gradient_error(a, n);
        if (e >= worst) {
            worst = e;
            analytic = a;
            numeric = n;
        }
        ++coordinates;
    }
};

inline std::ostream& operator<<(std::ostream& os, const GradReport& r) {
    return os << "worst " << r.worst << " (analytic " << r.analytic << ", numeric " << r.numeric << ")";
}

// Central differences (step h) of loss(params) against the tape gradient, over `limit`
// randomly chosen coordinates (all when limit >= size).
inline GradReport check_parameter_gradient(
    const gestura::ModelParameters& params,
    const std::function<ad::Var(ad::Tape&, const gestura::ParamBinding&)>& loss, Rng& rng, std::size_t limit,
    double h = 1e-5) {
    std::vector<double> analytic;
    {
        ad::Tape tape;
        gestura::ParamBinding binding(tape, params);
        auto l = loss(tape, binding);
        tape.backward(l);
        analytic = binding.gradient();
    }
    auto value_at = [&](const gestura::ModelParameters& p) {
        ad::Tape tape;
        gestura::ParamBinding binding(tape, p);
        return loss(tape, binding).value()[0];
    };
    std::vector<std::size_t> coords(params.size());
    for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
    if (limit < coords.size()) {
        rng.shuffle(coords.begin(), coords.end());
        coords.resize(limit);
    }
    GradReport report;
    auto probe = params;
    for (auto i : coords) {
        const double x = params.values[i];
        probe.values[i] = x + h;
        const double up = value_at(probe);
        probe.values[i] = x - h;
        const double down = value_at(probe);
        probe.values[i] = x;
        report.note(analytic[i], (up - down) / (2 * h));
    }
    return report;
}

// Same check for leaf tensors fed to `fn`.
inline GradReport check_input_gradient(std::vector<Tensor> inputs,
                                       const std::function<ad::Var(ad::Tape&, std::vector<ad::Var>&)>& fn,
                                       double h = 1e-5) {
    std::vector<std::vector<double>> analytic;
    {
        ad::Tape tape;
        std::vector<ad::Var> leaves;
        for (auto& t : inputs) leaves.push_back(tape.leaf(t));
        auto l = fn(tape, leaves);
        tape.backward(l);
        for (auto& v : leaves) analytic.emplace_back(v.grad().begin(), v.grad().end());
    }
    auto value_at = [&](const std::vector<Tensor>& xs) {
        ad::Tape tape;
        std::vector<ad::Var> leaves;
        for (auto& t : xs) leaves.push_back(tape.leaf(t));
        return fn(tape, leaves).value()[0];
    };
    GradReport report;
    auto probe = inputs;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        for (std::size_t i = 0; i < inputs[k].size(); ++i) {
            const double x = inputs[k][i];
            probe[k][i] = x + h;
            const double up = value_at(probe);
            probe[k][i] = x - h;
            const double down = value_at(probe);
            probe[k][i] = x;
            report.note(analytic[k][i], (up - down) / (2 * h));
        }
    }
    return report;
}

inline gestura::ModelParameters random_parameters(std::shared_ptr<const gestura::ParamLayout> layout, Rng& rng,
                                                  double scale = 0.5) {
    gestura::ModelParameters p{std::vector<double>(layout->total()), layout};
    for (auto& v : p.values) v = rng.uniform(-scale, scale);
    return p;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::uint64_t counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("gestura-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace testing
