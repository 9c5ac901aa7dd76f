#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "gestura/autodiff.hpp"
#include "gestura/encoders.hpp"
#include "gestura/layers.hpp"

namespace gestura {

inline constexpr std::size_t kGestureClasses = 15;

// Unconstrained raw weights; the effective (alpha, beta, gamma) are their softmax.
struct FusionWeights {
    double raw_alpha = 0.0;
    double raw_beta = 0.0;
    double raw_gamma = 0.0;

    std::array<double, 3> effective() const;
};

struct GestureFeature {
    Tensor vector;  // [d]
};

using GestureLabel = std::size_t;

// X = alpha * V + beta * A + gamma * E with softmax-normalized weights.
GestureFeature fuse(const ModalEmbedding& v, const ModalEmbedding& a, const ModalEmbedding& e, const FusionWeights& w);
ad::Var fuse(ad::Var v, ad::Var a, ad::Var e, ad::Var raw_weights);

// Linear head + softmax over the gesture classes.
class Classifier {
public:
    Classifier(ParamLayout& layout, std::size_t dim, std::size_t classes = kGestureClasses,
               const std::string& prefix = "classifier");

    ad::Var logits(const ParamBinding& params, ad::Var feature) const;
    std::size_t classes() const noexcept { return head_.out; }
    std::size_t mac_count() const noexcept { return head_.in * head_.out; }

private:
    layers::Linear head_;
};

std::vector<double> classify(const ParamBinding& params, const Classifier& head, ad::Var feature);

}  // namespace gestura
