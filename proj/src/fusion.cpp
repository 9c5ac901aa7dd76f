#include "gestura/fusion.hpp"

#include "gestura/errors.hpp"

namespace gestura {

std::array<double, 3> FusionWeights::effective() const {
    const std::array<double, 3> raw{raw_alpha, raw_beta, raw_gamma};
    auto w = ad::softmax(raw);
    return {w[0], w[1], w[2]};
}

GestureFeature fuse(const ModalEmbedding& v, const ModalEmbedding& a, const ModalEmbedding& e,
                    const FusionWeights& w) {
    const auto& V = v.vector;
    const auto& A = a.vector;
    const auto& E = e.vector;
    if (V.size() != A.size() || V.size() != E.size()) {
        throw ShapeError("fuse dimension mismatch: " + to_string(V.shape()) + ", " + to_string(A.shape()) + ", " +
                         to_string(E.shape()));
    }
    const auto [alpha, beta, gamma] = w.effective();
    Tensor out({V.size()});
    for (std::size_t i = 0; i < V.size(); ++i) out[i] = alpha * V[i] + beta * A[i] + gamma * E[i];
    return {std::move(out)};
}

ad::Var fuse(ad::Var v, ad::Var a, ad::Var e, ad::Var raw_weights) {
    if (v.value().size() != a.value().size() || v.value().size() != e.value().size()) {
        throw ShapeError("fuse dimension mismatch: " + to_string(v.shape()) + ", " + to_string(a.shape()) + ", " +
                         to_string(e.shape()));
    }
    if (raw_weights.value().size() != 3) throw ShapeError("fusion weights must hold three raw values");
    auto w = ad::softmax(raw_weights);
    auto x = ad::scale_by(v, ad::element(w, 0));
    x = ad::add(x, ad::scale_by(a, ad::element(w, 1)));
    return ad::add(x, ad::scale_by(e, ad::element(w, 2)));
}

Classifier::Classifier(ParamLayout& layout, std::size_t dim, std::size_t classes, const std::string& prefix)
    : head_(layers::declare_linear(layout, prefix + ".head", dim, classes)) {}

ad::Var Classifier::logits(const ParamBinding& params, ad::Var feature) const {
    auto row = ad::reshape(feature, {1, feature.value().size()});
    return ad::reshape(layers::apply(head_, row, params), {head_.out});
}

std::vector<double> classify(const ParamBinding& params, const Classifier& head, ad::Var feature) {
    return ad::softmax(head.logits(params, feature).value().data());
}

}  // namespace gestura
