#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "gestura/context.hpp"
#include "gestura/errors.hpp"
#include "gestura/fusion.hpp"
#include "gestura/model.hpp"
#include "support.hpp"

using namespace gestura;
using testing::random_tensor;

namespace {

ModalEmbedding emb(std::vector<double> v, Modality m) { return {Tensor::vector(std::move(v)), m}; }

std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

}  // namespace

TEST_SUITE("fusion") {

TEST_CASE("fuse examples") {
    const auto V = emb({3, 0}, Modality::Visual);
    const auto A = emb({0, 3}, Modality::Accel);
    const auto E = emb({0, 0}, Modality::Emg);
    const auto x = fuse(V, A, E, {});
    CHECK(x.vector[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(x.vector[1] == doctest::Approx(1.0).epsilon(1e-15));

    const auto degenerate = fuse(V, A, E, {800.0, -800.0, -800.0});
    CHECK(std::abs(degenerate.vector[0] - 3.0) < 1e-12);
    CHECK(std::abs(degenerate.vector[1]) < 1e-12);

    Rng rng(2);
    for (int t = 0; t < 100; ++t) {
        std::vector<double> same{rng.normal(), rng.normal(), rng.normal()};
        FusionWeights w{rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5)};
        const auto y = fuse(emb(same, Modality::Visual), emb(same, Modality::Accel), emb(same, Modality::Emg), w);
        for (int i = 0; i < 3; ++i) CHECK(std::abs(y.vector[i] - same[i]) < 1e-12);
    }

    CHECK_THROWS_AS(fuse(emb({1, 2}, Modality::Visual), emb({1}, Modality::Accel), E, {}), ShapeError);
}

TEST_CASE("effective fusion weights lie on the simplex") {
    Rng rng(7);
    for (int t = 0; t < 10000; ++t) {
        FusionWeights w{rng.uniform(-700, 700), rng.uniform(-30, 30), rng.normal()};
        const auto e = w.effective();
        for (double v : e) CHECK(v >= 0.0);
        CHECK(std::abs(e[0] + e[1] + e[2] - 1.0) < 1e-9);
    }
}

TEST_CASE("fuse is linear in the visual slot") {
    Rng rng(3);
    for (int t = 0; t < 100; ++t) {
        FusionWeights w{rng.normal(), rng.normal(), rng.normal()};
        const auto v1 = emb({rng.normal(), rng.normal()}, Modality::Visual);
        const auto v2 = emb({rng.normal(), rng.normal()}, Modality::Visual);
        const auto a = emb({rng.normal(), rng.normal()}, Modality::Accel);
        const auto e = emb({rng.normal(), rng.normal()}, Modality::Emg);
        const auto zero = emb({0, 0}, Modality::Visual);
        const auto sum = emb({v1.vector[0] + v2.vector[0], v1.vector[1] + v2.vector[1]}, Modality::Visual);
        const auto lhs = fuse(sum, a, e, w).vector;
        const auto f1 = fuse(v1, a, e, w).vector;
        const auto f2 = fuse(v2, a, e, w).vector;
        const auto f0 = fuse(zero, a, e, w).vector;
        for (int i = 0; i < 2; ++i) CHECK(std::abs(lhs[i] - (f1[i] + f2[i] - f0[i])) < 1e-12);
    }
}

TEST_CASE("taped fuse matches the direct form and its gradient") {
    Rng rng(31);
    for (int draw = 0; draw < 20; ++draw) {
        const auto v = random_tensor({6}, rng), a = random_tensor({6}, rng), e = random_tensor({6}, rng);
        const auto raw = random_tensor({3}, rng, -2, 2);
        ad::Tape tape;
        auto x = fuse(tape.constant(v), tape.constant(a), tape.constant(e), tape.constant(raw)).value();
        const auto direct = fuse({v, Modality::Visual}, {a, Modality::Accel}, {e, Modality::Emg}, {raw[0], raw[1], raw[2]});
        for (std::size_t i = 0; i < 6; ++i) CHECK(std::abs(x[i] - direct.vector[i]) < 1e-14);

        const auto w = random_tensor({6}, rng);
        auto r = testing::check_input_gradient({v, a, e, raw}, [&](ad::Tape&, std::vector<ad::Var>& in) {
            return testing::project(fuse(in[0], in[1], in[2], in[3]), w);
        });
        CHECK_MESSAGE(r.worst < 1e-4, r);
    }
}

TEST_CASE("classifier outputs") {
    ParamLayout layout;
    Classifier head(layout, 8);
    auto shared = std::make_shared<ParamLayout>(layout);
    ModelParameters zero{std::vector<double>(shared->total()), shared};
    Rng rng(1);
    {
        ad::Tape tape;
        ParamBinding b(tape, zero);
        const auto p = classify(b, head, tape.constant(random_tensor({8}, rng)));
        REQUIRE(p.size() == kGestureClasses);
        for (double v : p) CHECK(v == doctest::Approx(1.0 / 15).epsilon(1e-14));
    }
    for (int t = 0; t < 200; ++t) {
        auto params = testing::random_parameters(shared, rng, 3.0);
        ad::Tape tape;
        ParamBinding b(tape, params);
        auto x = tape.constant(random_tensor({8}, rng, -10, 10));
        const auto logits = values(head.logits(b, x).value());
        const auto p = classify(b, head, x);
        double total = 0;
        for (double v : p) {
            CHECK(v >= 0.0);
            total += v;
        }
        CHECK(std::abs(total - 1.0) < 1e-9);
        CHECK(std::max_element(p.begin(), p.end()) - p.begin() ==
              std::max_element(logits.begin(), logits.end()) - logits.begin());
    }
}

TEST_CASE("classifier cross-entropy gradient") {
    ParamLayout layout;
    Classifier head(layout, 8);
    auto shared = std::make_shared<ParamLayout>(layout);
    Rng rng(104);
    for (int draw = 0; draw < 20; ++draw) {
        auto params = testing::random_parameters(shared, rng);
        const auto x = random_tensor({8}, rng);
        const std::size_t label = rng.below(kGestureClasses);
        auto r = testing::check_parameter_gradient(
            params,
            [&](ad::Tape& tape, const ParamBinding& b) {
                return ad::cross_entropy(head.logits(b, tape.constant(x)), label);
            },
            rng, shared->total());
        CHECK_MESSAGE(r.worst < 1e-4, r);
        auto rx = testing::check_input_gradient({x}, [&](ad::Tape& tape, std::vector<ad::Var>& in) {
            ParamBinding b(tape, params);
            return ad::cross_entropy(head.logits(b, in[0]), label);
        });
        CHECK(rx.worst < 1e-4);
    }
}

}  // TEST_SUITE

TEST_SUITE("context") {

TEST_CASE("context input validation") {
    CHECK_NOTHROW(ContextInput{0.0, 1.0, {0.5}}.validate());
    CHECK_THROWS_AS((ContextInput{1.2, 0.0, {}}.validate()), ValidationError);
    CHECK_THROWS_AS((ContextInput{0.5, -0.1, {}}.validate()), ValidationError);
    CHECK_THROWS_AS((ContextInput{0.5, 0.5, {2.0}}.validate()), ValidationError);
}

TEST_CASE("context encoder determinism and zero parameters") {
    for (bool bias : {false, true}) {
        ContextConfig cfg{8, 1, bias};
        ParamLayout layout;
        ContextEncoder enc(cfg, layout);
        auto shared = std::make_shared<ParamLayout>(layout);
        Rng rng(bias ? 2 : 3);
        auto params = testing::random_parameters(shared, rng);
        const ContextInput in{0.3, 0.7, {0.1}};
        ad::Tape tape;
        ParamBinding b(tape, params);
        CHECK(values(enc.forward(tape, b, in).value()) == values(enc.forward(tape, b, in).value()));

        ModelParameters zero{std::vector<double>(shared->total()), shared};
        if (bias) {
            // bias-only output: set the output bias, everything else zero
            const auto idx = *shared->find("context.output.bias");
            auto zb = zero;
            for (std::size_t i = 0; i < cfg.dim; ++i) zb.slice(idx)[i] = 0.1 * (i + 1);
            ParamBinding bz(tape, zb);
            const auto y = values(enc.forward(tape, bz, in).value());
            for (std::size_t i = 0; i < cfg.dim; ++i) CHECK(y[i] == doctest::Approx(0.1 * (i + 1)));
        } else {
            ParamBinding bz(tape, zero);
            for (double v : values(enc.forward(tape, bz, in).value())) CHECK(v == 0.0);
        }
        CHECK_THROWS_AS(enc.forward(tape, b, {1.5, 0.0, {0.0}}), ValidationError);
        CHECK_THROWS_AS(enc.forward(tape, b, {0.5, 0.0, {}}), ShapeError);
    }
}

TEST_CASE("context encoder with zeroed positions ignores token order") {
    ContextConfig cfg{8, 2, true};
    ParamLayout layout;
    ContextEncoder enc(cfg, layout);
    auto shared = std::make_shared<ParamLayout>(layout);
    Rng rng(5);
    for (int t = 0; t < 20; ++t) {
        auto params = testing::random_parameters(shared, rng);
        for (auto& v : params.slice(*shared->find("context.positions"))) v = 0.0;
        const ContextInput in{rng.uniform(), rng.uniform(), {rng.uniform(), rng.uniform()}};
        const ContextInput swapped{in.extra[1], in.extra[0], {in.fatigue, in.lighting}};
        ad::Tape tape;
        ParamBinding b(tape, params);
        const auto x = values(enc.forward(tape, b, in).value());
        const auto y = values(enc.forward(tape, b, swapped).value());
        for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(x[i] - y[i]) < 1e-12);
    }
}

TEST_CASE("context encoder gradient") {
    ContextConfig cfg{8, 1, true};
    ParamLayout layout;
    ContextEncoder enc(cfg, layout);
    auto shared = std::make_shared<ParamLayout>(layout);
    Rng rng(105);
    for (int draw = 0; draw < 20; ++draw) {
        auto params = testing::random_parameters(shared, rng);
        const ContextInput in{rng.uniform(), rng.uniform(), {rng.uniform()}};
        const auto w = random_tensor({cfg.dim}, rng);
        auto r = testing::check_parameter_gradient(
            params, [&](ad::Tape& tape, const ParamBinding& b) { return testing::project(enc.forward(tape, b, in), w); },
            rng, shared->total());
        CHECK_MESSAGE(r.worst < 1e-4, r);
    }
}

TEST_CASE("refiner is the identity at initialization") {
    ParamLayout layout;
    ContextRefiner refine(layout, 4, 6);
    auto shared = std::make_shared<ParamLayout>(layout);
    auto params = initialize_parameters(shared, 77);
    Rng rng(6);
    for (int t = 0; t < 50; ++t) {
        ad::Tape tape;
        ParamBinding b(tape, params);
        const auto x = random_tensor({6}, rng, -100, 100);
        const auto y = refine.apply(b, tape.constant(x), tape.constant(random_tensor({4}, rng))).value();
        CHECK(y == x);
    }
    ad::Tape tape;
    ParamBinding b(tape, params);
    CHECK_THROWS_AS(refine.apply(b, tape.constant(Tensor({5})), tape.constant(Tensor({4}))), ShapeError);
    CHECK_THROWS_AS(refine.apply(b, tape.constant(Tensor({6})), tape.constant(Tensor({3}))), ShapeError);
}

TEST_CASE("refiner with constant shift adds it") {
    ParamLayout layout;
    ContextRefiner refine(layout, 4, 6);
    auto shared = std::make_shared<ParamLayout>(layout);
    auto params = initialize_parameters(shared, 1);
    for (auto& v : params.slice(*shared->find("refine.shift.bias"))) v = 0.25;
    Rng rng(8);
    ad::Tape tape;
    ParamBinding b(tape, params);
    const auto x = random_tensor({6}, rng);
    const auto y = refine.apply(b, tape.constant(x), tape.constant(random_tensor({4}, rng))).value();
    for (std::size_t i = 0; i < 6; ++i) CHECK(y[i] == x[i] + 0.25);
}

TEST_CASE("refiner gradient") {
    ParamLayout layout;
    ContextRefiner refine(layout, 4, 6);
    auto shared = std::make_shared<ParamLayout>(layout);
    Rng rng(106);
    for (int draw = 0; draw < 20; ++draw) {
        auto params = testing::random_parameters(shared, rng);
        const auto w = random_tensor({6}, rng);
        auto r = testing::check_input_gradient(
            {random_tensor({6}, rng), random_tensor({4}, rng)}, [&](ad::Tape& tape, std::vector<ad::Var>& in) {
                ParamBinding b(tape, params);
                return testing::project(refine.apply(b, in[0], in[1]), w);
            });
        CHECK_MESSAGE(r.worst < 1e-4, r);
        const auto x = random_tensor({6}, rng), c = random_tensor({4}, rng);
        auto rp = testing::check_parameter_gradient(
            params,
            [&](ad::Tape& tape, const ParamBinding& b) {
                return testing::project(refine.apply(b, tape.constant(x), tape.constant(c)), w);
            },
            rng, shared->total());
        CHECK(rp.worst < 1e-4);
    }
}

TEST_CASE("end-to-end model gradient through fusion, context, and head") {
    ModelConfig mc;
    mc.encoders.dim = 8;
    mc.encoders.heads = 2;
    mc.encoders.frame_size = 8;
    mc.encoders.electrodes = 4;
    mc.encoders.emg_windows = 2;
    mc.encoders.denoise_kernel = 3;
    mc.context = {4, 0, true};
    GestureModel model(mc);
    Rng rng(107);
    for (int draw = 0; draw < 20; ++draw) {
        auto params = testing::random_parameters(model.layout(), rng);
        MultimodalInput in{{random_tensor({8, 8, 1}, rng, 0, 1)},
                           {random_tensor({10, 3}, rng), 50.0},
                           {random_tensor({10, 4}, rng), ring_adjacency(4)},
                           {rng.uniform(), rng.uniform(), {}}};
        const std::size_t label = rng.below(kGestureClasses);
        auto r = testing::check_parameter_gradient(
            params,
            [&](ad::Tape& tape, const ParamBinding& b) { return ad::cross_entropy(model.logits(tape, b, in), label); },
            rng, 120);
        CHECK_MESSAGE(r.worst < 1e-4, r);
    }
}

}  // TEST_SUITE
