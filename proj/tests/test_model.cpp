#include <doctest.h>

#include <cmath>

#include "feelsim/errors.hpp"
#include "feelsim/linalg.hpp"
#include "feelsim/model.hpp"
#include "test_helpers.hpp"

using namespace feelsim;
using feelsim::test::random_instance;
using feelsim::test::rel_error;

namespace {

// Fixed 3-sample logistic instance; expected mean cross-entropy recomputed
// independently at 50-digit precision before this file was written.
constexpr double kFrozenLoss = 0.6477296305272610871583763;

ModelSpec frozen_spec() {
    ModelSpec s;
    s.arch = Arch::logistic;
    s.feature_dim = 3;
    s.classes = 3;
    return s;
}

Vec frozen_w() {
    return {0.2, -0.1, 0.4, 0.05, -0.3, 0.25, 0.1, -0.2, 0.15, 0.3, -0.35, 0.1};
}

LabeledDataset frozen_data() {
    LabeledDataset ds;
    ds.features = {{1.0, -2.0, 0.5}, {0.3, 0.8, -1.2}, {-0.7, 0.1, 0.9}};
    ds.labels = {0, 2, 1};
    return ds;
}

}  // namespace

TEST_CASE("loss: zero weights give ln C; frozen instance matches high precision") {
    const ModelSpec spec = frozen_spec();
    const LabeledDataset ds = frozen_data();
    const Vec zero(spec.param_dim(), 0.0);
    CHECK(std::abs(loss(spec, zero, Batch::whole(ds)) - std::log(3.0)) < 1e-14);

    const double l = loss(spec, frozen_w(), Batch::whole(ds));
    CHECK(std::abs(l - kFrozenLoss) < 1e-14);
}

TEST_CASE("loss: vanishes in the large-margin limit") {
    ModelSpec spec;
    spec.arch = Arch::logistic;
    spec.feature_dim = 1;
    spec.classes = 2;
    LabeledDataset ds;
    ds.features = {{1.0}};
    ds.labels = {0};
    // Margin 40 on the correct logit.
    const Vec w{40.0, 0.0, -40.0, 0.0};
    CHECK(loss(spec, w, Batch::whole(ds)) < 1e-6);
    CHECK(loss(spec, w, Batch::whole(ds)) >= 0.0);
}

TEST_CASE("loss: dimension mismatch raises") {
    const ModelSpec spec = frozen_spec();
    const LabeledDataset ds = frozen_data();
    CHECK_THROWS_AS(loss(spec, Vec(5, 0.0), Batch::whole(ds)), DimensionError);
    LabeledDataset empty;
    CHECK_THROWS_AS(loss(spec, frozen_w(), Batch::whole(empty)), ParameterError);
}

TEST_CASE("grad: matches central finite differences (logistic, 100 seeds)") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto inst = random_instance(seed, Arch::logistic);
        const Batch b = Batch::whole(inst.data);
        const Vec analytic = grad(inst.spec, inst.w, b);
        const Vec fd = finite_diff_grad(
            [&](const Vec& w) { return loss(inst.spec, w, b); }, inst.w, 1e-5);
        CHECK(rel_error(analytic, fd) < 1e-6);
    }
}

TEST_CASE("grad: matches central finite differences (mlp, 20 seeds)") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto inst = random_instance(seed, Arch::mlp);
        const Batch b = Batch::whole(inst.data);
        const Vec analytic = grad(inst.spec, inst.w, b);
        const Vec fd = finite_diff_grad(
            [&](const Vec& w) { return loss(inst.spec, w, b); }, inst.w, 1e-5);
        CHECK(rel_error(analytic, fd) < 1e-6);
    }
}

TEST_CASE("grad: all-zero features leave only the bias block") {
    ModelSpec spec;
    spec.arch = Arch::logistic;
    spec.feature_dim = 2;
    spec.classes = 3;
    LabeledDataset ds;
    ds.features = {{0.0, 0.0}, {0.0, 0.0}};
    ds.labels = {1, 2};
    RngStream rng(4, 2);
    const Vec w = gauss_vector(rng, spec.param_dim(), 1.0);
    const Vec g = grad(spec, w, Batch::whole(ds));
    // Weight entries stay zero; bias entries equal mean(softmax - onehot).
    for (int c = 0; c < 3; ++c) {
        CHECK(g[c * 3 + 0] == 0.0);
        CHECK(g[c * 3 + 1] == 0.0);
    }
    Vec probs(3);
    for (int c = 0; c < 3; ++c) probs[c] = w[c * 3 + 2];  // logits = biases
    const double m = *std::max_element(probs.begin(), probs.end());
    double sum = 0.0;
    for (double& v : probs) {
        v = std::exp(v - m);
        sum += v;
    }
    for (double& v : probs) v /= sum;
    Vec expect = probs;
    expect[1] -= 0.5;  // (1/2)(onehot_1 + onehot_2)
    expect[2] -= 0.5;
    for (int c = 0; c < 3; ++c) {
        CHECK(g[c * 3 + 2] == doctest::Approx(expect[c]).epsilon(1e-12));
    }
}

TEST_CASE("grad: near-zero at the optimum of a separable toy problem") {
    ModelSpec spec;
    spec.arch = Arch::logistic;
    spec.feature_dim = 2;
    spec.classes = 2;
    LabeledDataset ds;
    ds.features = {{1.0, 0.0}, {-1.0, 0.0}};
    ds.labels = {0, 1};
    // Gradient descent to convergence; separable data drives the gradient
    // norm toward zero even though the optimum is at infinity (the margin
    // grows like log t, so this needs many cheap steps).
    Vec w(spec.param_dim(), 0.0);
    for (int it = 0; it < 400000; ++it) {
        const Vec g = grad(spec, w, Batch::whole(ds));
        axpy(-5.0, g, w);
    }
    CHECK(nrm2(grad(spec, w, Batch::whole(ds))) < 1e-6);
}

TEST_CASE("hvp: zero direction, symmetry, finite-difference match") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const auto inst = random_instance(seed, Arch::logistic);
        const Batch b = Batch::whole(inst.data);
        const std::size_t d = inst.spec.param_dim();

        CHECK(nrm2(hvp(inst.spec, inst.w, b, Vec(d, 0.0))) == 0.0);

        RngStream rng(seed, 0xF00D);
        const Vec u = gauss_vector(rng, d, 1.0);
        const Vec v = gauss_vector(rng, d, 1.0);
        // Symmetric form v^T (H u) = u^T (H v).
        const double left = dot(v, hvp(inst.spec, inst.w, b, u));
        const double right = dot(u, hvp(inst.spec, inst.w, b, v));
        CHECK(std::abs(left - right) < 1e-9);

        // Central difference of the analytic gradient along v.
        const double eps = 1e-5;
        Vec wp = inst.w;
        axpy(eps, v, wp);
        Vec wm = inst.w;
        axpy(-eps, v, wm);
        Vec fd = vsub(grad(inst.spec, wp, b), grad(inst.spec, wm, b));
        scale(1.0 / (2.0 * eps), fd);
        CHECK(rel_error(hvp(inst.spec, inst.w, b, v), fd) < 1e-5);
    }
}

TEST_CASE("hvp: mlp forward-difference matches central differences") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto inst = random_instance(seed, Arch::mlp);
        const Batch b = Batch::whole(inst.data);
        RngStream rng(seed, 0xBEEF);
        const Vec v = gauss_vector(rng, inst.spec.param_dim(), 1.0);
        const double eps = 1e-5;
        Vec wp = inst.w;
        axpy(eps, v, wp);
        Vec wm = inst.w;
        axpy(-eps, v, wm);
        Vec fd = vsub(grad(inst.spec, wp, b), grad(inst.spec, wm, b));
        scale(1.0 / (2.0 * eps), fd);
        CHECK(rel_error(hvp(inst.spec, inst.w, b, v), fd) < 1e-4);
    }
}

TEST_CASE("gmir: regularizer vanishes at the prior and at beta=0") {
    const auto inst = random_instance(3, Arch::logistic);
    const Batch b = Batch::whole(inst.data);
    const double base = loss(inst.spec, inst.w, b);
    CHECK(gmir_value(inst.spec, inst.w, inst.w, b, 2.5) == doctest::Approx(base));
    const Vec g = grad(inst.spec, inst.w, b);
    const Vec gg = gmir_grad(inst.spec, inst.w, inst.w, b, 2.5);
    CHECK(rel_error(gg, g) < 1e-15);

    const Vec w0(inst.w.size(), 0.0);
    CHECK(gmir_value(inst.spec, inst.w, w0, b, 0.0) == doctest::Approx(base));
    CHECK(rel_error(gmir_grad(inst.spec, inst.w, w0, b, 0.0), g) < 1e-15);

    CHECK_THROWS_AS(gmir_value(inst.spec, inst.w, w0, b, -1.0), ParameterError);
}

TEST_CASE("gmir_grad: matches finite differences of gmir_value") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto inst = random_instance(seed, Arch::logistic);
        const Batch b = Batch::whole(inst.data);
        RngStream rng(seed, 0xCAFE);
        const Vec w0 = gauss_vector(rng, inst.spec.param_dim(), 0.5);
        const double beta = 0.7;
        const Vec analytic = gmir_grad(inst.spec, inst.w, w0, b, beta);
        const Vec fd = finite_diff_grad(
            [&](const Vec& w) { return gmir_value(inst.spec, w, w0, b, beta); },
            inst.w, 1e-5);
        CHECK(rel_error(analytic, fd) < 1e-4);
    }
}

TEST_CASE("fedprox_grad: cases and finite-difference match") {
    const auto inst = random_instance(9, Arch::logistic);
    const Batch b = Batch::whole(inst.data);
    const Vec g = grad(inst.spec, inst.w, b);
    RngStream rng(9, 0xDEAD);
    const Vec ref = gauss_vector(rng, inst.spec.param_dim(), 0.5);

    CHECK(rel_error(fedprox_grad(inst.spec, inst.w, ref, b, 0.0), g) < 1e-15);
    CHECK(rel_error(fedprox_grad(inst.spec, inst.w, inst.w, b, 0.8), g) < 1e-15);

    const double mu = 0.35;
    const Vec analytic = fedprox_grad(inst.spec, inst.w, ref, b, mu);
    const Vec fd = finite_diff_grad(
        [&](const Vec& w) {
            const Vec delta = vsub(w, ref);
            return loss(inst.spec, w, b) + 0.5 * mu * dot(delta, delta);
        },
        inst.w, 1e-5);
    CHECK(rel_error(analytic, fd) < 1e-6);
}

TEST_CASE("predict: tie-break and hand-counted accuracy") {
    ModelSpec spec;
    spec.arch = Arch::logistic;
    spec.feature_dim = 2;
    spec.classes = 3;
    const Vec zero(spec.param_dim(), 0.0);
    CHECK(predict(spec, zero, {0.4, -0.2}) == 0);  // all logits tie at zero

    // w puts class 0 on +x, class 1 on +y, class 2 at the bias only.
    const Vec w{2.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 0.5};
    LabeledDataset ds;
    ds.features = {{2.0, 0.0}, {0.0, 2.0}, {-1.0, -1.0}, {2.0, 2.0}, {0.1, 0.0}};
    ds.labels = {0, 1, 2, 0, 2};
    // Hand count: logits per sample ->
    //  (4,0,.5) -> 0 ok; (0,4,.5) -> 1 ok; (-2,-2,.5) -> 2 ok;
    //  (4,4,.5) -> tie 0/1 -> 0 ok; (0.2,0,.5) -> 2 wrong label 2? logit2=.5 -> 2 ok.
    CHECK(accuracy(spec, w, ds) == doctest::Approx(1.0));
    ds.labels = {1, 1, 2, 0, 2};  // first sample now mislabeled
    CHECK(accuracy(spec, w, ds) == doctest::Approx(0.8));
}

TEST_CASE("predict: fitting one separable point reaches accuracy 1") {
    ModelSpec spec;
    spec.arch = Arch::logistic;
    spec.feature_dim = 2;
    spec.classes = 2;
    LabeledDataset ds;
    ds.features = {{1.0, 1.0}};
    ds.labels = {1};
    Vec w(spec.param_dim(), 0.0);
    for (int it = 0; it < 200; ++it) {
        axpy(-1.0, grad(spec, w, Batch::whole(ds)), w);
    }
    CHECK(accuracy(spec, w, ds) == doctest::Approx(1.0));
}

TEST_CASE("predict: scale invariance of the argmax") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto inst = random_instance(seed, Arch::logistic, 4, 4);
        Vec scaled = inst.w;
        scale(3.7, scaled);
        for (const Vec& x : inst.data.features) {
            CHECK(predict(inst.spec, inst.w, x) == predict(inst.spec, scaled, x));
        }
    }
    // MLP: scaling only the final linear layer's rows leaves the argmax alone.
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto inst = random_instance(seed, Arch::mlp, 4, 4, 5);
        const std::size_t layer1 =
            static_cast<std::size_t>(inst.spec.feature_dim + 1) * inst.spec.hidden;
        Vec scaled = inst.w;
        for (std::size_t i = layer1; i < scaled.size(); ++i) {
            scaled[i] *= 2.9;
        }
        for (const Vec& x : inst.data.features) {
            CHECK(predict(inst.spec, inst.w, x) == predict(inst.spec, scaled, x));
        }
    }
}

TEST_CASE("mlp: hidden layer dimensions and loss positivity") {
    ModelSpec spec;
    spec.arch = Arch::mlp;
    spec.feature_dim = 6;
    spec.classes = 3;
    spec.hidden = 5;
    CHECK(spec.param_dim() == (6 + 1) * 5 + (5 + 1) * 3);
    const auto inst = random_instance(1, Arch::mlp, 6, 3, 5);
    CHECK(loss(inst.spec, inst.w, Batch::whole(inst.data)) >= 0.0);
    const Vec zero(inst.spec.param_dim(), 0.0);
    CHECK(std::abs(loss(inst.spec, zero, Batch::whole(inst.data)) - std::log(3.0)) <
          1e-14);
}
