#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "softcca/gradcheck.hpp"
#include "softcca/nn.hpp"
#include "test_util.hpp"

using namespace softcca;
using test_util::random_matrix;

namespace {

MlpModel tiny_affine(Matrix w, Matrix b) {
    Rng rng(0);
    MlpModel m = make_mlp({affine_layer(w.rows(), w.cols())}, rng);
    m.affines[0].weight = std::move(w);
    m.affines[0].bias = std::move(b);
    return m;
}

} // namespace

TEST_CASE("affine forward by hand") {
    MlpModel m = tiny_affine(Matrix::from_rows({{2, 0}, {0, 3}}), Matrix(1, 2));
    Matrix x = Matrix::from_rows({{1, 1}});
    Matrix out = forward(m, x, Mode::eval).output();
    CHECK(out(0, 0) == doctest::Approx(2.0));
    CHECK(out(0, 1) == doctest::Approx(3.0));
}

TEST_CASE("relu clamps negatives") {
    Rng rng(1);
    MlpModel m = make_mlp({relu_layer(2)}, rng);
    Matrix out = forward(m, Matrix::from_rows({{-1, 2}}), Mode::eval).output();
    CHECK(out(0, 0) == 0.0);
    CHECK(out(0, 1) == 2.0);
}

TEST_CASE("relu output is nonnegative on random input") {
    Rng rng(2);
    MlpModel m = make_mlp({relu_layer(8)}, rng);
    Matrix out = forward(m, random_matrix(rng, 16, 8), Mode::eval).output();
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(out.data()[i] >= 0.0);
}

TEST_CASE("train-mode batchnorm standardizes columns") {
    Rng rng(3);
    MlpModel m = make_mlp({batchnorm_layer(4)}, rng);
    Matrix x = random_matrix(rng, 32, 4, 2.5);
    Matrix out = forward(m, x, Mode::train).output();
    for (std::size_t j = 0; j < 4; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < 32; ++i) mean += out(i, j);
        mean /= 32.0;
        double var = 0.0;
        for (std::size_t i = 0; i < 32; ++i) var += (out(i, j) - mean) * (out(i, j) - mean);
        var /= 32.0;
        CHECK(std::fabs(mean) < 1e-6);
        CHECK(var == doctest::Approx(1.0).epsilon(1e-4));
    }
}

TEST_CASE("batchnorm train mode needs at least two rows") {
    Rng rng(4);
    MlpModel m = make_mlp({batchnorm_layer(3)}, rng);
    CHECK_THROWS_AS(forward(m, Matrix(1, 3), Mode::train), DegenerateError);
    CHECK_NOTHROW(forward(m, Matrix(1, 3), Mode::eval));
}

TEST_CASE("eval-mode forward is independent of batch composition") {
    Rng rng(5);
    MlpModel m = make_mlp({affine_layer(4, 3), relu_layer(3), batchnorm_layer(3)}, rng);
    // drift the running stats away from the init values first
    (void)forward(m, random_matrix(rng, 16, 4), Mode::train);

    Matrix a = random_matrix(rng, 6, 4);
    Matrix full = forward_eval(m, a);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        Matrix one(1, 4);
        for (std::size_t j = 0; j < 4; ++j) one(0, j) = a(i, j);
        Matrix single = forward_eval(m, one);
        for (std::size_t j = 0; j < 3; ++j) CHECK(single(0, j) == doctest::Approx(full(i, j)));
    }
}

TEST_CASE("backward rejects eval traces and bad shapes") {
    Rng rng(6);
    MlpModel m = make_mlp({affine_layer(3, 2)}, rng);
    Matrix x = random_matrix(rng, 4, 3);
    ForwardTrace ev = forward(m, x, Mode::eval);
    CHECK_THROWS_AS(backward(m, ev, Matrix(4, 2)), StateError);
    ForwardTrace tr = forward(m, x, Mode::train);
    CHECK_THROWS_AS(backward(m, tr, Matrix(4, 3)), ShapeError);
}

TEST_CASE("zero grad_out gives zero gradients") {
    Rng rng(7);
    MlpModel m = make_mlp({affine_layer(3, 4), relu_layer(4), batchnorm_layer(4)}, rng);
    Matrix x = random_matrix(rng, 5, 3);
    ForwardTrace tr = forward(m, x, Mode::train);
    MlpGradients g = backward(m, tr, Matrix(5, 4));
    for (const Matrix* gm : gradient_list(m, g)) CHECK(max_abs(*gm) == 0.0);
    CHECK(max_abs(g.input) == 0.0);
}

TEST_CASE("single affine layer closed-form weight gradient") {
    Rng rng(8);
    MlpModel m = make_mlp({affine_layer(3, 2)}, rng);
    Matrix x = random_matrix(rng, 4, 3);
    Matrix gout = random_matrix(rng, 4, 2);
    ForwardTrace tr = forward(m, x, Mode::train);
    MlpGradients g = backward(m, tr, gout);
    CHECK(max_abs_diff(g.affines[0].weight, test_util::naive_matmul(x.transposed(), gout)) < 1e-12);
}

TEST_CASE("finite differences validate every layer and the composed net") {
    // dedicated seeds known to sit away from relu/abs kinks
    for (const auto& r : run_gradcheck_suite(2024)) {
        INFO(r.name);
        CHECK(r.max_rel_err < 1e-4);
    }
}

TEST_CASE("sgd_step one-step rule and no-op") {
    Rng rng(9);
    MlpModel m = make_mlp({affine_layer(1, 1)}, rng);
    m.affines[0].weight(0, 0) = 1.0;
    MlpGradients g;
    g.affines.resize(1);
    g.affines[0].weight = Matrix(1, 1, 0.5);
    g.affines[0].bias = Matrix(1, 1, 0.0);

    SgdMomentum opt{1.0, 0.0, {}};
    sgd_step(opt, m, g);
    CHECK(m.affines[0].weight(0, 0) == doctest::Approx(0.5));

    MlpModel frozen = make_mlp({affine_layer(1, 1)}, rng);
    const double before = frozen.affines[0].weight(0, 0);
    SgdMomentum zero_lr{0.0, 0.9, {}};
    sgd_step(zero_lr, frozen, g);
    CHECK(frozen.affines[0].weight(0, 0) == before);
}

TEST_CASE("momentum matches the hand-unrolled velocity recursion") {
    Rng rng(10);
    MlpModel m = make_mlp({affine_layer(1, 1)}, rng);
    const double p0 = 2.0, g1 = 0.3, g2 = -0.1, lr = 0.05, mu = 0.9;
    m.affines[0].weight(0, 0) = p0;
    m.affines[0].bias(0, 0) = 0.0;

    SgdMomentum opt{lr, mu, {}};
    MlpGradients g;
    g.affines.resize(1);
    g.affines[0].weight = Matrix(1, 1, g1);
    g.affines[0].bias = Matrix(1, 1, 0.0);
    sgd_step(opt, m, g);
    g.affines[0].weight(0, 0) = g2;
    sgd_step(opt, m, g);

    const double v1 = -lr * g1;
    const double p1 = p0 + v1;
    const double v2 = mu * v1 - lr * g2;
    const double p2 = p1 + v2;
    CHECK(m.affines[0].weight(0, 0) == doctest::Approx(p2).epsilon(1e-15));
}

TEST_CASE("sgd_step rejects mismatched shapes") {
    Rng rng(11);
    MlpModel m = make_mlp({affine_layer(2, 2)}, rng);
    MlpGradients g;
    g.affines.resize(1);
    g.affines[0].weight = Matrix(3, 2);
    g.affines[0].bias = Matrix(1, 2);
    SgdMomentum opt{0.1, 0.9, {}};
    CHECK_THROWS_AS(sgd_step(opt, m, g), ShapeError);
}

TEST_CASE("init is deterministic, biases zero, weights statistically centered") {
    Rng a(77), b(77);
    MlpModel m1 = make_mlp({affine_layer(100, 100)}, a);
    MlpModel m2 = make_mlp({affine_layer(100, 100)}, b);
    CHECK(max_abs_diff(m1.affines[0].weight, m2.affines[0].weight) == 0.0);
    CHECK(max_abs(m1.affines[0].bias) == 0.0);

    // 10^4 draws; mean within 3 standard errors of 0
    const Matrix& w = m1.affines[0].weight;
    double mean = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) mean += w.data()[i];
    mean /= static_cast<double>(w.size());
    const double bound = std::sqrt(6.0 / 200.0); // uniform(-a, a)
    const double se = bound / std::sqrt(3.0) / std::sqrt(static_cast<double>(w.size()));
    CHECK(std::fabs(mean) < 3.0 * se);
}

TEST_CASE("batchnorm running variance stays positive during training") {
    Rng rng(12);
    MlpModel m = make_mlp({batchnorm_layer(3)}, rng);
    for (int t = 0; t < 50; ++t) {
        (void)forward(m, random_matrix(rng, 8, 3, 0.01), Mode::train);
        for (std::size_t j = 0; j < 3; ++j) CHECK(m.norms[0].running_var(0, j) > 0.0);
    }
}
