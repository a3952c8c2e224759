#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "softcca/decorr.hpp"
#include "softcca/gradcheck.hpp"
#include "test_util.hpp"

using namespace softcca;
using test_util::naive_cov;
using test_util::random_matrix;

TEST_CASE("minibatch covariance definition cases") {
    CHECK(max_abs(minibatch_cov(Matrix(4, 3))) == 0.0);

    Matrix z = Matrix::from_rows({{1}, {-1}});
    CHECK(minibatch_cov(z)(0, 0) == doctest::Approx(2.0));

    CHECK_THROWS_AS(minibatch_cov(Matrix(1, 3)), DegenerateError);
}

TEST_CASE("minibatch covariance matches the naive per-pair loop") {
    Rng rng(1);
    Matrix z = center_columns(random_matrix(rng, 8, 3));
    CHECK(max_abs_diff(minibatch_cov(z), naive_cov(z)) < 1e-12);
}

TEST_CASE("sdl_update recursion") {
    SUBCASE("identity covariance gives zero loss on the first step") {
        SdlState s(2, 0.9);
        // rows of an orthogonal design: Z^T Z / (m-1) = I
        Matrix z = Matrix::from_rows({{1, 1}, {1, -1}});
        SdlUpdate u = sdl_update(s, z);
        CHECK(u.loss == doctest::Approx(0.0));
        CHECK(s.step == 1);
        CHECK(s.norm_factor == doctest::Approx(1.0));
    }

    SUBCASE("alpha = 0 collapses to the pure mini-batch penalty") {
        Rng rng(2);
        Matrix z = random_matrix(rng, 6, 4);
        SdlState s(4, 0.0);
        SdlUpdate u = sdl_update(s, z);
        CHECK(u.loss == doctest::Approx(off_diagonal_abs_sum(minibatch_cov(z))));
        // and equals decov_l1's loss exactly
        CHECK(u.loss == doctest::Approx(decov_loss_grad(z, DecovVariant::decov_l1).loss));
    }

    SUBCASE("two steps at alpha = 0.5 follow the direct recursion") {
        Rng rng(3);
        Matrix z1 = random_matrix(rng, 5, 3);
        Matrix z2 = random_matrix(rng, 5, 3);
        Matrix m1 = minibatch_cov(z1);
        Matrix m2 = minibatch_cov(z2);

        SdlState s(3, 0.5);
        (void)sdl_update(s, z1);
        SdlUpdate u2 = sdl_update(s, z2);

        Matrix expected = m1 * 0.5 + m2;
        expected *= 1.0 / 1.5;
        CHECK(max_abs_diff(u2.approx_cov, expected) < 1e-12);
        CHECK(s.norm_factor == doctest::Approx(1.5));
    }
}

TEST_CASE("norm_factor follows the geometric recursion exactly") {
    SdlState s(2, 0.9);
    CHECK(s.norm_factor == 0.0);
    Rng rng(4);
    double expect = 0.0;
    for (int t = 0; t < 20; ++t) {
        expect = 0.9 * expect + 1.0;
        (void)sdl_update(s, random_matrix(rng, 4, 2));
        CHECK(s.norm_factor == doctest::Approx(expect).epsilon(1e-15));
    }
}

TEST_CASE("accumulator stays symmetric") {
    Rng rng(5);
    SdlState s(6, 0.8);
    for (int t = 0; t < 10; ++t) (void)sdl_update(s, random_matrix(rng, 8, 6));
    CHECK(max_abs_diff(s.accum, s.accum.transposed()) < 1e-9);
}

TEST_CASE("sign matrix has zero diagonal and signs elsewhere") {
    Matrix c = Matrix::from_rows({{2.0, -0.5, 0.0}, {-0.5, 1.0, 0.25}, {0.0, 0.25, 3.0}});
    Matrix s = sign_matrix(c);
    for (int i = 0; i < 3; ++i) CHECK(s(i, i) == 0.0);
    CHECK(s(0, 1) == -1.0);
    CHECK(s(1, 2) == 1.0);
    CHECK(s(0, 2) == 0.0); // exact zero keeps subgradient zero
}

TEST_CASE("sdl_gradient trivial cases") {
    SUBCASE("diagonal approx covariance means zero gradient") {
        Rng rng(6);
        Matrix z = random_matrix(rng, 4, 3);
        SdlState s(3, 0.9);
        (void)sdl_update(s, z);
        Matrix diag = Matrix::identity(3);
        CHECK(max_abs(sdl_gradient(s, diag, z)) == 0.0);
    }

    SUBCASE("k = 1 has no off-diagonals") {
        Rng rng(7);
        Matrix z = random_matrix(rng, 5, 1);
        SdlState s(1, 0.9);
        SdlUpdate u = sdl_update(s, z);
        CHECK(u.loss == 0.0);
        CHECK(max_abs(sdl_gradient(s, u.approx_cov, z)) == 0.0);
    }

    SUBCASE("unused state is rejected") {
        SdlState s(3, 0.9);
        CHECK_THROWS_AS(sdl_gradient(s, Matrix(3, 3), Matrix(4, 3)), StateError);
    }
}

TEST_CASE("finite differences under the frozen-history convention") {
    // The dedicated checks in the gradcheck suite cover sdl, the decov
    // variants and xcov at m in {2, 8}.
    for (const auto& r : run_gradcheck_suite(9090)) {
        INFO(r.name);
        CHECK(r.max_rel_err < 1e-4);
    }
}

TEST_CASE("decov loss values on a crafted covariance") {
    // rows chosen so Z^T Z/(m-1) has 0.5 off-diagonals
    Matrix z = Matrix::from_rows({{1.0, 0.5}, {0.0, std::sqrt(3.0) / 2.0}});
    Matrix c = minibatch_cov(z);
    CHECK(c(0, 1) == doctest::Approx(0.5));
    CHECK(decov_loss_grad(z, DecovVariant::decov).loss == doctest::Approx(0.25));
    CHECK(decov_loss_grad(z, DecovVariant::decov_l1).loss == doctest::Approx(1.0));
}

TEST_CASE("decov variants: diagonal covariance gives zero loss and gradient") {
    Matrix z = Matrix::from_rows({{1, 1}, {1, -1}}); // orthogonal columns
    for (DecovVariant v : {DecovVariant::decov, DecovVariant::decov_l1}) {
        LossGrad lg = decov_loss_grad(z, v);
        CHECK(lg.loss == doctest::Approx(0.0));
        CHECK(max_abs(lg.grad) == 0.0);
    }
    SdlState s(2, 0.9);
    LossGrad gc = decov_loss_grad(z, DecovVariant::decov_gc, &s);
    CHECK(gc.loss == doctest::Approx(0.0));
}

TEST_CASE("decov_gc requires a state") {
    Matrix z(4, 2);
    CHECK_THROWS_AS(decov_loss_grad(z, DecovVariant::decov_gc), ConfigError);
}

TEST_CASE("xcov trivial zeros") {
    Rng rng(8);
    Matrix y = random_matrix(rng, 6, 2);
    CHECK(xcov_loss_grad(y, Matrix(6, 3)).loss == doctest::Approx(0.0));

    // batch-orthogonal blocks: zero cross covariance
    Matrix a = Matrix::from_rows({{1}, {-1}, {1}, {-1}});
    Matrix b = Matrix::from_rows({{1}, {1}, {-1}, {-1}});
    CHECK(xcov_loss_grad(a, b).loss == doctest::Approx(0.0));

    CHECK_THROWS_AS(xcov_loss_grad(Matrix(4, 2), Matrix(5, 2)), ShapeError);
}

TEST_CASE("sdl loss is nonnegative and zero iff the approximation is diagonal") {
    Rng rng(9);
    SdlState s(4, 0.7);
    for (int t = 0; t < 5; ++t) {
        SdlUpdate u = sdl_update(s, random_matrix(rng, 6, 4));
        CHECK(u.loss >= 0.0);
        const double off = off_diagonal_abs_sum(u.approx_cov);
        CHECK(u.loss == doctest::Approx(off));
        if (off > 0) CHECK(u.loss > 0.0);
    }
}

TEST_CASE("permuting batch rows leaves the loss unchanged") {
    Rng rng(10);
    Matrix z = random_matrix(rng, 8, 4);
    SdlState a(4, 0.9), b(4, 0.9);
    const double l1 = sdl_update(a, z).loss;

    std::vector<std::uint32_t> perm{5, 2, 7, 0, 3, 6, 1, 4};
    Matrix zp(8, 4);
    for (std::size_t i = 0; i < 8; ++i)
        for (std::size_t j = 0; j < 4; ++j) zp(i, j) = z(perm[i], j);
    const double l2 = sdl_update(b, zp).loss;
    CHECK(l1 == doctest::Approx(l2).epsilon(1e-12));
}

TEST_CASE("permuting feature columns permutes gradient columns identically") {
    Rng rng(11);
    Matrix z = random_matrix(rng, 6, 4);
    std::vector<std::size_t> perm{2, 0, 3, 1};
    Matrix zp(6, 4);
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 4; ++j) zp(i, j) = z(i, perm[j]);

    SdlState sa(4, 0.8), sb(4, 0.8);
    SdlUpdate ua = sdl_update(sa, z);
    Matrix ga = sdl_gradient(sa, ua.approx_cov, z);
    SdlUpdate ub = sdl_update(sb, zp);
    Matrix gb = sdl_gradient(sb, ub.approx_cov, zp);

    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 4; ++j)
            CHECK(gb(i, j) == doctest::Approx(ga(i, perm[j])).epsilon(1e-12));
}

TEST_CASE("accumulated estimate beats the single-batch estimate on stationary data") {
    // Gaussian batches with identity population covariance; after 500 steps
    // the Frobenius error of the running approximation must fall below 25%
    // of the mean single-batch estimator error, averaged over 10 seeds.
    const std::size_t m = 32, k = 16, steps = 500;
    double ratio_sum = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(1000 + seed);
        SdlState s(k, 0.9);
        double single_err_sum = 0.0;
        Matrix approx;
        for (std::size_t t = 0; t < steps; ++t) {
            Matrix z = center_columns(random_matrix(rng, m, k));
            SdlUpdate u = sdl_update(s, z);
            Matrix diff = minibatch_cov(z) - Matrix::identity(k);
            single_err_sum += frobenius_norm(diff);
            approx = std::move(u.approx_cov);
        }
        const double final_err = frobenius_norm(approx - Matrix::identity(k));
        ratio_sum += final_err / (single_err_sum / static_cast<double>(steps));
    }
    CHECK(ratio_sum / 10.0 < 0.25);
}
