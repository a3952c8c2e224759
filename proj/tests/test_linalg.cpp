#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "softcca/matrix.hpp"
#include "test_util.hpp"

using namespace softcca;
using test_util::naive_matmul;
using test_util::naive_pearson;
using test_util::naive_reconstruct;
using test_util::random_matrix;
using test_util::random_spd;
using test_util::random_symmetric;

TEST_CASE("matmul identity cases") {
    Rng rng(1);
    Matrix a = random_matrix(rng, 3, 3);
    Matrix c = matmul(Matrix::identity(3), a);
    CHECK(max_abs_diff(c, a) == 0.0);

    Matrix b = Matrix::from_rows({{1, 2}, {3, 4}});
    Matrix r = matmul(b, Matrix::identity(2));
    CHECK(r(0, 0) == 1.0);
    CHECK(r(0, 1) == 2.0);
    CHECK(r(1, 0) == 3.0);
    CHECK(r(1, 1) == 4.0);
}

TEST_CASE("matmul matches the naive triple loop") {
    Rng rng(2);
    Matrix a = random_matrix(rng, 5, 4);
    Matrix b = random_matrix(rng, 4, 3);
    CHECK(max_abs_diff(matmul(a, b), naive_matmul(a, b)) < 1e-12);

    // Large enough to go through the BLAS path.
    Matrix big_a = random_matrix(rng, 40, 50);
    Matrix big_b = random_matrix(rng, 50, 30);
    CHECK(max_abs_diff(matmul(big_a, big_b), naive_matmul(big_a, big_b)) < 1e-11);
}

TEST_CASE("matmul_tn and matmul_nt agree with explicit transposes") {
    Rng rng(3);
    Matrix a = random_matrix(rng, 6, 4);
    Matrix b = random_matrix(rng, 6, 5);
    CHECK(max_abs_diff(matmul_tn(a, b), naive_matmul(a.transposed(), b)) < 1e-12);
    Matrix c = random_matrix(rng, 4, 6);
    Matrix d = random_matrix(rng, 5, 6);
    CHECK(max_abs_diff(matmul_nt(c, d), naive_matmul(c, d.transposed())) < 1e-12);
}

TEST_CASE("matmul rejects mismatched shapes") {
    Matrix a(2, 3), b(4, 2);
    CHECK_THROWS_AS(matmul(a, b), ShapeError);
}

TEST_CASE("matmul associativity on random triples") {
    Rng rng(4);
    for (int t = 0; t < 10; ++t) {
        Matrix a = random_matrix(rng, 7, 5);
        Matrix b = random_matrix(rng, 5, 6);
        Matrix c = random_matrix(rng, 6, 4);
        Matrix left = matmul(matmul(a, b), c);
        Matrix right = matmul(a, matmul(b, c));
        CHECK(frobenius_norm(left - right) < 1e-9 * std::max(1.0, frobenius_norm(left)));
    }
}

TEST_CASE("sym_eig identity and diagonal cases") {
    SymEig e = sym_eig(Matrix::identity(4));
    for (double v : e.values) CHECK(v == doctest::Approx(1.0));

    Matrix d = Matrix::from_rows({{3, 0}, {0, 1}});
    SymEig ed = sym_eig(d);
    CHECK(ed.values[0] == doctest::Approx(3.0));
    CHECK(ed.values[1] == doctest::Approx(1.0));
    CHECK(std::fabs(ed.vectors(0, 0)) == doctest::Approx(1.0));
    CHECK(std::fabs(ed.vectors(1, 1)) == doctest::Approx(1.0));
}

TEST_CASE("sym_eig reconstruction and orthonormality on random matrices") {
    Rng rng(5);
    for (int t = 0; t < 100; ++t) {
        const std::size_t n = 2 + rng.below(31); // k <= 32
        Matrix a = random_symmetric(rng, n);
        SymEig e = sym_eig(a);
        CHECK(frobenius_norm(naive_reconstruct(e.values, e.vectors) - a) <
              1e-8 * std::max(1.0, frobenius_norm(a)));
        Matrix vtv = matmul_tn(e.vectors, e.vectors);
        CHECK(max_abs_diff(vtv, Matrix::identity(n)) < 1e-9);
        for (std::size_t i = 1; i < e.values.size(); ++i) CHECK(e.values[i - 1] >= e.values[i]);
    }
}

TEST_CASE("sym_eig random 6x6 reconstruction") {
    Rng rng(6);
    Matrix a = random_symmetric(rng, 6);
    SymEig e = sym_eig(a);
    CHECK(frobenius_norm(naive_reconstruct(e.values, e.vectors) - a) < 1e-8 * frobenius_norm(a));
}

TEST_CASE("jacobi and lapack backends agree") {
    Rng rng(7);
    Matrix a = random_symmetric(rng, 48);
    SymEig jac = jacobi_sym_eig(a);
    SymEig lap = sym_eig([&] { // force the LAPACK path with padding
        Matrix big(80, 80);
        for (std::size_t i = 0; i < 48; ++i)
            for (std::size_t j = 0; j < 48; ++j) big(i, j) = a(i, j);
        for (std::size_t i = 48; i < 80; ++i) big(i, i) = -1e6; // well-separated tail
        return big;
    }());
    for (std::size_t i = 0; i < 48; ++i)
        CHECK(std::fabs(jac.values[i] - lap.values[i]) < 1e-8);
}

TEST_CASE("sym_eig rejects non-square input") {
    CHECK_THROWS_AS(sym_eig(Matrix(3, 4)), ShapeError);
}

TEST_CASE("inv_sqrt_sym identity and diagonal") {
    Matrix i3 = inv_sqrt_sym(Matrix::identity(3), 0.0);
    CHECK(max_abs_diff(i3, Matrix::identity(3)) < 1e-12);

    Matrix d = Matrix::from_rows({{4, 0}, {0, 9}});
    Matrix b = inv_sqrt_sym(d, 0.0);
    CHECK(b(0, 0) == doctest::Approx(0.5));
    CHECK(b(1, 1) == doctest::Approx(1.0 / 3.0));
    CHECK(std::fabs(b(0, 1)) < 1e-12);
}

TEST_CASE("inv_sqrt_sym satisfies B*A*B = I on random SPD") {
    Rng rng(8);
    for (int t = 0; t < 5; ++t) {
        Matrix a = random_spd(rng, 5);
        Matrix b = inv_sqrt_sym(a, 0.0);
        Matrix bab = matmul(matmul(b, a), b);
        CHECK(max_abs_diff(bab, Matrix::identity(5)) < 1e-7);
        // output symmetric
        CHECK(max_abs_diff(b, b.transposed()) < 1e-9);
    }
}

TEST_CASE("inv_sqrt_sym reports the offending eigenvalue") {
    Matrix neg = Matrix::from_rows({{-1, 0}, {0, 2}});
    CHECK_THROWS_AS(inv_sqrt_sym(neg, 0.0), NumericError);
    CHECK_NOTHROW(inv_sqrt_sym(neg, 1.5));
}

TEST_CASE("pearson basics") {
    std::vector<double> u{1, 2, 3, 4};
    CHECK(pearson(u, u) == doctest::Approx(1.0));
    std::vector<double> nu{-1, -2, -3, -4};
    CHECK(pearson(u, nu) == doctest::Approx(-1.0));

    std::vector<double> a{1, 2, 3}, b{1, 2, 4};
    CHECK(pearson(a, b) == doctest::Approx(naive_pearson(a, b)).epsilon(1e-12));
}

TEST_CASE("pearson degenerate inputs") {
    std::vector<double> flat{2, 2, 2}, v{1, 2, 3}, single{1};
    CHECK_THROWS_AS(pearson(flat, v), DegenerateError);
    CHECK_THROWS_AS(pearson(single, single), DegenerateError);
}
