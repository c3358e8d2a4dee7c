#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "emreduce/quality.hpp"
#include "test_helpers.hpp"

using namespace emreduce;
using test_helpers::image_from_matrix;
using test_helpers::random_matrix;
using test_helpers::set_from_matrix;

TEST_SUITE("quality") {

TEST_CASE("condition number of an orthonormal matrix is 1") {
    const auto set = set_from_matrix(Eigen::MatrixXd::Identity(3, 3));
    CHECK(condition_number(set) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("duplicate columns report KAPPA_CAP") {
    Eigen::MatrixXd e(2, 2);
    e << 1, 1, 0, 0;
    const double kappa = condition_number(set_from_matrix(e));
    CHECK(kappa == KAPPA_CAP);
    CHECK(rank_deficient(kappa));
}

TEST_CASE("kappa matches the Gram characteristic-polynomial oracle") {
    // E = [[1,1],[0,1],[0,0]]: G = E'E = [[1,1],[1,2]], eigenvalues of the
    // 2x2 Gram are (3 +- sqrt(5))/2, so kappa = sqrt(lmax/lmin)
    Eigen::MatrixXd e(3, 2);
    e << 1, 1, 0, 1, 0, 0;
    const double lmax = (3.0 + std::sqrt(5.0)) / 2.0;
    const double lmin = (3.0 - std::sqrt(5.0)) / 2.0;
    const double expected = std::sqrt(lmax / lmin);
    CHECK(expected == doctest::Approx(2.618033988749895).epsilon(1e-12));
    CHECK(condition_number(set_from_matrix(e)) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("wide matrices are rejected") {
    CHECK_THROWS_AS(condition_number(set_from_matrix(Eigen::MatrixXd::Ones(2, 3))),
                    DimensionError);
}

TEST_CASE("column removal never increases kappa") {
    // singular-value interlacing
    for (unsigned seed = 0; seed < 100; ++seed) {
        const int m = 3 + static_cast<int>(seed % 6);
        const Eigen::MatrixXd e = random_matrix(m + 4, m, 1000 + seed);
        const auto set = set_from_matrix(e);
        const double kappa = condition_number(set);
        if (rank_deficient(kappa)) continue;
        for (int j = 0; j < m; ++j) {
            CAPTURE(seed);
            CAPTURE(j);
            CHECK(condition_number(set.without(j)) <= kappa * (1.0 + 1e-12));
        }
    }
}

TEST_CASE("kappa is invariant under positive scaling") {
    for (unsigned seed = 0; seed < 20; ++seed) {
        const Eigen::MatrixXd e = random_matrix(8, 4, 2000 + seed);
        const double base = condition_number(set_from_matrix(e));
        const double scaled = condition_number(set_from_matrix(3.7 * e));
        CHECK(scaled == doctest::Approx(base).epsilon(1e-12));
    }
}

TEST_CASE("rmse: perfect reconstruction is zero") {
    const Eigen::MatrixXd e = random_matrix(4, 3, 1);
    const Eigen::MatrixXd a = random_matrix(3, 5, 2);
    AbundanceMap abund;
    abund.values = a;
    abund.mode = UnmixMode::unconstrained;
    const auto img = image_from_matrix(e * a);
    CHECK(rmse(set_from_matrix(e), abund, img) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("rmse: scalar case") {
    AbundanceMap abund;
    abund.values = Eigen::MatrixXd::Ones(1, 1);
    abund.mode = UnmixMode::unconstrained;
    const auto set = set_from_matrix(2.0 * Eigen::MatrixXd::Ones(1, 1));
    const auto img = image_from_matrix(3.0 * Eigen::MatrixXd::Ones(1, 1));
    CHECK(rmse(set, abund, img) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("rmse of a known perturbation matches the direct Frobenius sum") {
    const Eigen::MatrixXd e = random_matrix(4, 3, 10);
    const Eigen::MatrixXd a = random_matrix(3, 5, 11);
    Eigen::MatrixXd noise = random_matrix(4, 5, 12).array() - 0.5;

    // oracle: elementwise Frobenius-norm summation
    double sum = 0.0;
    for (int i = 0; i < noise.rows(); ++i)
        for (int j = 0; j < noise.cols(); ++j) sum += noise(i, j) * noise(i, j);
    const double expected = std::sqrt(sum) / std::sqrt(20.0);

    AbundanceMap abund;
    abund.values = a;
    abund.mode = UnmixMode::unconstrained;
    const auto img = image_from_matrix(e * a + noise);
    CHECK(rmse(set_from_matrix(e), abund, img) == doctest::Approx(expected).epsilon(1e-13));
}

TEST_CASE("rmse is invariant under matched column/row permutation") {
    const Eigen::MatrixXd e = random_matrix(5, 4, 20);
    const Eigen::MatrixXd a = random_matrix(4, 7, 21);
    const auto img = image_from_matrix(random_matrix(5, 7, 22));

    AbundanceMap abund;
    abund.values = a;
    abund.mode = UnmixMode::unconstrained;
    const double base = rmse(set_from_matrix(e), abund, img);

    const std::vector<int> perm = {2, 0, 3, 1};
    Eigen::MatrixXd ep(5, 4);
    Eigen::MatrixXd ap(4, 7);
    for (int j = 0; j < 4; ++j) {
        ep.col(j) = e.col(perm[j]);
        ap.row(j) = a.row(perm[j]);
    }
    AbundanceMap abundp;
    abundp.values = ap;
    abundp.mode = UnmixMode::unconstrained;
    CHECK(rmse(set_from_matrix(ep), abundp, img) == doctest::Approx(base).epsilon(1e-14));
}

TEST_CASE("rmse rejects mismatched dimensions") {
    AbundanceMap abund;
    abund.values = Eigen::MatrixXd::Ones(2, 5);
    abund.mode = UnmixMode::unconstrained;
    const auto img = image_from_matrix(Eigen::MatrixXd::Ones(4, 5));
    CHECK_THROWS_AS(rmse(set_from_matrix(Eigen::MatrixXd::Ones(4, 3)), abund, img),
                    DimensionError);
}

TEST_CASE("spectral angle basics") {
    Eigen::VectorXd a(2), b(2), c(2);
    a << 1, 0;
    b << 1, 1;
    c << 0, 1;
    CHECK(spectral_angle(a, a) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(spectral_angle(a, c) == doctest::Approx(M_PI / 2).epsilon(1e-14));
    CHECK(spectral_angle(a, b) == doctest::Approx(M_PI / 4).epsilon(1e-14));
    CHECK(spectral_angle(b, a) == doctest::Approx(M_PI / 4).epsilon(1e-14));
    CHECK_THROWS_AS(spectral_angle(a, Eigen::VectorXd::Zero(2)), Error);
}

}  // TEST_SUITE
