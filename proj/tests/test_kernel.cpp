#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>

#include "rokdeepc/kernel.hpp"
#include "testutil.hpp"

using namespace rokdeepc;

namespace {

std::vector<KernelSpec> all_variants(int u_len) {
    return {KernelSpec::polynomial(1.0, 10), KernelSpec::gaussian(0.4),
            KernelSpec::exponential(0.2), KernelSpec::hybrid(0.4, u_len)};
}

CenterSet random_centers(std::uint64_t seed, const Dims& d, int count, double scale = 0.3) {
    CenterSet c;
    c.dims = d;
    c.centers = test::random_mat(seed, d.regressor_len(), count, scale);
    return c;
}

}  // namespace

TEST_CASE("eval closed-form values") {
    const Vec x = test::random_vec(1, 7, 0.5);
    CHECK(eval(KernelSpec::gaussian(0.4), x, x) == doctest::Approx(1.0));

    const Vec zero = Vec::Zero(7);
    CHECK(eval(KernelSpec::polynomial(1.0, 10), zero, zero) == doctest::Approx(1.0));
    CHECK(eval(KernelSpec::exponential(0.2), zero, x) == doctest::Approx(1.0));
    CHECK(eval(KernelSpec::exponential(0.2), x, zero) == doctest::Approx(1.0));

    // hybrid with identical past blocks: radial part is 1
    const Dims d{1, 1, 1, 5};
    Vec a = Vec::Zero(d.regressor_len()), b = Vec::Zero(d.regressor_len());
    a.tail(5).setConstant(0.5);
    b.tail(5).setConstant(2.0);
    CHECK(eval(KernelSpec::hybrid(0.4, 5), a, b) == doctest::Approx(1.0 + 0.5 * 2.0 * 5));
}

TEST_CASE("eval length mismatch") {
    CHECK_THROWS_AS(eval(KernelSpec::gaussian(0.4), Vec::Zero(3), Vec::Zero(4)), DimensionError);
}

TEST_CASE("eval symmetry over random pairs") {
    const Dims d{1, 1, 1, 5};
    for (const auto& spec : all_variants(d.u_len())) {
        for (int trial = 0; trial < 1000; ++trial) {
            const Vec x = test::random_vec(1000 + trial, d.regressor_len(), 0.4);
            const Vec y = test::random_vec(5000 + trial, d.regressor_len(), 0.4);
            const double kxy = eval(spec, x, y);
            const double kyx = eval(spec, y, x);
            CHECK(std::abs(kxy - kyx) <= 1e-12 * (1.0 + std::abs(kxy)));
        }
    }
}

TEST_CASE("gram single center and duplicates") {
    const Dims d{1, 1, 1, 2};
    CenterSet one = random_centers(3, d, 1);
    const GramMatrix g1 = gram(KernelSpec::gaussian(0.4), one);
    CHECK(g1.k.rows() == 1);
    CHECK(g1.k(0, 0) == doctest::Approx(1.0));

    CenterSet dup = random_centers(4, d, 3);
    dup.centers.col(2) = dup.centers.col(0);
    const GramMatrix g2 = gram(KernelSpec::exponential(0.2), dup);
    CHECK((g2.k.row(0) - g2.k.row(2)).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
    Eigen::JacobiSVD<Mat> svd(g2.k);
    CHECK(svd.singularValues()(2) <= 1e-12 * svd.singularValues()(0));
}

TEST_CASE("gram of random gaussian centers is PSD") {
    const Dims d{1, 1, 1, 5};
    const CenterSet centers = random_centers(5, d, 20);
    const GramMatrix g = gram(KernelSpec::gaussian(0.4), centers);
    CHECK((g.k - g.k.transpose()).cwiseAbs().maxCoeff() == 0.0);
    Eigen::SelfAdjointEigenSolver<Mat> eig(g.k);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-10);
}

TEST_CASE("PSD quadratic form for all variants") {
    const Dims d{1, 1, 1, 5};
    for (const auto& spec : all_variants(d.u_len())) {
        for (int trial = 0; trial < 20; ++trial) {
            const int count = 2 + trial * 2;
            const CenterSet centers = random_centers(100 + trial, d, std::min(count, 50), 0.3);
            const GramMatrix g = gram(spec, centers);
            const Vec alpha = test::random_vec(200 + trial, centers.count());
            const double q = alpha.dot(g.k * alpha);
            CHECK(q >= -1e-8 * alpha.squaredNorm() * g.k.norm());
        }
    }
}

TEST_CASE("kernel_vector matches elementwise eval") {
    const Dims d{1, 1, 1, 5};
    const CenterSet centers = random_centers(6, d, 15);
    const Vec query = test::random_vec(7, d.regressor_len(), 0.4);
    for (const auto& spec : all_variants(d.u_len())) {
        const Vec k = kernel_vector(spec, centers, query);
        for (int j = 0; j < centers.count(); ++j)
            CHECK(k(j) == eval(spec, centers.centers.col(j), query));
    }
}

TEST_CASE("kernel_vector special queries") {
    const Dims d{1, 1, 1, 5};
    CenterSet centers = random_centers(8, d, 10);
    const Vec q = centers.centers.col(4);
    const Vec k = kernel_vector(KernelSpec::gaussian(0.4), centers, q);
    CHECK(k(4) == doctest::Approx(1.0));

    const Vec k_exp = kernel_vector(KernelSpec::exponential(0.2), centers,
                                    Vec::Zero(d.regressor_len()));
    CHECK((k_exp.array() - 1.0).abs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("kernel_jacobian_u hybrid rows are the center u blocks") {
    const Dims d{1, 1, 2, 4};
    const CenterSet centers = random_centers(9, d, 8);
    const KernelSpec spec = KernelSpec::hybrid(0.4, d.u_len());
    const Vec q1 = test::random_vec(10, d.regressor_len(), 0.4);
    const Vec q2 = test::random_vec(11, d.regressor_len(), 0.4);
    const Mat j1 = kernel_jacobian_u(spec, centers, q1, d);
    const Mat j2 = kernel_jacobian_u(spec, centers, q2, d);
    CHECK((j1 - j2).cwiseAbs().maxCoeff() == 0.0);
    for (int j = 0; j < centers.count(); ++j)
        CHECK((j1.row(j).transpose() - centers.centers.col(j).tail(d.u_len()))
                  .cwiseAbs()
                  .maxCoeff() == 0.0);
}

TEST_CASE("kernel_jacobian_u gaussian row vanishes at its center") {
    const Dims d{1, 1, 1, 5};
    const CenterSet centers = random_centers(12, d, 6);
    const Vec q = centers.centers.col(2);
    const Mat jac = kernel_jacobian_u(KernelSpec::gaussian(0.4), centers, q, d);
    CHECK(jac.row(2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("kernel_jacobian_u matches central finite differences") {
    const Dims d{1, 1, 1, 5};
    const double step = 1e-6;
    for (const auto& spec : all_variants(d.u_len())) {
        for (int trial = 0; trial < 100; ++trial) {
            const CenterSet centers = random_centers(300 + trial, d, 5, 0.3);
            Vec query = test::random_vec(400 + trial, d.regressor_len(), 0.3);
            const Mat jac = kernel_jacobian_u(spec, centers, query, d);
            for (int j = 0; j < centers.count(); ++j) {
                for (int c = 0; c < d.u_len(); ++c) {
                    const int idx = d.past_len() + c;
                    Vec qp = query, qm = query;
                    qp(idx) += step;
                    qm(idx) -= step;
                    const double fd = (eval(spec, centers.centers.col(j), qp) -
                                       eval(spec, centers.centers.col(j), qm)) /
                                      (2.0 * step);
                    CHECK(jac(j, c) ==
                          doctest::Approx(fd).epsilon(1e-5).scale(1.0 + std::abs(fd)));
                }
            }
        }
    }
}
