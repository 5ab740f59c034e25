#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "rokdeepc/plant.hpp"
#include "testutil.hpp"

using namespace rokdeepc;

TEST_CASE("siso plant single-step values") {
    PolynomialSisoPlant plant;
    CHECK(plant.step_scalar(1.0) == doctest::Approx(1.0));  // only the u_t term survives

    // y_{t-1} = 0.1, u_{t-1} = 0.2, u_t = 0.3:
    // 4*0.1*0.2 - 0.5*0.1 + 2*0.2*0.3 + 0.3 = 0.45
    PolynomialSisoPlant primed(0.1, 0.2);
    CHECK(primed.step_scalar(0.3) == doctest::Approx(0.45));
}

TEST_CASE("siso plant decays as (-0.5)^t under zero input") {
    PolynomialSisoPlant plant(1.0, 0.0);
    double expected = 1.0;
    for (int t = 1; t <= 10; ++t) {
        expected *= -0.5;
        CHECK(plant.step_scalar(0.0) == doctest::Approx(expected));
    }
}

TEST_CASE("siso plant matches a one-line oracle over random steps") {
    PolynomialSisoPlant plant;
    GaussianStream stream(99, 0.0, 0.01);
    double y_prev = 0.0, u_prev = 0.0;
    for (int t = 0; t < 1000; ++t) {
        const double u = stream.next();
        const double expected = 4.0 * y_prev * u_prev - 0.5 * y_prev + 2.0 * u_prev * u + u;
        CHECK(plant.step_scalar(u) == expected);
        y_prev = expected;
        u_prev = u;
    }
}

TEST_CASE("siso plant rejects non-finite input") {
    PolynomialSisoPlant plant;
    CHECK_THROWS_AS(plant.step_scalar(std::numeric_limits<double>::quiet_NaN()), SolverError);
}

TEST_CASE("lti plant matches the closed-form response") {
    LtiPlant plant = make_random_lti(5, 3, 2, 2);
    const Mat a = plant.a();
    const Mat b = plant.b();
    const Mat c = plant.c();
    GaussianStream stream(6, 0.0, 1.0);

    Vec x = Vec::Zero(3);
    for (int t = 0; t < 50; ++t) {
        const Vec u = stream.next_vec(2);
        const Vec y = plant.step(u);
        const Vec expected = c * x;  // D = 0
        CHECK((y - expected).norm() <= 1e-10 * (1.0 + expected.norm()));
        x = a * x + b * u;
    }
    CHECK(plant.stable());
}

TEST_CASE("gaussian stream determinism and statistics") {
    GaussianStream s1(77, 0.0, 1e-3), s2(77, 0.0, 1e-3);
    for (int i = 0; i < 100; ++i) CHECK(s1.next() == s2.next());

    GaussianStream s3(78, 0.0, 1e-3);
    double sum = 0.0, ss = 0.0;
    const int n = 600;
    for (int i = 0; i < n; ++i) {
        const double v = s3.next();
        sum += v;
        ss += v * v;
    }
    const double mean = sum / n;
    const double var = ss / n - mean * mean;
    CHECK(var >= 0.8e-3);
    CHECK(var <= 1.2e-3);
}

TEST_CASE("collect_data basics") {
    PolynomialSisoPlant plant;
    const ExcitationSignal excitation{0.0, 0.01, 3};

    SUBCASE("zero-variance noise leaves measurements clean") {
        const auto data = collect_data(plant, excitation, 50, NoiseModel{0.0, 4});
        CHECK((data.measured.outputs - data.clean.outputs).cwiseAbs().maxCoeff() == 0.0);
        CHECK((data.measured.inputs - data.clean.inputs).cwiseAbs().maxCoeff() == 0.0);
    }

    SUBCASE("same seeds give identical trajectories") {
        PolynomialSisoPlant p1, p2;
        const auto d1 = collect_data(p1, excitation, 80, NoiseModel{1e-3, 4});
        const auto d2 = collect_data(p2, excitation, 80, NoiseModel{1e-3, 4});
        CHECK((d1.measured.outputs - d2.measured.outputs).cwiseAbs().maxCoeff() == 0.0);
        CHECK((d1.clean.inputs - d2.clean.inputs).cwiseAbs().maxCoeff() == 0.0);
    }

    SUBCASE("noise variance matches its specification") {
        PolynomialSisoPlant p;
        const auto data = collect_data(p, excitation, 600, NoiseModel{1e-3, 5});
        const Mat diff = data.measured.outputs - data.clean.outputs;
        const double var = diff.squaredNorm() / diff.size();
        CHECK(var >= 0.8e-3);
        CHECK(var <= 1.2e-3);
    }
}

TEST_CASE("load_power values") {
    const LoadPower nominal = load_power(0.0);
    CHECK(nominal.active == doctest::Approx(0.5));
    CHECK(nominal.reactive == doctest::Approx(0.04));

    const LoadPower lifted = load_power(0.1);
    CHECK(lifted.active == doctest::Approx(1.1662));
    CHECK(lifted.reactive == doctest::Approx(0.32));

    CHECK_THROWS_AS(load_power(-1.0), DimensionError);
}

TEST_CASE("load_power even/odd split of the deviation terms") {
    // beyond the cubic's own odd part, P(du)+P(-du) keeps only even terms
    for (double du : {0.02, 0.07, 0.2}) {
        const double sum_p = load_power(du).active + load_power(-du).active;
        // 2*(0.3 + 0.2(1+3du^2)) + 20 du^2  from expanding (1+du)^3
        const double expected = 2.0 * (0.3 + 0.2 * (1.0 + 3.0 * du * du)) + 20.0 * du * du;
        CHECK(sum_p == doctest::Approx(expected).epsilon(1e-12));
        const double sum_q = load_power(du).reactive + load_power(-du).reactive;
        CHECK(sum_q == doctest::Approx(2.0 * 0.04 + 16.0 * du * du).epsilon(1e-12));
    }
}

TEST_CASE("make_reference profiles") {
    const Vec r = make_reference({{50, 0.1}, {150, 0.05}}, 200);
    CHECK(r(0) == 0.0);
    CHECK(r(49) == 0.0);
    CHECK(r(50) == 0.1);
    CHECK(r(149) == 0.1);
    CHECK(r(150) == 0.05);
    CHECK(r(199) == 0.05);

    const Vec constant = make_reference({{0, 0.3}}, 10);
    CHECK((constant.array() == 0.3).all());

    const Vec zeros = make_reference({}, 5);
    CHECK(zeros.cwiseAbs().maxCoeff() == 0.0);

    CHECK_THROWS_AS(make_reference({{10, 0.1}, {5, 0.2}}, 20), DimensionError);
}
