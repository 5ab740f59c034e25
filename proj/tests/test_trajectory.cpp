#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "rokdeepc/trajectory.hpp"
#include "testutil.hpp"

using namespace rokdeepc;

TEST_CASE("build_hankel shift structure") {
    Mat series(1, 4);
    series << 1, 2, 3, 4;
    const Mat h = build_hankel(series, 2);
    Mat expected(2, 3);
    expected << 1, 2, 3, 2, 3, 4;
    CHECK((h - expected).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("build_hankel constant series") {
    const Mat series = Mat::Constant(2, 7, 3.25);
    const Mat h = build_hankel(series, 3);
    CHECK(h.rows() == 6);
    CHECK(h.cols() == 5);
    CHECK((h.array() == 3.25).all());
}

TEST_CASE("build_hankel columns are verbatim windows") {
    const Mat series = test::random_mat(42, 2, 20);
    const int depth = 3;
    const Mat h = build_hankel(series, depth);
    for (int j = 0; j < h.cols(); ++j)
        for (int i = 0; i < depth; ++i)
            for (int q = 0; q < 2; ++q)
                CHECK(h(i * 2 + q, j) == series(q, i + j));
}

TEST_CASE("build_hankel anti-diagonal constancy") {
    const int q = 3;
    const Mat series = test::random_mat(7, q, 15);
    const Mat h = build_hankel(series, 4);
    for (int i = 0; i + 1 < 4; ++i)
        for (int j = 0; j + 1 < h.cols(); ++j)
            CHECK((h.block((i + 1) * q, j, q, 1) - h.block(i * q, j + 1, q, 1))
                      .cwiseAbs()
                      .maxCoeff() == 0.0);
}

TEST_CASE("build_hankel depth errors") {
    const Mat series = Mat::Zero(1, 3);
    CHECK_THROWS_AS(build_hankel(series, 4), DimensionError);
    CHECK_THROWS_AS(build_hankel(series, 0), DimensionError);
}

TEST_CASE("partition dimensions for the benchmark layout") {
    const auto data = test::make_siso_dataset(1, 600, 1, 5);
    CHECK(data.part.cols() == 595);
    CHECK(data.part.u_past.rows() == 1);
    CHECK(data.part.u_future.rows() == 5);
    CHECK(data.part.y_future.rows() == 5);
}

TEST_CASE("partition boundary H_c = 1") {
    const Mat io = test::random_mat(3, 1, 6);
    SignalTrajectory traj(io, test::random_mat(4, 1, 6));
    const auto part = partition(traj, 2, 4);
    CHECK(part.cols() == 1);
    CHECK_THROWS_AS(partition(traj, 3, 4), DimensionError);
}

TEST_CASE("partition restack reproduces build_hankel") {
    const Mat inputs = test::random_mat(11, 2, 30);
    const Mat outputs = test::random_mat(12, 1, 30);
    SignalTrajectory traj(inputs, outputs);
    const int t_ini = 3, horizon = 4;
    const auto part = partition(traj, t_ini, horizon);

    Mat hu(part.u_past.rows() + part.u_future.rows(), part.cols());
    hu << part.u_past, part.u_future;
    CHECK((hu - build_hankel(inputs, t_ini + horizon)).cwiseAbs().maxCoeff() == 0.0);

    Mat hy(part.y_past.rows() + part.y_future.rows(), part.cols());
    hy << part.y_past, part.y_future;
    CHECK((hy - build_hankel(outputs, t_ini + horizon)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("excitation_rank equals m(T_ini+N)+n on noiseless LTI data") {
    int checked = 0;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        const int n = 1 + static_cast<int>(seed % 5);
        const int t_ini = n, horizon = 5;
        const auto ds = test::make_lti_dataset(seed, n, 1, 1, t_ini, horizon, 300);
        CHECK(excitation_rank(ds.part) == (t_ini + horizon) + n);
        ++checked;
    }
    CHECK(checked == 50);
}

TEST_CASE("excitation_rank zero trajectory") {
    SignalTrajectory traj(Mat::Zero(1, 20), Mat::Zero(1, 20));
    const auto part = partition(traj, 1, 3);
    CHECK(excitation_rank(part) == 0);
}

TEST_CASE("excitation_rank full row rank for generic data") {
    const Mat inputs = test::random_mat(21, 1, 40);
    const Mat outputs = test::random_mat(22, 1, 40);
    SignalTrajectory traj(inputs, outputs);
    const auto part = partition(traj, 2, 3);  // 10 rows, 36 columns
    CHECK(excitation_rank(part) == 10);
}

TEST_CASE("column_sample returns the stacked window without Y_F") {
    const Mat inputs = test::random_mat(31, 2, 25);
    const Mat outputs = test::random_mat(32, 1, 25);
    SignalTrajectory traj(inputs, outputs);
    const int t_ini = 2, horizon = 3;
    const auto part = partition(traj, t_ini, horizon);

    for (int j : {0, part.cols() - 1}) {
        const Vec x = column_sample(part, j);
        CHECK(x.size() == (2 + 1) * t_ini + 2 * horizon);
        int idx = 0;
        for (int w = 0; w < t_ini; ++w)
            for (int q = 0; q < 2; ++q) CHECK(x(idx++) == inputs(q, j + w));
        for (int w = 0; w < t_ini; ++w) CHECK(x(idx++) == outputs(0, j + w));
        for (int w = 0; w < horizon; ++w)
            for (int q = 0; q < 2; ++q) CHECK(x(idx++) == inputs(q, j + t_ini + w));
    }
    CHECK_THROWS_AS(column_sample(part, part.cols()), DimensionError);
    CHECK_THROWS_AS(column_sample(part, -1), DimensionError);
}

TEST_CASE("csv round trip is bit exact") {
    const auto path = std::filesystem::temp_directory_path() / "rokdeepc_traj_test.csv";
    const Mat inputs = test::random_mat(41, 2, 17);
    const Mat outputs = test::random_mat(42, 3, 17);
    SignalTrajectory traj(inputs, outputs);
    save_csv(traj, path.string());
    const SignalTrajectory loaded = load_csv(path.string());
    CHECK(loaded.m() == 2);
    CHECK(loaded.p() == 3);
    CHECK(loaded.length() == 17);
    CHECK((loaded.inputs - inputs).cwiseAbs().maxCoeff() == 0.0);
    CHECK((loaded.outputs - outputs).cwiseAbs().maxCoeff() == 0.0);
    std::filesystem::remove(path);
}

TEST_CASE("csv header declares dimensions") {
    const auto path = std::filesystem::temp_directory_path() / "rokdeepc_traj_hdr.csv";
    {
        std::ofstream out(path);
        out << "1,1\n";
        for (int t = 0; t < 600; ++t) out << t << "," << 2 * t << "\n";
    }
    const SignalTrajectory loaded = load_csv(path.string());
    CHECK(loaded.length() == 600);
    std::filesystem::remove(path);
}

TEST_CASE("csv malformed rows name the row number") {
    const auto path = std::filesystem::temp_directory_path() / "rokdeepc_traj_bad.csv";
    {
        std::ofstream out(path);
        out << "1,1\n0.5,0.25\n0.5\n";
    }
    try {
        load_csv(path.string());
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("row 3") != std::string::npos);
    }
    std::filesystem::remove(path);
}
