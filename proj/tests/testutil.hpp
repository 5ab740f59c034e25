#pragma once

#include <cstdint>
#include <memory>

#include "rokdeepc/plant.hpp"
#include "rokdeepc/predict.hpp"
#include "rokdeepc/solver.hpp"
#include "rokdeepc/trajectory.hpp"

namespace rokdeepc::test {

inline Vec random_vec(std::uint64_t seed, int n, double scale = 1.0) {
    GaussianStream stream(seed, 0.0, scale * scale);
    return stream.next_vec(n);
}

inline Mat random_mat(std::uint64_t seed, int rows, int cols, double scale = 1.0) {
    GaussianStream stream(seed, 0.0, scale * scale);
    Mat m(rows, cols);
    for (int j = 0; j < cols; ++j) m.col(j) = stream.next_vec(rows);
    return m;
}

/// Noiseless persistently excited data from a random stable LTI system.
struct LtiDataset {
    LtiPlant plant;
    SignalTrajectory traj;
    HankelPartition part;
};

inline LtiDataset make_lti_dataset(std::uint64_t seed, int n, int m, int p, int t_ini,
                                   int horizon, int t_len, double excitation_variance = 1.0) {
    LtiPlant plant = make_random_lti(seed, n, m, p);
    ExcitationSignal excitation{0.0, excitation_variance, seed + 1};
    const NoiseModel no_noise{0.0, 0};
    CollectedData data = collect_data(plant, excitation, t_len, no_noise);
    HankelPartition part = partition(data.clean, t_ini, horizon);
    return LtiDataset{std::move(plant), std::move(data.clean), std::move(part)};
}

/// Benchmark dataset from the polynomial SISO plant (Example-1 layout).
struct SisoDataset {
    SignalTrajectory clean;
    SignalTrajectory measured;
    HankelPartition part;  // from measured data
};

inline SisoDataset make_siso_dataset(std::uint64_t seed, int t_len = 600, int t_ini = 1,
                                     int horizon = 5, double noise_variance = 0.0) {
    PolynomialSisoPlant plant;
    ExcitationSignal excitation{0.0, 0.01, seed};
    NoiseModel noise{noise_variance, seed + 1000};
    CollectedData data = collect_data(plant, excitation, t_len, noise);
    HankelPartition part = partition(data.measured, t_ini, horizon);
    return SisoDataset{std::move(data.clean), std::move(data.measured), std::move(part)};
}

/// Small kernel model over random data, for solver-level checks.
inline std::shared_ptr<KernelPredictorModel> make_toy_model(std::uint64_t seed,
                                                            const KernelSpec& spec, int h_c = 12,
                                                            int t_ini = 1, int horizon = 3,
                                                            double gamma = 1e-2) {
    const Dims d{1, 1, t_ini, horizon};
    const int t_len = h_c + t_ini + horizon - 1;
    Mat inputs = random_mat(seed, 1, t_len, 0.3);
    Mat outputs = random_mat(seed + 7, 1, t_len, 0.3);
    SignalTrajectory traj(inputs, outputs);
    HankelPartition part = partition(traj, d.t_ini, d.horizon);
    return std::make_shared<KernelPredictorModel>(
        fit_kernel(part, spec, gamma, GramMatrix::Source::noisy));
}

inline InitialWindow random_window(std::uint64_t seed, const Dims& d, double scale = 0.3) {
    InitialWindow w;
    w.u_ini = random_vec(seed, d.m * d.t_ini, scale);
    w.y_ini = random_vec(seed + 1, d.p * d.t_ini, scale);
    return w;
}

}  // namespace rokdeepc::test
