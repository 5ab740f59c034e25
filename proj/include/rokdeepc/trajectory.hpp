#pragma once

#include <string>

#include "rokdeepc/types.hpp"

namespace rokdeepc {

/// Recorded input/output time series. Column t holds the sample at time t,
/// so sliding windows are contiguous column ranges.
struct SignalTrajectory {
    Mat inputs;   // m x T
    Mat outputs;  // p x T

    SignalTrajectory() = default;
    SignalTrajectory(Mat inputs_, Mat outputs_);

    int m() const { return static_cast<int>(inputs.rows()); }
    int p() const { return static_cast<int>(outputs.rows()); }
    int length() const { return static_cast<int>(inputs.cols()); }
};

/// The four stacked Hankel blocks used by every predictor and controller:
/// past inputs/outputs estimate the initial condition, future blocks carry
/// the prediction targets. All blocks share the same column count.
struct HankelPartition {
    Mat u_past;    // m*t_ini x H_c
    Mat y_past;    // p*t_ini x H_c
    Mat u_future;  // m*horizon x H_c
    Mat y_future;  // p*horizon x H_c
    Dims dims;

    int cols() const { return static_cast<int>(u_past.cols()); }
};

/// Most recent input/output window, used to pin down the plant state.
struct InitialWindow {
    Vec u_ini;  // m*t_ini
    Vec y_ini;  // p*t_ini

    static InitialWindow zero(const Dims& d) {
        return {Vec::Zero(d.m * d.t_ini), Vec::Zero(d.p * d.t_ini)};
    }
};

/// Block-Hankel matrix of the given depth: block (i, j) equals series column
/// i + j. Output is q*depth x (T - depth + 1).
Mat build_hankel(const Mat& series, int depth);

/// Split a trajectory into past/future Hankel blocks of depth t_ini + horizon.
HankelPartition partition(const SignalTrajectory& traj, int t_ini, int horizon);

/// Numerical rank of col(U_P, Y_P, U_F, Y_F). Singular values below
/// max_dim * sigma_max * 1e-10 count as zero.
int excitation_rank(const HankelPartition& part);

/// Column j of the stacked regressor col(U_P, Y_P, U_F) — the kernel
/// regressor x_j. Zero-based; length (m+p)*t_ini + m*horizon.
Vec column_sample(const HankelPartition& part, int j);

/// CSV I/O: one-line header "m,p", then one row per sample with columns
/// u_1..u_m, y_1..y_p. Values are written with 17 significant digits so a
/// round trip is bit exact.
SignalTrajectory load_csv(const std::string& path);
void save_csv(const SignalTrajectory& traj, const std::string& path);

}  // namespace rokdeepc
