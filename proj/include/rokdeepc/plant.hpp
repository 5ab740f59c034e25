#pragma once

#include <cstdint>
#include <memory>
#include <utility>
#include <vector>

#include "rokdeepc/trajectory.hpp"
#include "rokdeepc/types.hpp"

namespace rokdeepc {

/// Simulated system driven one sample at a time. Plants are stateful and
/// single-owner; clone() yields an independent copy of the current state.
class Plant {
public:
    virtual ~Plant() = default;
    virtual Vec step(const Vec& u) = 0;
    virtual int input_dim() const = 0;
    virtual int output_dim() const = 0;
    virtual std::unique_ptr<Plant> clone() const = 0;
    virtual void reset() = 0;
};

/// Polynomial SISO benchmark system:
///   y_t = 4 y_{t-1} u_{t-1} - 0.5 y_{t-1} + 2 u_{t-1} u_t + u_t.
class PolynomialSisoPlant final : public Plant {
public:
    explicit PolynomialSisoPlant(double y0 = 0.0, double u0 = 0.0)
        : y_prev_(y0), u_prev_(u0), y0_(y0), u0_(u0) {}

    double step_scalar(double u);
    Vec step(const Vec& u) override;
    int input_dim() const override { return 1; }
    int output_dim() const override { return 1; }
    std::unique_ptr<Plant> clone() const override {
        return std::make_unique<PolynomialSisoPlant>(*this);
    }
    void reset() override {
        y_prev_ = y0_;
        u_prev_ = u0_;
    }

private:
    double y_prev_, u_prev_;
    double y0_, u0_;
};

/// Discrete-time LTI system x+ = Ax + Bu, y = Cx + Du.
class LtiPlant final : public Plant {
public:
    LtiPlant(Mat a, Mat b, Mat c, Mat d);

    Vec step(const Vec& u) override;
    int input_dim() const override { return static_cast<int>(b_.cols()); }
    int output_dim() const override { return static_cast<int>(c_.rows()); }
    int state_dim() const { return static_cast<int>(a_.rows()); }
    std::unique_ptr<Plant> clone() const override { return std::make_unique<LtiPlant>(*this); }
    void reset() override { x_.setZero(); }

    const Vec& state() const { return x_; }
    void set_state(const Vec& x);
    double spectral_radius() const;
    bool stable() const { return spectral_radius() < 1.0; }

    const Mat& a() const { return a_; }
    const Mat& b() const { return b_; }
    const Mat& c() const { return c_; }
    const Mat& d() const { return d_; }

private:
    Mat a_, b_, c_, d_;
    Vec x_;
};

/// Deterministic white Gaussian stream: a splitmix64 counter generator fed
/// through a Box-Muller transform. Sample i depends only on (seed, i), which
/// makes every experiment reproducible from its seed list.
class GaussianStream {
public:
    GaussianStream(std::uint64_t seed, double mean, double variance);

    double next();
    Vec next_vec(int n);
    std::uint64_t seed() const { return seed_; }

    /// Uniform in (0, 1), exposed for tests of the transform.
    static double uniform(std::uint64_t seed, std::uint64_t index);

private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
    double mean_, stddev_;
};

/// White Gaussian measurement noise description.
struct NoiseModel {
    double variance = 0.0;
    std::uint64_t seed = 0;

    GaussianStream stream() const { return GaussianStream(seed, 0.0, variance); }
};

/// White Gaussian excitation description.
struct ExcitationSignal {
    double mean = 0.0;
    double variance = 0.01;
    std::uint64_t seed = 1;

    GaussianStream stream() const { return GaussianStream(seed, mean, variance); }
};

struct CollectedData {
    SignalTrajectory clean;
    SignalTrajectory measured;
};

/// Drive the plant with the excitation stream for t_len samples. Measured
/// outputs are clean outputs plus noise; inputs carry no process noise.
CollectedData collect_data(Plant& plant, const ExcitationSignal& excitation, int t_len,
                           const NoiseModel& noise);

/// Random LTI test system with the requested spectral radius (A rescaled),
/// Gaussian B and C, and D = 0.
LtiPlant make_random_lti(std::uint64_t seed, int n, int m, int p, double spectral_radius = 0.7);

/// Static nonlinear load map (per-unit active/reactive power at voltage
/// deviation du from the nominal 1 p.u.).
struct LoadPower {
    double active;
    double reactive;
};
LoadPower load_power(double du);

/// Piecewise-constant reference from (step_index, value) breakpoints; zero
/// before the first breakpoint.
Vec make_reference(const std::vector<std::pair<int, double>>& breakpoints, int steps);

}  // namespace rokdeepc
