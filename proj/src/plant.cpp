#include "rokdeepc/plant.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

namespace rokdeepc {

double PolynomialSisoPlant::step_scalar(double u) {
    if (!std::isfinite(u)) throw SolverError("PolynomialSisoPlant: non-finite input");
    const double y = 4.0 * y_prev_ * u_prev_ - 0.5 * y_prev_ + 2.0 * u_prev_ * u + u;
    y_prev_ = y;
    u_prev_ = u;
    return y;
}

Vec PolynomialSisoPlant::step(const Vec& u) {
    if (u.size() != 1) throw DimensionError("PolynomialSisoPlant: input must be scalar");
    Vec y(1);
    y(0) = step_scalar(u(0));
    return y;
}

LtiPlant::LtiPlant(Mat a, Mat b, Mat c, Mat d)
    : a_(std::move(a)), b_(std::move(b)), c_(std::move(c)), d_(std::move(d)) {
    if (a_.rows() != a_.cols()) throw DimensionError("LtiPlant: A must be square");
    if (b_.rows() != a_.rows()) throw DimensionError("LtiPlant: B row count must match A");
    if (c_.cols() != a_.rows()) throw DimensionError("LtiPlant: C column count must match A");
    if (d_.rows() != c_.rows() || d_.cols() != b_.cols())
        throw DimensionError("LtiPlant: D must be p x m");
    x_ = Vec::Zero(a_.rows());
}

Vec LtiPlant::step(const Vec& u) {
    if (u.size() != b_.cols()) throw DimensionError("LtiPlant: input dimension mismatch");
    if (!u.allFinite()) throw SolverError("LtiPlant: non-finite input");
    Vec y = c_ * x_ + d_ * u;
    x_ = a_ * x_ + b_ * u;
    return y;
}

void LtiPlant::set_state(const Vec& x) {
    if (x.size() != a_.rows()) throw DimensionError("LtiPlant: state dimension mismatch");
    x_ = x;
}

double LtiPlant::spectral_radius() const {
    return a_.eigenvalues().cwiseAbs().maxCoeff();
}

namespace {

inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace

GaussianStream::GaussianStream(std::uint64_t seed, double mean, double variance)
    : seed_(seed), mean_(mean), stddev_(std::sqrt(variance)) {
    if (variance < 0.0) throw ConfigError("GaussianStream: variance must be >= 0");
}

double GaussianStream::uniform(std::uint64_t seed, std::uint64_t index) {
    const std::uint64_t bits = splitmix64(splitmix64(seed) ^ index);
    // top 53 bits -> (0, 1]; never returns 0 so log() below is safe
    return (static_cast<double>(bits >> 11) + 1.0) * 0x1.0p-53;
}

double GaussianStream::next() {
    const double u1 = uniform(seed_, 2 * counter_);
    const double u2 = uniform(seed_, 2 * counter_ + 1);
    ++counter_;
    const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    return mean_ + stddev_ * z;
}

Vec GaussianStream::next_vec(int n) {
    Vec v(n);
    for (int i = 0; i < n; ++i) v(i) = next();
    return v;
}

CollectedData collect_data(Plant& plant, const ExcitationSignal& excitation, int t_len,
                           const NoiseModel& noise) {
    if (t_len < 1) throw DimensionError("collect_data: t_len must be >= 1");
    const int m = plant.input_dim();
    const int p = plant.output_dim();
    GaussianStream u_stream = excitation.stream();
    GaussianStream w_stream = noise.stream();

    Mat inputs(m, t_len), clean(p, t_len), measured(p, t_len);
    for (int t = 0; t < t_len; ++t) {
        const Vec u = u_stream.next_vec(m);
        const Vec y = plant.step(u);
        inputs.col(t) = u;
        clean.col(t) = y;
        measured.col(t) = y + w_stream.next_vec(p);
    }
    return CollectedData{SignalTrajectory(inputs, clean), SignalTrajectory(inputs, measured)};
}

LtiPlant make_random_lti(std::uint64_t seed, int n, int m, int p, double spectral_radius) {
    GaussianStream stream(seed, 0.0, 1.0);
    Mat a(n, n), b(n, m), c(p, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a(i, j) = stream.next();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) b(i, j) = stream.next();
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < n; ++j) c(i, j) = stream.next();
    const double radius = a.eigenvalues().cwiseAbs().maxCoeff();
    if (radius > 0.0) a *= spectral_radius / radius;
    return LtiPlant(a, b, c, Mat::Zero(p, m));
}

LoadPower load_power(double du) {
    const double voltage = 1.0 + du;
    if (voltage <= 0.0)
        throw DimensionError("load_power: terminal voltage must be positive");
    LoadPower lp;
    lp.active = 0.3 + 0.2 * voltage * voltage * voltage + 10.0 * du * du + 5.0 * du;
    lp.reactive = 0.04 + 8.0 * du * du + 2.0 * du;
    return lp;
}

Vec make_reference(const std::vector<std::pair<int, double>>& breakpoints, int steps) {
    if (steps < 0) throw DimensionError("make_reference: steps must be >= 0");
    for (size_t i = 1; i < breakpoints.size(); ++i)
        if (breakpoints[i].first <= breakpoints[i - 1].first)
            throw DimensionError("make_reference: breakpoints must be strictly increasing");
    Vec r = Vec::Zero(steps);
    for (const auto& [start, value] : breakpoints)
        for (int t = std::max(start, 0); t < steps; ++t) r(t) = value;
    return r;
}

}  // namespace rokdeepc
