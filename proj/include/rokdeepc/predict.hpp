#pragma once

#include <Eigen/Cholesky>
#include <memory>
#include <nlohmann/json.hpp>

#include "rokdeepc/kernel.hpp"
#include "rokdeepc/trajectory.hpp"
#include "rokdeepc/types.hpp"

namespace rokdeepc {

/// Common multi-step predictor interface: map an initial window plus a
/// horizon-length input sequence to the predicted output sequence.
class Predictor {
public:
    virtual ~Predictor() = default;
    virtual Vec predict(const InitialWindow& window, const Vec& u) const = 0;
    virtual Dims dims() const = 0;
};

/// Explicit linear predictor y = M col(u_ini, y_ini, u).
class LinearPredictorModel final : public Predictor {
public:
    LinearPredictorModel(Mat coeff, Dims dims);

    Vec predict(const InitialWindow& window, const Vec& u) const override;
    Dims dims() const override { return dims_; }
    const Mat& coeff() const { return coeff_; }

private:
    Mat coeff_;  // p*horizon x regressor_len
    Dims dims_;
};

/// Least-squares fit of the linear predictor via the pseudoinverse of the
/// stacked regressor col(U_P, Y_P, U_F).
LinearPredictorModel fit_linear(const HankelPartition& part);
Vec predict_linear(const LinearPredictorModel& model, const InitialWindow& window, const Vec& u);

/// Kernel ridge predictor y = Y_F (K + gamma I)^{-1} k(u_ini, y_ini, u) with
/// a cached Cholesky factorization of the regularized Gram matrix and the
/// coefficient matrix W = Y_F (K + gamma I)^{-1}.
class KernelPredictorModel final : public Predictor {
public:
    KernelPredictorModel(KernelSpec spec, CenterSet centers, Mat y_future, double gamma,
                         GramMatrix gram);

    Vec predict(const InitialWindow& window, const Vec& u) const override;
    Dims dims() const override { return centers_.dims; }

    /// Kernel vector at the stacked query col(u_ini, y_ini, u).
    Vec kvec(const InitialWindow& window, const Vec& u) const;
    Vec query(const InitialWindow& window, const Vec& u) const;

    const KernelSpec& spec() const { return spec_; }
    const CenterSet& centers() const { return centers_; }
    const Mat& y_future() const { return y_future_; }
    const Mat& regularized_gram() const { return v_; }
    const Eigen::LLT<Mat>& factorization() const { return llt_; }
    const Mat& coefficients() const { return w_; }
    double gamma() const { return gamma_; }
    GramMatrix::Source source() const { return source_; }
    int center_count() const { return centers_.count(); }

private:
    KernelSpec spec_;
    CenterSet centers_;
    Mat y_future_;  // p*horizon x H_c
    double gamma_;
    GramMatrix::Source source_;
    Mat v_;  // K + gamma I
    Eigen::LLT<Mat> llt_;
    Mat w_;  // Y_F (K + gamma I)^{-1}
};

KernelPredictorModel fit_kernel(const HankelPartition& part, const KernelSpec& spec, double gamma,
                                GramMatrix::Source source = GramMatrix::Source::noisy);
Vec predict_kernel(const KernelPredictorModel& model, const InitialWindow& window, const Vec& u);

/// Lifting dictionary for the Koopman/EDMD predictor. The poly_tps kind uses
/// a constant, the state coordinates, their degree-2 monomials, and thin
/// plate spline radial functions psi(x) = |x-c|^2 log |x-c| (0 at the
/// center). The identity kind lifts to the raw state.
struct KoopmanDictionary {
    enum class Kind { identity, poly_tps };

    Kind kind = Kind::poly_tps;
    int state_dim = 2;
    Mat tps_centers;  // state_dim x n_rbf (poly_tps only)

    static KoopmanDictionary identity(int state_dim);
    static KoopmanDictionary poly_tps(int state_dim, const Mat& centers);
    /// Centers drawn uniformly from [-box, box]^state_dim.
    static KoopmanDictionary poly_tps_random(int state_dim, int n_rbf, double box,
                                             std::uint64_t seed);

    int lifted_dim() const;
    Vec lift(const Vec& x) const;
    /// Position of state coordinate i inside the lifted vector.
    int state_coord_index(int i) const;
};

/// Lifted linear predictor z+ = A z + B u with output read from the lifted
/// state after the transition: y_t = C z_{t+1}.
class KoopmanModel final : public Predictor {
public:
    KoopmanModel(KoopmanDictionary dict, Mat a_lift, Mat b_lift, Mat c_lift, Dims dims);

    Vec predict(const InitialWindow& window, const Vec& u) const override;
    Dims dims() const override { return dims_; }

    const Mat& a_lift() const { return a_; }
    const Mat& b_lift() const { return b_; }
    const Mat& c_lift() const { return c_; }
    void set_c_lift(Mat c);
    const KoopmanDictionary& dictionary() const { return dict_; }

    /// Lift the stacked window state col(u_ini, y_ini).
    Vec lift_window(const InitialWindow& window) const;

private:
    KoopmanDictionary dict_;
    Mat a_, b_, c_;
    Dims dims_;
};

/// EDMD least-squares fit of the lifted dynamics. Columns of states/inputs/
/// next_states are per-sample; the regression is solved with a pseudoinverse
/// (rank deficiency is not an error). The output map selects the most recent
/// output block of the lifted next state.
KoopmanModel fit_koopman(const Mat& states, const Mat& inputs, const Mat& next_states,
                         const KoopmanDictionary& dict, const Dims& dims);

/// Extract (states, inputs, next_states) samples for a window state
/// x_t = col(u_{t-t_ini..t-1}, y_{t-t_ini..t-1}) from a recorded trajectory.
struct KoopmanSamples {
    Mat states;
    Mat inputs;
    Mat next_states;
};
KoopmanSamples koopman_samples(const SignalTrajectory& traj, int t_ini);

/// Chained multi-step prediction: apply the predictor blockwise and re-form
/// the window from the most recent predicted outputs and applied inputs.
Vec rollout(const Predictor& predictor, const InitialWindow& window, const Vec& u_long);

/// Sum of squared output deviations.
double prediction_error(const Vec& predicted, const Vec& actual);

// Model serialization for reuse across CLI runs.
nlohmann::json to_json(const LinearPredictorModel& model);
nlohmann::json to_json(const KernelPredictorModel& model);
nlohmann::json to_json(const KoopmanModel& model);
LinearPredictorModel linear_from_json(const nlohmann::json& j);
KernelPredictorModel kernel_from_json(const nlohmann::json& j);
KoopmanModel koopman_from_json(const nlohmann::json& j);

}  // namespace rokdeepc
