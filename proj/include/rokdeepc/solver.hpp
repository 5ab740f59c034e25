#pragma once

#include <Eigen/Cholesky>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rokdeepc/predict.hpp"
#include "rokdeepc/types.hpp"

namespace rokdeepc {

/// Stage cost weights: ell(u) = r_u sum |u_t|^2 + r_delta sum_{t>=2}
/// |u_t - u_{t-1}|^2, output weight Q = q_y I against the reference.
struct CostSpec {
    double r_u = 1.0;
    double r_delta = 100.0;
    double q_y = 1000.0;
    Vec reference;  // p*horizon

    void validate() const;
};

/// Elementwise box, entries may be +-inf.
struct BoxSet {
    Vec lower, upper;

    static BoxSet unbounded(int n);
    bool bounded() const;  // any finite bound present
    void validate() const;
    bool contains(const Vec& x, double tol = 0.0) const;
};

/// Parameters of the robustified (SOCP-form) cost.
struct SocpParams {
    double lambda_k = 0.0;
    double rho1 = 0.0;
    double rho2 = 0.0;
    bool degenerate = false;  // Eq. (23) unsatisfiable for the pinned value
};

/// Regularization/robustness weights of the quadratic reformulation, plus
/// the pinning rule used to recover the SOCP-form parameters after a solve.
struct RobustConfig {
    double lambda_k_prime = 1e8;
    double lambda_g = 1.0;
    double gamma = 1e-2;
    bool pin_rho2 = true;    // recover the other of (rho1, rho2) from Eq. (23)
    double pinned_rho = 0.0;
    std::optional<double> g_norm_bound;  // for the polyhedral restriction of G
    std::optional<SocpParams> socp;      // when evaluating the SOCP cost directly

    void validate() const;
};

/// Projected-gradient loop controls.
struct GDConfig {
    double alpha = 1e-2;
    int i_max = 200;
    double xi = 1e-6;
    bool warm_start = false;
    bool backtracking = true;  // Armijo halving, factor 0.5, slope 1e-4

    void validate() const;
};

struct SolveResult {
    Vec u_star;
    Vec g_star;
    std::vector<double> cost_trace;  // c(u_i, g_i) including the initial pair
    int iterations = 0;
    bool converged = false;
    SocpParams equivalent;
    double kkt_residual = std::numeric_limits<double>::quiet_NaN();
};

struct ControlProblem {
    CostSpec cost;
    RobustConfig robust;
    GDConfig gd;
    BoxSet u_box;
    BoxSet y_box;
    int control_horizon = 1;  // warm-start shift length
};

// --- cost pieces ---------------------------------------------------------

/// Quadratic form of ell(u): r_u I + r_delta D'D with D the one-step
/// difference operator over the horizon blocks.
Mat input_cost_matrix(const CostSpec& cost, int m, int horizon);
double input_cost(const CostSpec& cost, const Vec& u, int m);
/// |v|_Q = sqrt(q_y) * |v|.
double q_norm(const CostSpec& cost, const Vec& v);

/// SOCP-form cost c(u, g), Eq. (21) shape:
/// ell(u) + |Yf g - r|_Q + lambda_k rho1 sqrt(|g|^2+1) + rho2 |g|
///        + lambda_k |(K+gamma I) g - k(window, u)|.
double eval_cost_socp(const KernelPredictorModel& model, const CostSpec& cost,
                      const SocpParams& params, const InitialWindow& window, const Vec& u,
                      const Vec& g);

/// Quadratic cost c_q(u, g):
/// ell(u) + |Yf g - r|_Q^2 + lambda_g |g|^2
///        + lambda_k' |(K+gamma I) g - k(window, u)|^2.
double eval_cost_quad(const KernelPredictorModel& model, const CostSpec& cost,
                      const RobustConfig& robust, const InitialWindow& window, const Vec& u,
                      const Vec& g);

/// Elementwise clamp of u into the box.
Vec project_box(const Vec& u, const BoxSet& box);

/// Gradient of c_q in u at fixed g:
/// 2 L u - 2 lambda_k' J_k(u)' [(K+gamma I) g - k(window, u)].
Vec grad_u(const KernelPredictorModel& model, const CostSpec& cost, const RobustConfig& robust,
           const InitialWindow& window, const Vec& u, const Vec& g);

// --- g subproblem --------------------------------------------------------

/// Cached closed-form solver for min_g c_q(u, g): the normal matrix
/// Yf' Q Yf + lambda_g I + lambda_k' (K+gamma I)^2 is factorized once and
/// M_r, M_k are stored for reuse across receding-horizon steps.
class QuadraticGSolver {
public:
    QuadraticGSolver(const KernelPredictorModel& model, const CostSpec& cost,
                     const RobustConfig& robust);

    /// g* = M_r r + M_k k; also returns Vg for cheap residual evaluation.
    struct Update {
        Vec g;
        Vec vg;
    };
    Update solve(const Vec& kvec, const Vec& reference) const;

    /// Minimize c_q over the conservative polyhedron
    /// { g | y_lo + margin <= Yf g <= y_up - margin }.
    Update solve_constrained(const Vec& kvec, const Vec& reference, const BoxSet& y_box,
                             double margin) const;

    const Mat& m_r() const { return m_r_; }
    const Mat& m_k() const { return m_k_; }
    const KernelPredictorModel& model() const { return *model_; }

private:
    const KernelPredictorModel* model_;
    double q_y_, lambda_g_, lambda_k_prime_;
    Eigen::LLT<Mat> normal_llt_;
    Mat m_r_, m_k_;    // H_c x pN, H_c x H_c
    Mat vm_r_, vm_k_;  // V M_r, V M_k
};

Vec solve_g_closed_form(const KernelPredictorModel& model, const CostSpec& cost,
                        const RobustConfig& robust, const InitialWindow& window, const Vec& u);
Vec solve_g_constrained(const KernelPredictorModel& model, const CostSpec& cost,
                        const RobustConfig& robust, const InitialWindow& window, const Vec& u,
                        const BoxSet& y_box);

// --- diagnostics ----------------------------------------------------------

/// Recover the SOCP-form parameters equivalent to a completed quadratic
/// solve at (u*, g*): lambda_k from Eq. (22); the free one of (rho1, rho2)
/// from Eq. (23) given the pinned one.
SocpParams equivalent_params(const KernelPredictorModel& model, const CostSpec& cost,
                             const RobustConfig& robust, const InitialWindow& window, const Vec& u,
                             const Vec& g, bool pin_rho2, double pinned_value);

/// Norm of the subgradient stationarity residual of c(u, .) at g under the
/// unconstrained-G selections (mu = 0).
double kkt_residual_socp(const KernelPredictorModel& model, const CostSpec& cost,
                         const SocpParams& params, const InitialWindow& window, const Vec& u,
                         const Vec& g);

/// Scale for relative KKT residual checks: 1 + max subgradient term norm.
double kkt_residual_scale(const KernelPredictorModel& model, const CostSpec& cost,
                          const SocpParams& params, const InitialWindow& window, const Vec& u,
                          const Vec& g);

/// Numerical check of the worst-case closed forms: samples perturbations in
/// the Frobenius balls and evaluates the rank-one construction that attains
/// the supremum.
struct WorstCaseReport {
    double closed_form_residual = 0.0;
    double max_sampled_residual = 0.0;
    double attained_residual = 0.0;
    int violations_residual = 0;
    double closed_form_tracking = 0.0;
    double max_sampled_tracking = 0.0;
    double attained_tracking = 0.0;
    int violations_tracking = 0;
};
WorstCaseReport worst_case_verify(const Mat& y_future, double q_y, const Mat& v, const Vec& kvec,
                                  const Vec& reference, const Vec& g, double rho1, double rho2,
                                  int n_samples, std::uint64_t seed);

// --- controllers ----------------------------------------------------------

/// Receding-horizon controller interface used by the benchmark harness.
class Controller {
public:
    virtual ~Controller() = default;
    virtual SolveResult solve(const InitialWindow& window, const Vec& reference) = 0;
    virtual Dims dims() const = 0;
    virtual const CostSpec& cost() const = 0;
    virtual std::string name() const = 0;

    // kernel-based controllers expose their model for diagnostics
    virtual const KernelPredictorModel* kernel_model() const { return nullptr; }
    virtual const RobustConfig* robust() const { return nullptr; }
};

/// Block-coordinate solver for the quadratic RoKDeePC reformulation:
/// projected gradient steps on u, closed-form (or constrained) updates of g.
/// Also serves as the certainty-equivalence kernel MPC when lambda_g is
/// driven to ~0 (no robustification term present).
class KernelController final : public Controller {
public:
    KernelController(std::shared_ptr<const KernelPredictorModel> model, ControlProblem problem,
                     std::string name = "rokdeepc");

    SolveResult solve(const InitialWindow& window, const Vec& reference) override;
    SolveResult solve(const InitialWindow& window);

    Dims dims() const override { return model_->dims(); }
    const CostSpec& cost() const override { return problem_.cost; }
    std::string name() const override { return name_; }
    const KernelPredictorModel* kernel_model() const override { return model_.get(); }
    const RobustConfig* robust() const override { return &problem_.robust; }
    const ControlProblem& problem() const { return problem_; }
    void reset_warm_start() { prev_u_.reset(); }

private:
    std::shared_ptr<const KernelPredictorModel> model_;
    ControlProblem problem_;
    std::string name_;
    Mat l_u_;  // input cost quadratic form
    QuadraticGSolver g_solver_;
    std::optional<Vec> prev_u_;
};

SolveResult rokdeepc_solve(std::shared_ptr<const KernelPredictorModel> model,
                           const ControlProblem& problem, const InitialWindow& window);

/// Certainty-equivalence kernel MPC: identical machinery with lambda_g fixed
/// to 1e-9 for conditioning only.
SolveResult kernel_mpc_solve(std::shared_ptr<const KernelPredictorModel> model,
                             ControlProblem problem, const InitialWindow& window);
std::unique_ptr<KernelController> make_kernel_mpc_controller(
    std::shared_ptr<const KernelPredictorModel> model, ControlProblem problem,
    std::string name = "kernel_mpc");

/// Quadratically regularized DeePC baseline:
/// min ell(u) + |y - r|_Q^2 + lambda_g |g|^2 + lambda_y |Y_P g - y_ini|^2
/// s.t. U_P g = u_ini, u = U_F g, y = Y_F g, boxes on (u, y).
struct DeepcConfig {
    double lambda_g = 1.0;
    double lambda_y = 1e5;
};
class DeepcController final : public Controller {
public:
    DeepcController(HankelPartition data, CostSpec cost, DeepcConfig config, BoxSet u_box,
                    BoxSet y_box);

    SolveResult solve(const InitialWindow& window, const Vec& reference) override;
    Dims dims() const override { return data_.dims; }
    const CostSpec& cost() const override { return cost_; }
    std::string name() const override { return "deepc"; }

private:
    HankelPartition data_;
    CostSpec cost_;
    DeepcConfig config_;
    BoxSet u_box_, y_box_;
    Mat p_;  // quadratic form of the reduced problem
    Eigen::LLT<Mat> p_llt_;
    Eigen::LDLT<Mat> schur_ldlt_;  // U_P P^{-1} U_P'
    Mat p_inv_up_t_;               // P^{-1} U_P'
};
SolveResult deepc_solve(const HankelPartition& data, const CostSpec& cost,
                        const DeepcConfig& config, const BoxSet& u_box, const BoxSet& y_box,
                        const InitialWindow& window);

/// Finite-horizon QP over the lifted linear dynamics, condensed in u; solved
/// in closed form when the input box is inactive, by projected gradient
/// otherwise.
class KoopmanMpcController final : public Controller {
public:
    KoopmanMpcController(std::shared_ptr<const KoopmanModel> model, CostSpec cost, GDConfig gd,
                         BoxSet u_box);

    SolveResult solve(const InitialWindow& window, const Vec& reference) override;
    Dims dims() const override { return model_->dims(); }
    const CostSpec& cost() const override { return cost_; }
    std::string name() const override { return "koopman_mpc"; }

    const Mat& phi() const { return phi_; }
    const Mat& gamma_mat() const { return gamma_; }

private:
    std::shared_ptr<const KoopmanModel> model_;
    CostSpec cost_;
    GDConfig gd_;
    BoxSet u_box_;
    Mat phi_;    // pN x lifted_dim, rows C A^t
    Mat gamma_;  // pN x mN, block lower triangular C A^{t-j} B
    Mat hess_;   // L + q_y Gamma'Gamma
    Eigen::LLT<Mat> hess_llt_;
};
SolveResult koopman_mpc_solve(std::shared_ptr<const KoopmanModel> model, const CostSpec& cost,
                              const GDConfig& gd, const BoxSet& u_box, const InitialWindow& window,
                              const Vec& reference);

namespace detail {

/// Dense strictly convex QP: minimize g'Pg - 2c'g subject to A_eq g = b_eq
/// and A_in g <= b_in, solved by dual coordinate ascent with the equality
/// multipliers eliminated exactly. KKT tolerance 1e-6 (scaled).
Vec solve_qp(const Eigen::LLT<Mat>& p_llt, const Vec& c, const Mat& a_eq, const Vec& b_eq,
             const Mat& a_in, const Vec& b_in);

}  // namespace detail

}  // namespace rokdeepc
