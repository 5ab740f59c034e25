#include "rokdeepc/solver.hpp"

#include <algorithm>
#include <cmath>

#include "rokdeepc/plant.hpp"

namespace rokdeepc {

void CostSpec::validate() const {
    if (!std::isfinite(r_u) || !std::isfinite(r_delta) || !std::isfinite(q_y))
        throw ConfigError("cost: weights must be finite");
    if (r_u < 0.0 || r_delta < 0.0 || q_y < 0.0)
        throw ConfigError("cost: weights must be >= 0");
}

BoxSet BoxSet::unbounded(int n) {
    BoxSet b;
    b.lower = Vec::Constant(n, -std::numeric_limits<double>::infinity());
    b.upper = Vec::Constant(n, std::numeric_limits<double>::infinity());
    return b;
}

bool BoxSet::bounded() const {
    if (lower.size() == 0) return false;
    return lower.array().isFinite().any() || upper.array().isFinite().any();
}

void BoxSet::validate() const {
    if (lower.size() != upper.size())
        throw DimensionError("box: lower and upper must have the same length");
    for (Eigen::Index i = 0; i < lower.size(); ++i)
        if (lower(i) > upper(i))
            throw DimensionError("box: lower bound exceeds upper bound at index " +
                                 std::to_string(i));
}

bool BoxSet::contains(const Vec& x, double tol) const {
    if (lower.size() == 0) return true;
    if (x.size() != lower.size()) throw DimensionError("box: length mismatch");
    return (x.array() >= lower.array() - tol).all() && (x.array() <= upper.array() + tol).all();
}

void RobustConfig::validate() const {
    if (lambda_k_prime <= 0.0 || lambda_g <= 0.0 || gamma <= 0.0)
        throw ConfigError("robust config: lambda_k_prime, lambda_g, gamma must be > 0");
    if (pinned_rho < 0.0) throw ConfigError("robust config: pinned rho must be >= 0");
}

void GDConfig::validate() const {
    if (alpha <= 0.0) throw ConfigError("gd config: alpha must be > 0");
    if (xi <= 0.0) throw ConfigError("gd config: xi must be > 0");
    if (i_max < 1) throw ConfigError("gd config: i_max must be >= 1");
}

Mat input_cost_matrix(const CostSpec& cost, int m, int horizon) {
    const int n = m * horizon;
    Mat l = cost.r_u * Mat::Identity(n, n);
    for (int t = 1; t < horizon; ++t) {
        // contribution of r_delta |u_t - u_{t-1}|^2
        for (int i = 0; i < m; ++i) {
            const int a = (t - 1) * m + i, b = t * m + i;
            l(a, a) += cost.r_delta;
            l(b, b) += cost.r_delta;
            l(a, b) -= cost.r_delta;
            l(b, a) -= cost.r_delta;
        }
    }
    return l;
}

double input_cost(const CostSpec& cost, const Vec& u, int m) {
    if (u.size() % m != 0) throw DimensionError("input_cost: length not a multiple of m");
    const int horizon = static_cast<int>(u.size()) / m;
    double value = cost.r_u * u.squaredNorm();
    for (int t = 1; t < horizon; ++t)
        value += cost.r_delta * (u.segment(t * m, m) - u.segment((t - 1) * m, m)).squaredNorm();
    return value;
}

double q_norm(const CostSpec& cost, const Vec& v) { return std::sqrt(cost.q_y) * v.norm(); }

namespace {

void check_solve_dims(const KernelPredictorModel& model, const Vec& u, const Vec& g,
                      const Vec& reference) {
    const Dims d = model.dims();
    if (u.size() != d.u_len())
        throw DimensionError("solver: u length must be m*horizon = " + std::to_string(d.u_len()));
    if (g.size() != model.center_count())
        throw DimensionError("solver: g length must be H_c = " +
                             std::to_string(model.center_count()));
    if (reference.size() != d.y_len())
        throw DimensionError("solver: reference length must be p*horizon = " +
                             std::to_string(d.y_len()));
}

}  // namespace

double eval_cost_socp(const KernelPredictorModel& model, const CostSpec& cost,
                      const SocpParams& params, const InitialWindow& window, const Vec& u,
                      const Vec& g) {
    check_solve_dims(model, u, g, cost.reference);
    const Vec kv = model.kvec(window, u);
    const double track = q_norm(cost, model.y_future() * g - cost.reference);
    const double res = (model.regularized_gram() * g - kv).norm();
    return input_cost(cost, u, model.dims().m) + track +
           params.lambda_k * params.rho1 * std::sqrt(g.squaredNorm() + 1.0) +
           params.rho2 * g.norm() + params.lambda_k * res;
}

double eval_cost_quad(const KernelPredictorModel& model, const CostSpec& cost,
                      const RobustConfig& robust, const InitialWindow& window, const Vec& u,
                      const Vec& g) {
    check_solve_dims(model, u, g, cost.reference);
    const Vec kv = model.kvec(window, u);
    const double track = q_norm(cost, model.y_future() * g - cost.reference);
    const double res = (model.regularized_gram() * g - kv).norm();
    return input_cost(cost, u, model.dims().m) + track * track +
           robust.lambda_g * g.squaredNorm() + robust.lambda_k_prime * res * res;
}

Vec project_box(const Vec& u, const BoxSet& box) {
    if (box.lower.size() == 0) return u;
    if (u.size() != box.lower.size()) throw DimensionError("project_box: length mismatch");
    return u.cwiseMax(box.lower).cwiseMin(box.upper);
}

Vec grad_u(const KernelPredictorModel& model, const CostSpec& cost, const RobustConfig& robust,
           const InitialWindow& window, const Vec& u, const Vec& g) {
    const Dims d = model.dims();
    if (u.size() != d.u_len() || g.size() != model.center_count())
        throw DimensionError("grad_u: u or g length mismatch");
    const Vec query = model.query(window, u);
    const Vec kv = kernel_vector(model.spec(), model.centers(), query);
    const Mat jac = kernel_jacobian_u(model.spec(), model.centers(), query, d);
    const Vec residual = model.regularized_gram() * g - kv;
    const Mat l = input_cost_matrix(cost, d.m, d.horizon);
    return 2.0 * l * u - 2.0 * robust.lambda_k_prime * jac.transpose() * residual;
}

// --- closed-form / constrained g updates -----------------------------------

QuadraticGSolver::QuadraticGSolver(const KernelPredictorModel& model, const CostSpec& cost,
                                   const RobustConfig& robust)
    : model_(&model),
      q_y_(cost.q_y),
      lambda_g_(robust.lambda_g),
      lambda_k_prime_(robust.lambda_k_prime) {
    robust.validate();
    const Mat& yf = model.y_future();
    const Mat& v = model.regularized_gram();
    const int n = model.center_count();
    Mat normal = q_y_ * (yf.transpose() * yf) + lambda_g_ * Mat::Identity(n, n) +
                 lambda_k_prime_ * (v * v);
    normal_llt_.compute(normal);
    if (normal_llt_.info() != Eigen::Success)
        throw SolverError("g update: normal matrix not positive definite (lambda_g > 0 should "
                          "prevent this)");
    m_r_ = q_y_ * normal_llt_.solve(yf.transpose());
    m_k_ = lambda_k_prime_ * normal_llt_.solve(v);
    vm_r_ = v * m_r_;
    vm_k_ = v * m_k_;
}

QuadraticGSolver::Update QuadraticGSolver::solve(const Vec& kvec, const Vec& reference) const {
    Update u;
    u.g = m_r_ * reference + m_k_ * kvec;
    u.vg = vm_r_ * reference + vm_k_ * kvec;
    return u;
}

QuadraticGSolver::Update QuadraticGSolver::solve_constrained(const Vec& kvec,
                                                             const Vec& reference,
                                                             const BoxSet& y_box,
                                                             double margin) const {
    const Mat& yf = model_->y_future();
    const Mat& v = model_->regularized_gram();
    y_box.validate();
    if (y_box.lower.size() != yf.rows())
        throw DimensionError("g update: output box must have p*horizon entries");

    // rows of Yf g <= up - margin and -Yf g <= -(lo + margin) for finite bounds
    std::vector<int> up_rows, lo_rows;
    for (int i = 0; i < yf.rows(); ++i) {
        if (std::isfinite(y_box.upper(i))) up_rows.push_back(i);
        if (std::isfinite(y_box.lower(i))) lo_rows.push_back(i);
    }
    Mat a_in(up_rows.size() + lo_rows.size(), yf.cols());
    Vec b_in(a_in.rows());
    int r = 0;
    for (int i : up_rows) {
        a_in.row(r) = yf.row(i);
        b_in(r++) = y_box.upper(i) - margin;
    }
    for (int i : lo_rows) {
        a_in.row(r) = -yf.row(i);
        b_in(r++) = -(y_box.lower(i) + margin);
    }

    const Vec c = q_y_ * yf.transpose() * reference + lambda_k_prime_ * v * kvec;
    Update u;
    u.g = detail::solve_qp(normal_llt_, c, Mat(0, yf.cols()), Vec(0), a_in, b_in);
    u.vg = v * u.g;
    return u;
}

Vec solve_g_closed_form(const KernelPredictorModel& model, const CostSpec& cost,
                        const RobustConfig& robust, const InitialWindow& window, const Vec& u) {
    QuadraticGSolver solver(model, cost, robust);
    return solver.solve(model.kvec(window, u), cost.reference).g;
}

Vec solve_g_constrained(const KernelPredictorModel& model, const CostSpec& cost,
                        const RobustConfig& robust, const InitialWindow& window, const Vec& u,
                        const BoxSet& y_box) {
    QuadraticGSolver solver(model, cost, robust);
    const Vec kv = model.kvec(window, u);
    const QuadraticGSolver::Update unconstrained = solver.solve(kv, cost.reference);
    const double b_g = robust.g_norm_bound.value_or(2.0 * unconstrained.g.norm());
    const double rho2 = robust.pin_rho2 ? robust.pinned_rho : 0.0;
    const double margin = cost.q_y > 0.0 ? rho2 * b_g / std::sqrt(cost.q_y) : 0.0;
    return solver.solve_constrained(kv, cost.reference, y_box, margin).g;
}

// --- diagnostics ------------------------------------------------------------

SocpParams equivalent_params(const KernelPredictorModel& model, const CostSpec& cost,
                             const RobustConfig& robust, const InitialWindow& window, const Vec& u,
                             const Vec& g, bool pin_rho2, double pinned_value) {
    check_solve_dims(model, u, g, cost.reference);
    const Vec kv = model.kvec(window, u);
    const double res = (model.regularized_gram() * g - kv).norm();
    const double track = q_norm(cost, model.y_future() * g - cost.reference);
    const double g_norm = g.norm();
    constexpr double kBranchTol = 1e-12;

    SocpParams out;
    out.lambda_k = track > kBranchTol ? robust.lambda_k_prime * res / track
                                      : robust.lambda_k_prime * res;
    const double rhs = track > kBranchTol ? robust.lambda_g * g_norm / track
                                          : robust.lambda_g * g_norm;
    const double shrink = g_norm / std::sqrt(g_norm * g_norm + 1.0);
    if (pin_rho2) {
        out.rho2 = pinned_value;
        if (g_norm == 0.0 || out.lambda_k == 0.0) {
            // Eq. (23) reduces to rho2 = 0; any pinned rho2 > 0 is unsatisfiable
            out.rho1 = 0.0;
            out.degenerate = pinned_value != 0.0 || out.lambda_k == 0.0;
        } else {
            out.rho1 = (rhs - pinned_value) / (out.lambda_k * shrink);
            if (out.rho1 < 0.0) {
                out.rho1 = 0.0;
                out.degenerate = true;
            }
        }
    } else {
        out.rho1 = pinned_value;
        out.rho2 = rhs - out.lambda_k * pinned_value * shrink;
        if (out.rho2 < 0.0) {
            out.rho2 = 0.0;
            out.degenerate = true;
        }
    }
    return out;
}

namespace {

struct SocpSubgradients {
    Vec y_sel, reg1, w_sel, z_sel;
};

SocpSubgradients socp_subgradients(const KernelPredictorModel& model, const CostSpec& cost,
                                   const SocpParams& params, const InitialWindow& window,
                                   const Vec& u, const Vec& g) {
    const Vec kv = model.kvec(window, u);
    const Mat& yf = model.y_future();
    const Mat& v = model.regularized_gram();
    const Vec track_vec = yf * g - cost.reference;
    const double track = q_norm(cost, track_vec);
    const Vec res_vec = v * g - kv;
    const double res = res_vec.norm();
    const double g_norm = g.norm();

    SocpSubgradients s;
    s.y_sel = track > 0.0 ? Vec(cost.q_y * yf.transpose() * track_vec / track)
                          : Vec(Vec::Zero(g.size()));
    s.reg1 = params.lambda_k * params.rho1 / std::sqrt(g_norm * g_norm + 1.0) * g;
    s.w_sel = g_norm > 0.0 ? Vec(params.rho2 * g / g_norm) : Vec(Vec::Zero(g.size()));
    s.z_sel = res > 0.0 ? Vec(params.lambda_k * v.transpose() * res_vec / res)
                        : Vec(Vec::Zero(g.size()));
    return s;
}

}  // namespace

double kkt_residual_socp(const KernelPredictorModel& model, const CostSpec& cost,
                         const SocpParams& params, const InitialWindow& window, const Vec& u,
                         const Vec& g) {
    check_solve_dims(model, u, g, cost.reference);
    const auto s = socp_subgradients(model, cost, params, window, u, g);
    return (s.y_sel + s.reg1 + s.w_sel + s.z_sel).norm();
}

double kkt_residual_scale(const KernelPredictorModel& model, const CostSpec& cost,
                          const SocpParams& params, const InitialWindow& window, const Vec& u,
                          const Vec& g) {
    const auto s = socp_subgradients(model, cost, params, window, u, g);
    return 1.0 + std::max({s.y_sel.norm(), s.reg1.norm(), s.w_sel.norm(), s.z_sel.norm()});
}

WorstCaseReport worst_case_verify(const Mat& y_future, double q_y, const Mat& v, const Vec& kvec,
                                  const Vec& reference, const Vec& g, double rho1, double rho2,
                                  int n_samples, std::uint64_t seed) {
    if (n_samples < 1) throw DimensionError("worst_case_verify: n_samples must be >= 1");
    if (v.rows() != v.cols() || v.cols() != g.size() || kvec.size() != g.size())
        throw DimensionError("worst_case_verify: V, k, g sizes inconsistent");
    if (y_future.cols() != g.size() || reference.size() != y_future.rows())
        throw DimensionError("worst_case_verify: Y_F, r sizes inconsistent");

    GaussianStream stream(seed, 0.0, 1.0);
    const double sqrt_q = std::sqrt(q_y);
    const int n = static_cast<int>(g.size());
    const int pn = static_cast<int>(y_future.rows());

    WorstCaseReport rep;
    const Vec nominal_res = v * g - kvec;
    rep.closed_form_residual = nominal_res.norm() + rho1 * std::sqrt(g.squaredNorm() + 1.0);
    const Vec nominal_track = y_future * g - reference;
    rep.closed_form_tracking = sqrt_q * nominal_track.norm() + rho2 * g.norm();

    auto ball_scale = [&](Mat& d, double radius, int sample_idx) {
        const double fn = d.norm();
        if (fn == 0.0 || radius == 0.0) {
            d.setZero();
            return;
        }
        // every fourth sample sits exactly on the boundary
        const double frac = (sample_idx % 4 == 0)
                                ? 1.0
                                : GaussianStream::uniform(seed ^ 0x5bd1e995ULL,
                                                          static_cast<std::uint64_t>(sample_idx));
        d *= radius * frac / fn;
    };

    for (int s = 0; s < n_samples; ++s) {
        Mat d1(n, n + 1);
        for (int i = 0; i < d1.rows(); ++i)
            for (int j = 0; j < d1.cols(); ++j) d1(i, j) = stream.next();
        ball_scale(d1, rho1, s);
        const double perturbed =
            ((v + d1.leftCols(n)) * g - (kvec + d1.col(n))).norm();
        rep.max_sampled_residual = std::max(rep.max_sampled_residual, perturbed);
        if (perturbed > rep.closed_form_residual + 1e-10) ++rep.violations_residual;

        Mat dy(pn, n);
        for (int i = 0; i < dy.rows(); ++i)
            for (int j = 0; j < dy.cols(); ++j) dy(i, j) = stream.next();
        ball_scale(dy, rho2 / sqrt_q, s);
        const double perturbed_y = sqrt_q * ((y_future + dy) * g - reference).norm();
        rep.max_sampled_tracking = std::max(rep.max_sampled_tracking, perturbed_y);
        if (perturbed_y > rep.closed_form_tracking + 1e-10) ++rep.violations_tracking;
    }

    // rank-one construction attaining the supremum of Eq. (17)
    Vec omega = nominal_res;
    if (omega.norm() > 0.0)
        omega /= omega.norm();
    else {
        omega = Vec::Zero(n);
        omega(0) = 1.0;
    }
    const double denom = std::sqrt(g.squaredNorm() + 1.0);
    const Mat dk_hat = (rho1 / denom) * omega * g.transpose();
    const Vec dk_vec = -(rho1 / denom) * omega;
    rep.attained_residual = ((v + dk_hat) * g - (kvec + dk_vec)).norm();

    // analogous construction for Eq. (18)
    Vec omega_y = nominal_track;
    if (omega_y.norm() > 0.0)
        omega_y /= omega_y.norm();
    else {
        omega_y = Vec::Zero(pn);
        omega_y(0) = 1.0;
    }
    const double g_norm = g.norm();
    if (g_norm > 0.0) {
        const Mat dy_hat = (rho2 / (sqrt_q * g_norm)) * omega_y * g.transpose();
        rep.attained_tracking = sqrt_q * ((y_future + dy_hat) * g - reference).norm();
    } else {
        rep.attained_tracking = sqrt_q * nominal_track.norm();
    }
    return rep;
}

// --- dense QP helper --------------------------------------------------------

namespace detail {

Vec solve_qp(const Eigen::LLT<Mat>& p_llt, const Vec& c, const Mat& a_eq, const Vec& b_eq,
             const Mat& a_in, const Vec& b_in) {
    const int n_eq = static_cast<int>(a_eq.rows());
    const int n_in = static_cast<int>(a_in.rows());
    const Vec wc = p_llt.solve(c);
    if (n_eq == 0 && n_in == 0) return wc;

    Mat w_eq(wc.size(), n_eq), w_in(wc.size(), n_in);
    if (n_eq > 0) w_eq = p_llt.solve(a_eq.transpose());
    if (n_in > 0) w_in = p_llt.solve(a_in.transpose());

    Eigen::LDLT<Mat> s_ldlt;
    Mat g_eq_in;
    if (n_eq > 0) {
        s_ldlt.compute(a_eq * w_eq);
        if (n_in > 0) g_eq_in = a_eq * w_in;
    }
    Mat g_in_in, g_in_eq;
    Vec diag_in;
    if (n_in > 0) {
        g_in_in = a_in * w_in;
        diag_in = g_in_in.diagonal();
        if (n_eq > 0) g_in_eq = a_in * w_eq;
    }

    Vec nu = Vec::Zero(n_eq), mu = Vec::Zero(n_in);
    const Vec r_eq0 = n_eq > 0 ? Vec(a_eq * wc - b_eq) : Vec(0);
    const Vec r_in0 = n_in > 0 ? Vec(a_in * wc - b_in) : Vec(0);

    const double scale_in = n_in > 0 ? 1.0 + b_in.cwiseAbs().maxCoeff() : 1.0;
    const double scale_eq = n_eq > 0 ? 1.0 + b_eq.cwiseAbs().maxCoeff() : 1.0;
    constexpr int kMaxSweeps = 200000;

    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        if (n_eq > 0) nu = s_ldlt.solve(2.0 * r_eq0 - (n_in > 0 ? Vec(g_eq_in * mu) : Vec(Vec::Zero(n_eq))));
        if (n_in == 0) break;

        Vec slack = r_in0;
        if (n_eq > 0) slack -= 0.5 * g_in_eq * nu;
        slack -= 0.5 * g_in_in * mu;

        double max_change = 0.0;
        for (int i = 0; i < n_in; ++i) {
            if (diag_in(i) <= 0.0) continue;  // degenerate row
            const double target = std::max(0.0, mu(i) + 2.0 * slack(i) / diag_in(i));
            const double delta = target - mu(i);
            if (delta != 0.0) {
                mu(i) = target;
                slack -= 0.5 * delta * g_in_in.col(i);
                max_change = std::max(max_change, std::abs(delta));
            }
        }

        const double viol = slack.maxCoeff();
        const double comp = mu.cwiseProduct(slack).cwiseAbs().maxCoeff();
        if (viol < 1e-10 * scale_in && comp < 1e-10 * scale_in * (1.0 + mu.maxCoeff()) &&
            max_change < 1e-12 * (1.0 + mu.maxCoeff()))
            break;
        if (mu.maxCoeff() > 1e14)
            throw InfeasibleError("solve_qp: dual divergence; inequality system is infeasible");
    }

    Vec g = wc;
    if (n_eq > 0) g -= 0.5 * w_eq * nu;
    if (n_in > 0) g -= 0.5 * w_in * mu;

    if (n_eq > 0 && (a_eq * g - b_eq).norm() > 1e-6 * scale_eq)
        throw InfeasibleError("solve_qp: equality constraints are inconsistent");
    if (n_in > 0 && (a_in * g - b_in).maxCoeff() > 1e-6 * scale_in)
        throw InfeasibleError("solve_qp: inequality constraints could not be satisfied");
    return g;
}

}  // namespace detail

// --- block-coordinate RoKDeePC solver ----------------------------------------

KernelController::KernelController(std::shared_ptr<const KernelPredictorModel> model,
                                   ControlProblem problem, std::string name)
    : model_(std::move(model)),
      problem_(std::move(problem)),
      name_(std::move(name)),
      l_u_(input_cost_matrix(problem_.cost, model_->dims().m, model_->dims().horizon)),
      g_solver_(*model_, problem_.cost, problem_.robust) {
    problem_.cost.validate();
    problem_.robust.validate();
    problem_.gd.validate();
    if (problem_.u_box.lower.size() > 0) {
        problem_.u_box.validate();
        if (problem_.u_box.lower.size() != model_->dims().u_len())
            throw DimensionError("controller: u box must have m*horizon entries");
    }
    if (problem_.y_box.lower.size() > 0) {
        problem_.y_box.validate();
        if (problem_.y_box.lower.size() != model_->dims().y_len())
            throw DimensionError("controller: y box must have p*horizon entries");
    }
}

SolveResult KernelController::solve(const InitialWindow& window) {
    return solve(window, problem_.cost.reference);
}

SolveResult KernelController::solve(const InitialWindow& window, const Vec& reference) {
    const Dims d = model_->dims();
    if (reference.size() != d.y_len())
        throw DimensionError("controller: reference length must be p*horizon");
    const auto& gd = problem_.gd;
    const auto& robust = problem_.robust;
    const double lkp = robust.lambda_k_prime;
    const Mat& yf = model_->y_future();

    Vec u = Vec::Zero(d.u_len());
    if (gd.warm_start && prev_u_) {
        const int shift = std::min(problem_.control_horizon * d.m, d.u_len());
        u.head(d.u_len() - shift) = prev_u_->tail(d.u_len() - shift);
        for (int off = d.u_len() - shift; off < d.u_len(); off += d.m)
            u.segment(off, d.m) = prev_u_->tail(d.m);
    }
    u = project_box(u, problem_.u_box);

    Vec g = Vec::Zero(model_->center_count());
    Vec vg = Vec::Zero(model_->center_count());
    Vec k_u = model_->kvec(window, u);

    auto cost_quad = [&](const Vec& uu, const Vec& kk, const Vec& gg, const Vec& vgg) {
        const double track2 = problem_.cost.q_y * (yf * gg - reference).squaredNorm();
        return input_cost(problem_.cost, uu, d.m) + track2 +
               robust.lambda_g * gg.squaredNorm() + lkp * (vgg - kk).squaredNorm();
    };

    SolveResult result;
    result.cost_trace.push_back(cost_quad(u, k_u, g, vg));

    const bool y_constrained = problem_.y_box.bounded();
    double margin = 0.0;
    if (y_constrained) {
        const double rho2 = robust.pin_rho2 ? robust.pinned_rho : 0.0;
        const double b_g = robust.g_norm_bound.value_or(0.0);  // refined after first update
        margin = problem_.cost.q_y > 0.0 ? rho2 * b_g / std::sqrt(problem_.cost.q_y) : 0.0;
    }

    int iter = 0;
    for (iter = 1; iter <= gd.i_max; ++iter) {
        // Step 2: projected gradient step on u at fixed g
        const Vec query = model_->query(window, u);
        const Mat jac = kernel_jacobian_u(model_->spec(), model_->centers(), query, d);
        const Vec grad = 2.0 * l_u_ * u - 2.0 * lkp * jac.transpose() * (vg - k_u);

        const double f_cur = input_cost(problem_.cost, u, d.m) + lkp * (vg - k_u).squaredNorm();
        Vec u_next;
        Vec k_next;
        if (gd.backtracking) {
            double step = gd.alpha;
            bool accepted = false;
            for (int h = 0; h < 60; ++h) {
                Vec cand = project_box(u - step * grad, problem_.u_box);
                Vec k_cand = model_->kvec(window, cand);
                const double f_cand =
                    input_cost(problem_.cost, cand, d.m) + lkp * (vg - k_cand).squaredNorm();
                const double slope = grad.dot(cand - u);
                if (f_cand <= f_cur + 1e-4 * slope) {
                    u_next = std::move(cand);
                    k_next = std::move(k_cand);
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if (!accepted) {  // no admissible step; keep u
                u_next = u;
                k_next = k_u;
            }
        } else {
            u_next = project_box(u - gd.alpha * grad, problem_.u_box);
            k_next = model_->kvec(window, u_next);
        }

        // Step 3: closed-form g, falling back to the constrained QP
        QuadraticGSolver::Update upd = g_solver_.solve(k_next, reference);
        if (y_constrained) {
            if (!robust.g_norm_bound) {
                const double rho2 = robust.pin_rho2 ? robust.pinned_rho : 0.0;
                margin = problem_.cost.q_y > 0.0
                             ? rho2 * 2.0 * upd.g.norm() / std::sqrt(problem_.cost.q_y)
                             : 0.0;
            }
            Vec y_pred = yf * upd.g;
            BoxSet shrunk = problem_.y_box;
            shrunk.lower.array() += margin;
            shrunk.upper.array() -= margin;
            if (!shrunk.contains(y_pred))
                upd = g_solver_.solve_constrained(k_next, reference, problem_.y_box, margin);
        }

        u = std::move(u_next);
        k_u = std::move(k_next);
        g = std::move(upd.g);
        vg = std::move(upd.vg);

        const double c_now = cost_quad(u, k_u, g, vg);
        if (!std::isfinite(c_now))
            throw SolverError("rokdeepc_solve: cost diverged to non-finite values; reduce the "
                              "step size alpha or enable backtracking");
        const double c_prev = result.cost_trace.back();
        result.cost_trace.push_back(c_now);
        if (std::abs(c_now - c_prev) < gd.xi) {
            result.converged = true;
            break;
        }
    }

    result.iterations = std::min(iter, gd.i_max);
    result.u_star = u;
    result.g_star = g;
    prev_u_ = u;

    CostSpec cost_with_ref = problem_.cost;
    cost_with_ref.reference = reference;
    result.equivalent = equivalent_params(*model_, cost_with_ref, robust, window, u, g,
                                          robust.pin_rho2, robust.pinned_rho);
    result.kkt_residual =
        kkt_residual_socp(*model_, cost_with_ref, result.equivalent, window, u, g);
    return result;
}

SolveResult rokdeepc_solve(std::shared_ptr<const KernelPredictorModel> model,
                           const ControlProblem& problem, const InitialWindow& window) {
    KernelController controller(std::move(model), problem, "rokdeepc");
    return controller.solve(window, problem.cost.reference);
}

SolveResult kernel_mpc_solve(std::shared_ptr<const KernelPredictorModel> model,
                             ControlProblem problem, const InitialWindow& window) {
    problem.robust.lambda_g = 1e-9;
    KernelController controller(std::move(model), problem, "kernel_mpc");
    return controller.solve(window, problem.cost.reference);
}

std::unique_ptr<KernelController> make_kernel_mpc_controller(
    std::shared_ptr<const KernelPredictorModel> model, ControlProblem problem, std::string name) {
    problem.robust.lambda_g = 1e-9;
    return std::make_unique<KernelController>(std::move(model), std::move(problem),
                                              std::move(name));
}

// --- DeePC baseline ----------------------------------------------------------

DeepcController::DeepcController(HankelPartition data, CostSpec cost, DeepcConfig config,
                                 BoxSet u_box, BoxSet y_box)
    : data_(std::move(data)),
      cost_(std::move(cost)),
      config_(config),
      u_box_(std::move(u_box)),
      y_box_(std::move(y_box)) {
    cost_.validate();
    const int n = data_.cols();
    const Mat l = input_cost_matrix(cost_, data_.dims.m, data_.dims.horizon);
    p_ = data_.u_future.transpose() * l * data_.u_future +
         cost_.q_y * data_.y_future.transpose() * data_.y_future +
         config_.lambda_g * Mat::Identity(n, n) +
         config_.lambda_y * data_.y_past.transpose() * data_.y_past;
    p_llt_.compute(p_);
    if (p_llt_.info() != Eigen::Success)
        throw SolverError("deepc: reduced quadratic form not positive definite");
    p_inv_up_t_ = p_llt_.solve(data_.u_past.transpose());
    schur_ldlt_.compute(data_.u_past * p_inv_up_t_);
}

SolveResult DeepcController::solve(const InitialWindow& window, const Vec& reference) {
    const Dims d = data_.dims;
    if (reference.size() != d.y_len())
        throw DimensionError("deepc: reference length must be p*horizon");
    if (window.u_ini.size() != d.m * d.t_ini || window.y_ini.size() != d.p * d.t_ini)
        throw DimensionError("deepc: window size mismatch");

    const Vec c = cost_.q_y * data_.y_future.transpose() * reference +
                  config_.lambda_y * data_.y_past.transpose() * window.y_ini;

    Vec g;
    const bool boxes = u_box_.bounded() || y_box_.bounded();
    if (!boxes) {
        const Vec wc = p_llt_.solve(c);
        const Vec nu = schur_ldlt_.solve(data_.u_past * wc - window.u_ini);
        g = wc - p_inv_up_t_ * nu;
        if ((data_.u_past * g - window.u_ini).norm() > 1e-6 * (1.0 + window.u_ini.norm()))
            throw InfeasibleError("deepc: equality constraints U_P g = u_ini are inconsistent");
    } else {
        std::vector<Eigen::Index> rows;
        Mat a_in(0, data_.cols());
        Vec b_in(0);
        auto append_box = [&](const Mat& map, const BoxSet& box) {
            if (!box.bounded()) return;
            for (Eigen::Index i = 0; i < map.rows(); ++i) {
                if (std::isfinite(box.upper(i))) {
                    a_in.conservativeResize(a_in.rows() + 1, Eigen::NoChange);
                    a_in.row(a_in.rows() - 1) = map.row(i);
                    b_in.conservativeResize(b_in.size() + 1);
                    b_in(b_in.size() - 1) = box.upper(i);
                }
                if (std::isfinite(box.lower(i))) {
                    a_in.conservativeResize(a_in.rows() + 1, Eigen::NoChange);
                    a_in.row(a_in.rows() - 1) = -map.row(i);
                    b_in.conservativeResize(b_in.size() + 1);
                    b_in(b_in.size() - 1) = -box.lower(i);
                }
            }
        };
        append_box(data_.u_future, u_box_);
        append_box(data_.y_future, y_box_);
        g = detail::solve_qp(p_llt_, c, data_.u_past, window.u_ini, a_in, b_in);
    }

    SolveResult result;
    result.g_star = g;
    result.u_star = data_.u_future * g;
    result.iterations = 1;
    result.converged = true;
    const double objective = input_cost(cost_, result.u_star, d.m) +
                             cost_.q_y * (data_.y_future * g - reference).squaredNorm() +
                             config_.lambda_g * g.squaredNorm() +
                             config_.lambda_y * (data_.y_past * g - window.y_ini).squaredNorm();
    result.cost_trace.push_back(objective);
    return result;
}

SolveResult deepc_solve(const HankelPartition& data, const CostSpec& cost,
                        const DeepcConfig& config, const BoxSet& u_box, const BoxSet& y_box,
                        const InitialWindow& window) {
    DeepcController controller(data, cost, config, u_box, y_box);
    return controller.solve(window, cost.reference);
}

// --- Koopman MPC baseline ------------------------------------------------------

KoopmanMpcController::KoopmanMpcController(std::shared_ptr<const KoopmanModel> model,
                                           CostSpec cost, GDConfig gd, BoxSet u_box)
    : model_(std::move(model)), cost_(std::move(cost)), gd_(gd), u_box_(std::move(u_box)) {
    cost_.validate();
    gd_.validate();
    const Dims d = model_->dims();
    const int nz = model_->dictionary().lifted_dim();
    const Mat& a = model_->a_lift();
    const Mat& b = model_->b_lift();
    const Mat& c = model_->c_lift();

    phi_.resize(d.y_len(), nz);
    gamma_ = Mat::Zero(d.y_len(), d.u_len());
    Mat a_pow = a;  // A^{t+1} for output step t
    std::vector<Mat> cab(d.horizon);
    cab[0] = c * b;
    Mat apb = b;
    for (int j = 1; j < d.horizon; ++j) {
        apb = a * apb;  // A^j B
        cab[j] = c * apb;
    }
    for (int t = 0; t < d.horizon; ++t) {
        phi_.middleRows(t * d.p, d.p) = c * a_pow;
        a_pow = a * a_pow;
        for (int i = 0; i <= t; ++i)
            gamma_.block(t * d.p, i * d.m, d.p, d.m) = cab[t - i];
    }
    hess_ = input_cost_matrix(cost_, d.m, d.horizon) + cost_.q_y * gamma_.transpose() * gamma_;
    hess_llt_.compute(hess_);
    if (hess_llt_.info() != Eigen::Success)
        throw SolverError("koopman_mpc: condensed Hessian not positive definite (r_u > 0 "
                          "required)");
}

SolveResult KoopmanMpcController::solve(const InitialWindow& window, const Vec& reference) {
    const Dims d = model_->dims();
    if (reference.size() != d.y_len())
        throw DimensionError("koopman_mpc: reference length must be p*horizon");
    const Vec z0 = model_->lift_window(window);
    const Vec y_free = phi_ * z0;
    const Vec b = cost_.q_y * gamma_.transpose() * (reference - y_free);

    auto objective = [&](const Vec& uu) {
        return input_cost(cost_, uu, d.m) +
               cost_.q_y * (y_free + gamma_ * uu - reference).squaredNorm();
    };

    SolveResult result;
    Vec u = hess_llt_.solve(b);
    if (!u_box_.bounded() || u_box_.contains(u)) {
        result.u_star = u;
        result.iterations = 1;
        result.converged = true;
        result.cost_trace.push_back(objective(u));
        return result;
    }

    // projected gradient on the condensed form
    u = project_box(u, u_box_);
    result.cost_trace.push_back(objective(u));
    int iter = 0;
    for (iter = 1; iter <= gd_.i_max; ++iter) {
        const Vec grad = 2.0 * (hess_ * u - b);
        Vec u_next;
        if (gd_.backtracking) {
            double step = gd_.alpha;
            bool accepted = false;
            const double f_cur = result.cost_trace.back();
            for (int h = 0; h < 60; ++h) {
                Vec cand = project_box(u - step * grad, u_box_);
                if (objective(cand) <= f_cur + 1e-4 * grad.dot(cand - u)) {
                    u_next = std::move(cand);
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if (!accepted) u_next = u;
        } else {
            u_next = project_box(u - gd_.alpha * grad, u_box_);
        }
        u = std::move(u_next);
        const double c_now = objective(u);
        if (!std::isfinite(c_now))
            throw SolverError("koopman_mpc: cost diverged; reduce the step size alpha");
        const double c_prev = result.cost_trace.back();
        result.cost_trace.push_back(c_now);
        if (std::abs(c_now - c_prev) < gd_.xi) {
            result.converged = true;
            break;
        }
    }
    result.iterations = std::min(iter, gd_.i_max);
    result.u_star = u;
    return result;
}

SolveResult koopman_mpc_solve(std::shared_ptr<const KoopmanModel> model, const CostSpec& cost,
                              const GDConfig& gd, const BoxSet& u_box, const InitialWindow& window,
                              const Vec& reference) {
    KoopmanMpcController controller(std::move(model), cost, gd, u_box);
    return controller.solve(window, reference);
}

}  // namespace rokdeepc
