#include "rokdeepc/predict.hpp"

#include <Eigen/SVD>
#include <cmath>

#include "rokdeepc/plant.hpp"

namespace rokdeepc {

namespace {

Mat pseudo_inverse(const Mat& a) {
    Eigen::JacobiSVD<Mat> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0 || sv(0) == 0.0) return Mat::Zero(a.cols(), a.rows());
    const double tol = std::max<Eigen::Index>(a.rows(), a.cols()) * sv(0) *
                       std::numeric_limits<double>::epsilon();
    Vec inv = Vec::Zero(sv.size());
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > tol) inv(i) = 1.0 / sv(i);
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

Vec stack_query(const Dims& d, const InitialWindow& window, const Vec& u) {
    if (window.u_ini.size() != d.m * d.t_ini || window.y_ini.size() != d.p * d.t_ini)
        throw DimensionError("predict: initial window size does not match model dims");
    if (u.size() != d.u_len())
        throw DimensionError("predict: input length " + std::to_string(u.size()) +
                             " does not match m*horizon = " + std::to_string(d.u_len()));
    Vec q(d.regressor_len());
    q << window.u_ini, window.y_ini, u;
    return q;
}

}  // namespace

LinearPredictorModel::LinearPredictorModel(Mat coeff, Dims dims)
    : coeff_(std::move(coeff)), dims_(dims) {
    dims_.validate();
    if (coeff_.rows() != dims_.y_len() || coeff_.cols() != dims_.regressor_len())
        throw DimensionError("LinearPredictorModel: coefficient matrix must be p*horizon x "
                             "regressor_len");
}

Vec LinearPredictorModel::predict(const InitialWindow& window, const Vec& u) const {
    return coeff_ * stack_query(dims_, window, u);
}

LinearPredictorModel fit_linear(const HankelPartition& part) {
    Mat z(part.dims.past_len() + part.dims.u_len(), part.cols());
    z << part.u_past, part.y_past, part.u_future;
    Mat coeff = part.y_future * pseudo_inverse(z);
    return LinearPredictorModel(std::move(coeff), part.dims);
}

Vec predict_linear(const LinearPredictorModel& model, const InitialWindow& window, const Vec& u) {
    return model.predict(window, u);
}

KernelPredictorModel::KernelPredictorModel(KernelSpec spec, CenterSet centers, Mat y_future,
                                           double gamma, GramMatrix gram)
    : spec_(std::move(spec)),
      centers_(std::move(centers)),
      y_future_(std::move(y_future)),
      gamma_(gamma),
      source_(gram.source) {
    if (gamma_ <= 0.0) throw ConfigError("KernelPredictorModel: gamma must be > 0");
    const int n = centers_.count();
    if (gram.k.rows() != n || gram.k.cols() != n)
        throw DimensionError("KernelPredictorModel: Gram size does not match center count");
    if (y_future_.cols() != n || y_future_.rows() != centers_.dims.y_len())
        throw DimensionError("KernelPredictorModel: Y_F must be p*horizon x H_c");

    v_ = gram.k + gamma_ * Mat::Identity(n, n);
    llt_.compute(v_);
    if (llt_.info() != Eigen::Success) {
        // gamma > 0 should make this unreachable; retry once with jitter
        const double jitter = 1e-12 * v_.trace() / n;
        v_.diagonal().array() += jitter;
        llt_.compute(v_);
        if (llt_.info() != Eigen::Success)
            throw SolverError("fit_kernel: Cholesky factorization of K + gamma I failed even "
                              "after jitter retry");
    }
    w_ = llt_.solve(y_future_.transpose()).transpose();
}

Vec KernelPredictorModel::query(const InitialWindow& window, const Vec& u) const {
    return stack_query(centers_.dims, window, u);
}

Vec KernelPredictorModel::kvec(const InitialWindow& window, const Vec& u) const {
    return kernel_vector(spec_, centers_, query(window, u));
}

Vec KernelPredictorModel::predict(const InitialWindow& window, const Vec& u) const {
    return w_ * kvec(window, u);
}

KernelPredictorModel fit_kernel(const HankelPartition& part, const KernelSpec& spec, double gamma,
                                GramMatrix::Source source) {
    CenterSet centers;
    centers.dims = part.dims;
    centers.centers.resize(part.dims.regressor_len(), part.cols());
    for (int j = 0; j < part.cols(); ++j) centers.centers.col(j) = column_sample(part, j);
    GramMatrix k = gram(spec, centers, source);
    return KernelPredictorModel(spec, std::move(centers), part.y_future, gamma, std::move(k));
}

Vec predict_kernel(const KernelPredictorModel& model, const InitialWindow& window, const Vec& u) {
    return model.predict(window, u);
}

KoopmanDictionary KoopmanDictionary::identity(int state_dim) {
    KoopmanDictionary d;
    d.kind = Kind::identity;
    d.state_dim = state_dim;
    return d;
}

KoopmanDictionary KoopmanDictionary::poly_tps(int state_dim, const Mat& centers) {
    if (centers.rows() != state_dim)
        throw DimensionError("KoopmanDictionary: center rows must equal state_dim");
    KoopmanDictionary d;
    d.kind = Kind::poly_tps;
    d.state_dim = state_dim;
    d.tps_centers = centers;
    return d;
}

KoopmanDictionary KoopmanDictionary::poly_tps_random(int state_dim, int n_rbf, double box,
                                                     std::uint64_t seed) {
    Mat centers(state_dim, n_rbf);
    for (int j = 0; j < n_rbf; ++j)
        for (int i = 0; i < state_dim; ++i)
            centers(i, j) =
                box * (2.0 * GaussianStream::uniform(seed, static_cast<std::uint64_t>(
                                                               j * state_dim + i)) -
                       1.0);
    return poly_tps(state_dim, centers);
}

int KoopmanDictionary::lifted_dim() const {
    if (kind == Kind::identity) return state_dim;
    const int quad = state_dim * (state_dim + 1) / 2;
    return 1 + state_dim + quad + static_cast<int>(tps_centers.cols());
}

int KoopmanDictionary::state_coord_index(int i) const {
    if (i < 0 || i >= state_dim)
        throw DimensionError("KoopmanDictionary: state coordinate out of range");
    return kind == Kind::identity ? i : 1 + i;
}

Vec KoopmanDictionary::lift(const Vec& x) const {
    if (x.size() != state_dim)
        throw DimensionError("KoopmanDictionary: state length does not match state_dim");
    if (kind == Kind::identity) return x;

    Vec z(lifted_dim());
    int idx = 0;
    z(idx++) = 1.0;
    for (int i = 0; i < state_dim; ++i) z(idx++) = x(i);
    for (int i = 0; i < state_dim; ++i)
        for (int j = i; j < state_dim; ++j) z(idx++) = x(i) * x(j);
    for (int c = 0; c < tps_centers.cols(); ++c) {
        const double r2 = (x - tps_centers.col(c)).squaredNorm();
        // continuous limit at the center removes the log singularity
        z(idx++) = r2 > 0.0 ? r2 * 0.5 * std::log(r2) : 0.0;
    }
    return z;
}

KoopmanModel::KoopmanModel(KoopmanDictionary dict, Mat a_lift, Mat b_lift, Mat c_lift, Dims dims)
    : dict_(std::move(dict)),
      a_(std::move(a_lift)),
      b_(std::move(b_lift)),
      c_(std::move(c_lift)),
      dims_(dims) {
    dims_.validate();
    const int nz = dict_.lifted_dim();
    if (a_.rows() != nz || a_.cols() != nz)
        throw DimensionError("KoopmanModel: A_lift must be square with the dictionary size");
    if (b_.rows() != nz || b_.cols() != dims_.m)
        throw DimensionError("KoopmanModel: B_lift must be lifted_dim x m");
    if (c_.rows() != dims_.p || c_.cols() != nz)
        throw DimensionError("KoopmanModel: C_lift must be p x lifted_dim");
}

void KoopmanModel::set_c_lift(Mat c) {
    if (c.rows() != dims_.p || c.cols() != dict_.lifted_dim())
        throw DimensionError("KoopmanModel: C_lift must be p x lifted_dim");
    c_ = std::move(c);
}

Vec KoopmanModel::lift_window(const InitialWindow& window) const {
    Vec x(window.u_ini.size() + window.y_ini.size());
    x << window.u_ini, window.y_ini;
    return dict_.lift(x);
}

Vec KoopmanModel::predict(const InitialWindow& window, const Vec& u) const {
    if (u.size() % dims_.m != 0)
        throw DimensionError("KoopmanModel: input length must be a multiple of m");
    const int steps = static_cast<int>(u.size()) / dims_.m;
    Vec z = lift_window(window);
    Vec y(dims_.p * steps);
    for (int t = 0; t < steps; ++t) {
        z = a_ * z + b_ * u.segment(t * dims_.m, dims_.m);
        y.segment(t * dims_.p, dims_.p) = c_ * z;
    }
    return y;
}

KoopmanModel fit_koopman(const Mat& states, const Mat& inputs, const Mat& next_states,
                         const KoopmanDictionary& dict, const Dims& dims) {
    const int n_samples = static_cast<int>(states.cols());
    if (inputs.cols() != n_samples || next_states.cols() != n_samples)
        throw DimensionError("fit_koopman: sample counts differ");
    if (n_samples < 1) throw DimensionError("fit_koopman: no samples");
    if (states.rows() != dict.state_dim || next_states.rows() != dict.state_dim)
        throw DimensionError("fit_koopman: state rows do not match dictionary state_dim");

    const int nz = dict.lifted_dim();
    const int m = static_cast<int>(inputs.rows());
    Mat z(nz, n_samples), z_next(nz, n_samples);
    for (int j = 0; j < n_samples; ++j) {
        z.col(j) = dict.lift(states.col(j));
        z_next.col(j) = dict.lift(next_states.col(j));
    }
    Mat regressor(nz + m, n_samples);
    regressor << z, inputs;
    Mat ab = z_next * pseudo_inverse(regressor);

    // read the freshest output block straight out of the lifted next state
    Mat c = Mat::Zero(dims.p, nz);
    const int y_tail_start = dims.m * dims.t_ini + dims.p * (dims.t_ini - 1);
    for (int i = 0; i < dims.p; ++i)
        c(i, dict.state_coord_index(y_tail_start + i)) = 1.0;

    return KoopmanModel(dict, ab.leftCols(nz), ab.rightCols(m), std::move(c), dims);
}

KoopmanSamples koopman_samples(const SignalTrajectory& traj, int t_ini) {
    const int t_len = traj.length();
    if (t_len < t_ini + 2)
        throw DimensionError("koopman_samples: trajectory too short for the window length");
    const int m = traj.m(), p = traj.p();
    const int n = t_len - t_ini - 1;  // transitions (x_t, u_t) -> x_{t+1}
    KoopmanSamples s;
    s.states.resize((m + p) * t_ini, n);
    s.next_states.resize((m + p) * t_ini, n);
    s.inputs.resize(m, n);
    for (int j = 0; j < n; ++j) {
        const int t = j + t_ini;  // current time; window covers t-t_ini..t-1
        for (int w = 0; w < t_ini; ++w) {
            s.states.block(w * m, j, m, 1) = traj.inputs.col(t - t_ini + w);
            s.states.block(m * t_ini + w * p, j, p, 1) = traj.outputs.col(t - t_ini + w);
            s.next_states.block(w * m, j, m, 1) = traj.inputs.col(t + 1 - t_ini + w);
            s.next_states.block(m * t_ini + w * p, j, p, 1) = traj.outputs.col(t + 1 - t_ini + w);
        }
        s.inputs.col(j) = traj.inputs.col(t);
    }
    return s;
}

Vec rollout(const Predictor& predictor, const InitialWindow& window, const Vec& u_long) {
    const Dims d = predictor.dims();
    if (u_long.size() % d.u_len() != 0)
        throw DimensionError("rollout: input length must be a multiple of m*horizon");
    const int n_blocks = static_cast<int>(u_long.size()) / d.u_len();

    // running histories, trailing t_ini samples form the next window
    Mat u_hist(d.m, d.t_ini);
    Mat y_hist(d.p, d.t_ini);
    for (int w = 0; w < d.t_ini; ++w) {
        u_hist.col(w) = window.u_ini.segment(w * d.m, d.m);
        y_hist.col(w) = window.y_ini.segment(w * d.p, d.p);
    }

    Vec y_long(d.y_len() * n_blocks);
    InitialWindow win = window;
    for (int b = 0; b < n_blocks; ++b) {
        const Vec u_block = u_long.segment(b * d.u_len(), d.u_len());
        const Vec y_block = predictor.predict(win, u_block);
        y_long.segment(b * d.y_len(), d.y_len()) = y_block;

        Mat u_new(d.m, d.t_ini + d.horizon), y_new(d.p, d.t_ini + d.horizon);
        u_new << u_hist, Eigen::Map<const Mat>(u_block.data(), d.m, d.horizon);
        y_new << y_hist, Eigen::Map<const Mat>(y_block.data(), d.p, d.horizon);
        u_hist = u_new.rightCols(d.t_ini);
        y_hist = y_new.rightCols(d.t_ini);
        win.u_ini = Eigen::Map<const Vec>(u_hist.data(), d.m * d.t_ini);
        win.y_ini = Eigen::Map<const Vec>(y_hist.data(), d.p * d.t_ini);
    }
    return y_long;
}

double prediction_error(const Vec& predicted, const Vec& actual) {
    if (predicted.size() != actual.size())
        throw DimensionError("prediction_error: length mismatch");
    return (predicted - actual).squaredNorm();
}

namespace {

nlohmann::json mat_to_json(const Mat& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Mat mat_from_json(const nlohmann::json& j) {
    const auto rows = j.size();
    if (rows == 0) return Mat(0, 0);
    const auto cols = j.at(0).size();
    Mat m(rows, cols);
    for (size_t i = 0; i < rows; ++i)
        for (size_t c = 0; c < cols; ++c) m(i, c) = j.at(i).at(c).get<double>();
    return m;
}

nlohmann::json dims_to_json(const Dims& d) {
    return {{"m", d.m}, {"p", d.p}, {"t_ini", d.t_ini}, {"horizon", d.horizon}};
}

Dims dims_from_json(const nlohmann::json& j) {
    return Dims{j.at("m").get<int>(), j.at("p").get<int>(), j.at("t_ini").get<int>(),
                j.at("horizon").get<int>()};
}

nlohmann::json spec_to_json(const KernelSpec& s) {
    return {{"kind", s.name()},          {"offset", s.offset},
            {"degree", s.degree},        {"two_sigma_sq", s.two_sigma_sq},
            {"scale", s.scale},          {"u_len", s.u_len}};
}

KernelSpec spec_from_json(const nlohmann::json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "polynomial")
        return KernelSpec::polynomial(j.at("offset").get<double>(), j.at("degree").get<int>());
    if (kind == "gaussian") return KernelSpec::gaussian(j.at("two_sigma_sq").get<double>());
    if (kind == "exponential") return KernelSpec::exponential(j.at("scale").get<double>());
    if (kind == "hybrid")
        return KernelSpec::hybrid(j.at("two_sigma_sq").get<double>(), j.at("u_len").get<int>());
    throw ParseError("kernel spec: unknown kind '" + kind + "'");
}

}  // namespace

nlohmann::json to_json(const LinearPredictorModel& model) {
    return {{"type", "linear"},
            {"dims", dims_to_json(model.dims())},
            {"coeff", mat_to_json(model.coeff())}};
}

LinearPredictorModel linear_from_json(const nlohmann::json& j) {
    return LinearPredictorModel(mat_from_json(j.at("coeff")), dims_from_json(j.at("dims")));
}

nlohmann::json to_json(const KernelPredictorModel& model) {
    return {{"type", "kernel"},
            {"dims", dims_to_json(model.dims())},
            {"spec", spec_to_json(model.spec())},
            {"gamma", model.gamma()},
            {"source", model.source() == GramMatrix::Source::perfect ? "perfect" : "noisy"},
            {"centers", mat_to_json(model.centers().centers)},
            {"y_future", mat_to_json(model.y_future())}};
}

KernelPredictorModel kernel_from_json(const nlohmann::json& j) {
    CenterSet centers;
    centers.dims = dims_from_json(j.at("dims"));
    centers.centers = mat_from_json(j.at("centers"));
    const KernelSpec spec = spec_from_json(j.at("spec"));
    const auto source = j.at("source").get<std::string>() == "perfect"
                            ? GramMatrix::Source::perfect
                            : GramMatrix::Source::noisy;
    GramMatrix g = gram(spec, centers, source);
    return KernelPredictorModel(spec, std::move(centers), mat_from_json(j.at("y_future")),
                                j.at("gamma").get<double>(), std::move(g));
}

nlohmann::json to_json(const KoopmanModel& model) {
    const auto& dict = model.dictionary();
    return {{"type", "koopman"},
            {"dims", dims_to_json(model.dims())},
            {"dict_kind", dict.kind == KoopmanDictionary::Kind::identity ? "identity" : "poly_tps"},
            {"state_dim", dict.state_dim},
            {"tps_centers", mat_to_json(dict.tps_centers)},
            {"a_lift", mat_to_json(model.a_lift())},
            {"b_lift", mat_to_json(model.b_lift())},
            {"c_lift", mat_to_json(model.c_lift())}};
}

KoopmanModel koopman_from_json(const nlohmann::json& j) {
    const int state_dim = j.at("state_dim").get<int>();
    KoopmanDictionary dict =
        j.at("dict_kind").get<std::string>() == "identity"
            ? KoopmanDictionary::identity(state_dim)
            : KoopmanDictionary::poly_tps(state_dim, mat_from_json(j.at("tps_centers")));
    return KoopmanModel(std::move(dict), mat_from_json(j.at("a_lift")),
                        mat_from_json(j.at("b_lift")), mat_from_json(j.at("c_lift")),
                        dims_from_json(j.at("dims")));
}

}  // namespace rokdeepc
