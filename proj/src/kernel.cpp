#include "rokdeepc/kernel.hpp"

#include <cmath>

namespace rokdeepc {

KernelSpec KernelSpec::polynomial(double c, int d) {
    KernelSpec s;
    s.kind = Kind::polynomial;
    s.offset = c;
    s.degree = d;
    s.validate();
    return s;
}

KernelSpec KernelSpec::gaussian(double two_sigma_sq) {
    KernelSpec s;
    s.kind = Kind::gaussian;
    s.two_sigma_sq = two_sigma_sq;
    s.validate();
    return s;
}

KernelSpec KernelSpec::exponential(double scale) {
    KernelSpec s;
    s.kind = Kind::exponential;
    s.scale = scale;
    s.validate();
    return s;
}

KernelSpec KernelSpec::hybrid(double two_sigma_sq, int u_len) {
    KernelSpec s;
    s.kind = Kind::hybrid;
    s.two_sigma_sq = two_sigma_sq;
    s.u_len = u_len;
    s.validate();
    return s;
}

void KernelSpec::validate() const {
    switch (kind) {
        case Kind::polynomial:
            if (offset < 0.0) throw ConfigError("kernel: polynomial offset must be >= 0");
            if (degree < 1) throw ConfigError("kernel: polynomial degree must be >= 1");
            break;
        case Kind::gaussian:
            if (two_sigma_sq <= 0.0) throw ConfigError("kernel: gaussian two_sigma_sq must be > 0");
            break;
        case Kind::exponential:
            if (scale <= 0.0) throw ConfigError("kernel: exponential scale must be > 0");
            break;
        case Kind::hybrid:
            if (two_sigma_sq <= 0.0) throw ConfigError("kernel: hybrid two_sigma_sq must be > 0");
            if (u_len < 1) throw ConfigError("kernel: hybrid u_len must be >= 1");
            break;
    }
}

std::string KernelSpec::name() const {
    switch (kind) {
        case Kind::polynomial: return "polynomial";
        case Kind::gaussian: return "gaussian";
        case Kind::exponential: return "exponential";
        case Kind::hybrid: return "hybrid";
    }
    return "unknown";
}

namespace {

void check_lengths(const KernelSpec& spec, Eigen::Index nx, Eigen::Index ny) {
    if (nx != ny)
        throw DimensionError("kernel eval: argument lengths differ (" + std::to_string(nx) +
                             " vs " + std::to_string(ny) + ")");
    if (spec.kind == KernelSpec::Kind::hybrid && nx < spec.u_len)
        throw DimensionError("kernel eval: hybrid argument shorter than its u block");
}

}  // namespace

double eval(const KernelSpec& spec, const Eigen::Ref<const Vec>& x,
            const Eigen::Ref<const Vec>& y) {
    check_lengths(spec, x.size(), y.size());
    switch (spec.kind) {
        case KernelSpec::Kind::polynomial:
            return std::pow(x.dot(y) + spec.offset, spec.degree);
        case KernelSpec::Kind::gaussian:
            return std::exp(-(x - y).squaredNorm() / spec.two_sigma_sq);
        case KernelSpec::Kind::exponential:
            return std::exp(x.dot(y) / spec.scale);
        case KernelSpec::Kind::hybrid: {
            const Eigen::Index past = x.size() - spec.u_len;
            const double radial =
                std::exp(-(x.head(past) - y.head(past)).squaredNorm() / spec.two_sigma_sq);
            return radial + x.tail(spec.u_len).dot(y.tail(spec.u_len));
        }
    }
    throw std::logic_error("kernel eval: unreachable");
}

GramMatrix gram(const KernelSpec& spec, const CenterSet& centers, GramMatrix::Source source) {
    const int n = centers.count();
    if (n < 1) throw DimensionError("gram: center set is empty");
    Mat k(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j)
            k(i, j) = eval(spec, centers.centers.col(i), centers.centers.col(j));
    k = k.selfadjointView<Eigen::Upper>();
    // guard downstream Cholesky against round-off asymmetry
    k = 0.5 * (k + k.transpose()).eval();
    return GramMatrix{std::move(k), source};
}

Vec kernel_vector(const KernelSpec& spec, const CenterSet& centers,
                  const Eigen::Ref<const Vec>& query) {
    if (query.size() != centers.centers.rows())
        throw DimensionError("kernel_vector: query length " + std::to_string(query.size()) +
                             " does not match center length " +
                             std::to_string(centers.centers.rows()));
    const int n = centers.count();
    Vec k(n);
    for (int j = 0; j < n; ++j) k(j) = eval(spec, centers.centers.col(j), query);
    return k;
}

Mat kernel_jacobian_u(const KernelSpec& spec, const CenterSet& centers,
                      const Eigen::Ref<const Vec>& query, const Dims& dims) {
    if (query.size() != centers.centers.rows())
        throw DimensionError("kernel_jacobian_u: query length does not match center length");
    if (centers.centers.rows() != dims.regressor_len())
        throw DimensionError("kernel_jacobian_u: dims inconsistent with center length");
    const int n = centers.count();
    const int nu = dims.u_len();
    const int past = dims.past_len();
    Mat jac(n, nu);
    for (int j = 0; j < n; ++j) {
        const auto xj = centers.centers.col(j);
        switch (spec.kind) {
            case KernelSpec::Kind::polynomial: {
                const double base = xj.dot(query) + spec.offset;
                jac.row(j) = spec.degree * std::pow(base, spec.degree - 1) *
                             xj.tail(nu).transpose();
                break;
            }
            case KernelSpec::Kind::gaussian: {
                const double val = std::exp(-(xj - query).squaredNorm() / spec.two_sigma_sq);
                jac.row(j) = val * (2.0 / spec.two_sigma_sq) *
                             (xj.tail(nu) - query.tail(nu)).transpose();
                break;
            }
            case KernelSpec::Kind::exponential: {
                const double val = std::exp(xj.dot(query) / spec.scale);
                jac.row(j) = (val / spec.scale) * xj.tail(nu).transpose();
                break;
            }
            case KernelSpec::Kind::hybrid: {
                if (spec.u_len != nu)
                    throw DimensionError("kernel_jacobian_u: hybrid u_len disagrees with dims");
                (void)past;
                jac.row(j) = xj.tail(nu).transpose();
                break;
            }
        }
    }
    return jac;
}

}  // namespace rokdeepc
