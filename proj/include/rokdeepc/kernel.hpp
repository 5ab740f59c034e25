#pragma once

#include <string>

#include "rokdeepc/types.hpp"

namespace rokdeepc {

/// Kernel function family with its parameters.
///
/// Parameter conventions follow the experiments: the Gaussian stores the full
/// denominator two_sigma_sq of exp(-|x-y|^2 / two_sigma_sq) (0.4 in the
/// benchmark), the exponential stores the divisor of exp(x'y / scale) (0.2).
/// The hybrid kernel applies the Gaussian form to the leading past block and
/// adds the plain inner product of the trailing u_len future-input
/// coordinates, so it is linear in the future inputs.
struct KernelSpec {
    enum class Kind { polynomial, gaussian, exponential, hybrid };

    Kind kind = Kind::gaussian;
    double offset = 1.0;        // polynomial: c >= 0
    int degree = 10;            // polynomial: d >= 1
    double two_sigma_sq = 0.4;  // gaussian / hybrid past block
    double scale = 0.2;         // exponential divisor
    int u_len = 0;              // hybrid: trailing future-input block length

    static KernelSpec polynomial(double c, int d);
    static KernelSpec gaussian(double two_sigma_sq);
    static KernelSpec exponential(double scale);
    static KernelSpec hybrid(double two_sigma_sq, int u_len);

    void validate() const;
    std::string name() const;
};

/// The kernel regressor columns x_j = col(U_P[:,j], Y_P[:,j], U_F[:,j]).
struct CenterSet {
    Mat centers;  // regressor_len x H_c, one center per column
    Dims dims;

    int count() const { return static_cast<int>(centers.cols()); }
};

/// Gram matrix of pairwise kernel evaluations, symmetrized after assembly.
struct GramMatrix {
    enum class Source { perfect, noisy };
    Mat k;
    Source source = Source::noisy;
};

double eval(const KernelSpec& spec, const Eigen::Ref<const Vec>& x,
            const Eigen::Ref<const Vec>& y);

GramMatrix gram(const KernelSpec& spec, const CenterSet& centers,
                GramMatrix::Source source = GramMatrix::Source::noisy);

/// k(query): entry j is eval(x_j, query).
Vec kernel_vector(const KernelSpec& spec, const CenterSet& centers,
                  const Eigen::Ref<const Vec>& query);

/// Jacobian of k(query) with respect to the trailing future-input block of
/// the query: row j holds d eval(x_j, q) / dq restricted to those dims.u_len()
/// coordinates.
Mat kernel_jacobian_u(const KernelSpec& spec, const CenterSet& centers,
                      const Eigen::Ref<const Vec>& query, const Dims& dims);

}  // namespace rokdeepc
