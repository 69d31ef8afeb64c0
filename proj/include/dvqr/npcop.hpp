#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "dvqr/bicop.hpp"
#include "dvqr/num.hpp"
#include "dvqr/types.hpp"

//! nonparametric pair-copula estimation after continuous convolution:
//! discrete variables become continuous by adding uniform noise on
//! (-1/2, 1/2), and pair-copulas are estimated by a transformation kernel
//! density estimator on the normal scale.
namespace dvqr {
namespace npcop {

//! noise configuration; the half-width 1/2 on a unit-spaced support makes
//! de-jittering by rounding exact
struct JitterSpec {
    double half_width = 0.5;
    std::uint64_t seed = 0;
    int replicates = 1;
};

namespace detail {

inline std::vector<double> sorted_support(const std::vector<double>& column)
{
    std::vector<double> s(column);
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    return s;
}

//! noise uniform on the open interval (-1/2, 1/2)
inline double noise(std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double u = unif(rng);
    while (u == 0.0)
        u = unif(rng);
    return 0.5 - u;
}

} // namespace detail

//! rank code of x within a support (nearest value, ties upward)
inline std::size_t rank_code(const std::vector<double>& support, double x)
{
    auto it = std::lower_bound(support.begin(), support.end(), x);
    if (it == support.begin())
        return 0;
    if (it == support.end())
        return support.size() - 1;
    std::size_t hi = static_cast<std::size_t>(it - support.begin());
    std::size_t lo = hi - 1;
    return (x - support[lo] < support[hi] - x) ? lo : hi;
}

//! replaces each value by value + noise. Equally spaced supports are
//! jittered in place (noise scaled by the spacing); arbitrary supports are
//! first mapped to rank codes 0..K-1 and returned on the code scale.
//! Deterministic under the seed; rounding recovers the input exactly.
inline std::vector<double> jitter(const std::vector<double>& column,
                                  const JitterSpec& spec)
{
    auto support = detail::sorted_support(column);
    if (support.size() < 2)
        throw degenerate_margin_error("jitter: constant column");

    double spacing = support[1] - support[0];
    bool equal = true;
    for (std::size_t i = 2; i < support.size(); ++i) {
        if (std::abs((support[i] - support[i - 1]) - spacing) >
            1e-9 * std::max(1.0, std::abs(spacing))) {
            equal = false;
            break;
        }
    }

    std::mt19937_64 rng(spec.seed);
    std::vector<double> out(column.size());
    if (equal) {
        for (std::size_t i = 0; i < column.size(); ++i)
            out[i] = column[i] + spacing * (2.0 * spec.half_width) *
                                     detail::noise(rng);
    } else {
        for (std::size_t i = 0; i < column.size(); ++i)
            out[i] = static_cast<double>(rank_code(support, column[i])) +
                     (2.0 * spec.half_width) * detail::noise(rng);
    }
    return out;
}

//! transformation kernel density estimator of a pair-copula density:
//! both coordinates are mapped to the normal scale and smoothed with a
//! bivariate Gaussian kernel under the normal-reference bandwidth matrix
struct KernelCopula {
    std::vector<double> zx, zy; // normal scores of the training pairs
    // lower-triangular bandwidth factor B, H = B B^T
    double b11 = 1.0, b21 = 0.0, b22 = 1.0;

    std::size_t size() const { return zx.size(); }

    //! copula density at (u, v); includes the normal-score Jacobian
    double pdf(double u, double v) const
    {
        double x = num::qnorm(num::clamp_unit(u));
        double y = num::qnorm(num::clamp_unit(v));
        double det = b11 * b22;
        double acc = 0.0;
        for (std::size_t i = 0; i < zx.size(); ++i) {
            double d1 = (x - zx[i]) / b11;
            double d2 = (y - zy[i] - b21 * d1) / b22;
            acc += std::exp(-0.5 * (d1 * d1 + d2 * d2));
        }
        double fz = acc / (2.0 * M_PI * det * static_cast<double>(zx.size()));
        double out = fz / (num::dnorm(x) * num::dnorm(y));
        return std::isfinite(out) ? std::max(out, 0.0) : 0.0;
    }
};

inline KernelCopula fit_kernel_copula(
    const std::vector<std::pair<double, double>>& pairs)
{
    if (pairs.size() < 30)
        throw input_error("fit_kernel_copula: need at least 30 pairs");
    KernelCopula m;
    const std::size_t n = pairs.size();
    m.zx.resize(n);
    m.zy.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        m.zx[i] = num::qnorm(num::clamp_unit(pairs[i].first));
        m.zy[i] = num::qnorm(num::clamp_unit(pairs[i].second));
    }
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += m.zx[i];
        my += m.zy[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (m.zx[i] - mx) * (m.zx[i] - mx);
        sxy += (m.zx[i] - mx) * (m.zy[i] - my);
        syy += (m.zy[i] - my) * (m.zy[i] - my);
    }
    sxx /= static_cast<double>(n - 1);
    sxy /= static_cast<double>(n - 1);
    syy /= static_cast<double>(n - 1);
    // Cholesky factor of the sample covariance, scaled by n^(-1/6)
    double scale = std::pow(static_cast<double>(n), -1.0 / 6.0);
    double c11 = std::sqrt(std::max(sxx, 1e-12));
    double c21 = sxy / c11;
    double c22 = std::sqrt(std::max(syy - c21 * c21, 1e-12));
    m.b11 = scale * c11;
    m.b21 = scale * c21;
    m.b22 = scale * c22;
    return m;
}

inline double kc_pdf(const KernelCopula& m, double u, double v)
{
    return m.pdf(u, v);
}

namespace detail {

//! fixed 25-node Gauss-Legendre integral of the pdf along one coordinate
inline double strip_integral(const KernelCopula& m, double lo, double hi,
                             double given, bicop::Direction dir)
{
    static const num::QuadRule gl = num::gauss_legendre(25);
    auto f = [&](double s) {
        return dir == bicop::Direction::first_given_second ? m.pdf(s, given)
                                                           : m.pdf(given, s);
    };
    return num::integrate_gl(f, lo, hi, gl);
}

} // namespace detail

//! conditional CDF of the target coordinate given the other one, computed by
//! quadrature of the kernel density and renormalized so the endpoints are
//! exactly 0 and 1
inline double kc_hfunc(const KernelCopula& m, double target, double given,
                       bicop::Direction dir)
{
    if (target <= 0.0)
        return 0.0;
    if (target >= 1.0)
        return 1.0;
    double den = detail::strip_integral(m, 0.0, 1.0, given, dir);
    if (den <= 0.0)
        return target;
    double num_ = detail::strip_integral(m, 0.0, target, given, dir);
    return std::clamp(num_ / den, 0.0, 1.0);
}

//! inverse of kc_hfunc in its target argument, by bisection
inline double kc_hinv(const KernelCopula& m, double p, double given,
                      bicop::Direction dir)
{
    if (p <= 0.0)
        return 0.0;
    if (p >= 1.0)
        return 1.0;
    double den = detail::strip_integral(m, 0.0, 1.0, given, dir);
    auto f = [&](double u) {
        if (den <= 0.0)
            return u - p;
        return std::clamp(detail::strip_integral(m, 0.0, u, given, dir) / den,
                          0.0, 1.0) -
               p;
    };
    return num::bisect_root(f, 0.0, 1.0, 1e-9, 1e-10, 200);
}

} // namespace npcop
} // namespace dvqr
