#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <thread>
#include <utility>
#include <vector>

#include <boost/math/distributions/normal.hpp>

//! low-level numerics shared by all modules
namespace dvqr {
namespace num {

//! copula-scale values are clamped to [unit_eps, 1 - unit_eps] before evaluation
inline constexpr double unit_eps = 1e-10;

//! floor for arguments of log in likelihoods
inline constexpr double log_floor = 1e-300;

inline double clamp_unit(double u)
{
    return std::clamp(u, unit_eps, 1.0 - unit_eps);
}

inline double safe_log(double x)
{
    return std::log(std::max(x, log_floor));
}

//! standard normal density
inline double dnorm(double x)
{
    static const double inv_sqrt_2pi = 0.3989422804014327;
    return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

//! standard normal cdf
inline double pnorm(double x)
{
    return 0.5 * std::erfc(-x * 0.7071067811865475244);
}

//! standard normal quantile
inline double qnorm(double p)
{
    static const boost::math::normal_distribution<> dist;
    return boost::math::quantile(dist, std::clamp(p, unit_eps, 1.0 - unit_eps));
}

//! nodes and weights of the n-point Gauss-Legendre rule on [-1, 1]
struct QuadRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

inline QuadRule gauss_legendre(int n)
{
    QuadRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
        // Newton iteration on P_n, seeded by the Chebyshev approximation
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < n; ++j) {
                double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
            }
            pp = n * (x * p0 - p1) / (x * x - 1.0);
            double dx = p0 / pp;
            x -= dx;
            if (std::abs(dx) < 1e-15)
                break;
        }
        rule.nodes[i] = -x;
        rule.nodes[n - 1 - i] = x;
        rule.weights[i] = 2.0 / ((1.0 - x * x) * pp * pp);
        rule.weights[n - 1 - i] = rule.weights[i];
    }
    return rule;
}

//! integral of f over [a, b] with a fixed-order rule
template <class F>
double integrate_gl(F&& f, double a, double b, const QuadRule& rule)
{
    double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    double sum = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i)
        sum += rule.weights[i] * f(mid + half * rule.nodes[i]);
    return half * sum;
}

//! P(X <= x, Y <= y) for a standard bivariate normal with correlation rho.
//! Genz's algorithm; accurate to about 1e-14 for |rho| <= 0.999.
inline double bvn_cdf(double x, double y, double rho)
{
    if (rho >= 1.0)
        return pnorm(std::min(x, y));
    if (rho <= -1.0)
        return std::max(pnorm(x) + pnorm(y) - 1.0, 0.0);

    static const QuadRule gl6 = gauss_legendre(6);
    static const QuadRule gl12 = gauss_legendre(12);
    static const QuadRule gl20 = gauss_legendre(20);
    const QuadRule& gl =
        std::abs(rho) < 0.3 ? gl6 : (std::abs(rho) < 0.75 ? gl12 : gl20);

    // computes the upper-tail probability P(X > h, Y > k)
    double h = -x, k = -y, r = rho;
    double hk = h * k, bvn = 0.0;
    static const double twopi = 2.0 * M_PI;
    if (std::abs(r) < 0.925) {
        double hs = 0.5 * (h * h + k * k);
        double asr = std::asin(r);
        for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
            double sn = std::sin(asr * (gl.nodes[i] + 1.0) / 2.0);
            bvn += gl.weights[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
        }
        bvn = bvn * asr / (2.0 * twopi) + pnorm(-h) * pnorm(-k);
    } else {
        if (r < 0.0) {
            k = -k;
            hk = -hk;
        }
        double as = (1.0 - r) * (1.0 + r);
        double a = std::sqrt(as);
        double bs = (h - k) * (h - k);
        double c = (4.0 - hk) / 8.0;
        double d = (12.0 - hk) / 16.0;
        double asr = -0.5 * (bs / as + hk);
        if (asr > -100.0)
            bvn = a * std::exp(asr) *
                  (1.0 - c * (bs - as) * (1.0 - d * bs / 5.0) / 3.0 +
                   c * d * as * as / 5.0);
        if (-hk < 100.0) {
            double b = std::sqrt(bs);
            bvn -= std::exp(-0.5 * hk) * std::sqrt(twopi) * pnorm(-b / a) * b *
                   (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
        }
        a /= 2.0;
        for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
            double xi = a * (gl.nodes[i] + 1.0);
            double xs = xi * xi;
            double rs = std::sqrt(1.0 - xs);
            double asr2 = -0.5 * (bs / xs + hk);
            if (asr2 > -100.0) {
                double sp = 1.0 + c * xs * (1.0 + d * xs);
                double ep = std::exp(-hk * (1.0 - rs) / (2.0 * (1.0 + rs))) / rs;
                bvn += a * gl.weights[i] * std::exp(asr2) * (ep - sp);
            }
        }
        bvn = -bvn / twopi;
        if (r > 0.0) {
            bvn += pnorm(-std::max(h, k));
        } else {
            bvn = -bvn;
            if (k > h)
                bvn += pnorm(k) - pnorm(h);
        }
    }
    return std::clamp(bvn, 0.0, 1.0);
}

struct ScalarMaxResult {
    double x = 0.0;
    double fx = -std::numeric_limits<double>::infinity();
    int iterations = 0;
    bool converged = false;
};

//! bounded scalar maximization (Brent's parabolic/golden scheme).
//! The search starts from x0 instead of the golden-section point so a
//! method-of-moments guess can seed the likelihood climb.
template <class F>
ScalarMaxResult brent_maximize(F&& f, double lo, double hi, double x0,
                               double xtol = 1e-6, int max_iter = 200)
{
    const double golden = 0.3819660112501051;
    const double eps = std::sqrt(std::numeric_limits<double>::epsilon());
    double a = lo, b = hi;
    double x = std::clamp(x0, lo, hi);
    double w = x, v = x;
    double fx = -f(x), fw = fx, fv = fx;
    double d = 0.0, e = 0.0;

    ScalarMaxResult res;
    int it = 0;
    for (; it < max_iter; ++it) {
        double m = 0.5 * (a + b);
        double tol1 = eps * std::abs(x) + xtol / 3.0;
        double tol2 = 2.0 * tol1;
        if (std::abs(x - m) <= tol2 - 0.5 * (b - a)) {
            res.converged = true;
            break;
        }
        double r = 0.0, q = 0.0, p = 0.0;
        if (std::abs(e) > tol1) {
            // trial parabolic fit
            r = (x - w) * (fx - fv);
            q = (x - v) * (fx - fw);
            p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if (q > 0.0)
                p = -p;
            q = std::abs(q);
            double etmp = e;
            e = d;
            if (std::abs(p) >= std::abs(0.5 * q * etmp) || p <= q * (a - x) ||
                p >= q * (b - x)) {
                e = (x >= m) ? a - x : b - x;
                d = golden * e;
            } else {
                d = p / q;
                double u = x + d;
                if (u - a < tol2 || b - u < tol2)
                    d = (m > x) ? tol1 : -tol1;
            }
        } else {
            e = (x >= m) ? a - x : b - x;
            d = golden * e;
        }
        double u = (std::abs(d) >= tol1) ? x + d : x + (d > 0 ? tol1 : -tol1);
        double fu = -f(u);
        if (fu <= fx) {
            if (u >= x)
                a = x;
            else
                b = x;
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if (u < x)
                a = u;
            else
                b = u;
            if (fu <= fw || w == x) {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if (fu <= fv || v == x || v == w) {
                v = u;
                fv = fu;
            }
        }
    }
    res.x = x;
    res.fx = -fx;
    res.iterations = it;
    return res;
}

//! root of a monotone nondecreasing f on [lo, hi] by bisection.
//! Stops when the residual is below ftol or the bracket is below xtol.
template <class F>
double bisect_root(F&& f, double lo, double hi, double xtol = 1e-12,
                   double ftol = 1e-12, int max_iter = 200)
{
    double flo = f(lo);
    if (flo >= 0.0)
        return lo;
    if (f(hi) <= 0.0)
        return hi;
    double mid = 0.5 * (lo + hi);
    for (int it = 0; it < max_iter; ++it) {
        mid = 0.5 * (lo + hi);
        double fm = f(mid);
        if (std::abs(fm) <= ftol || (hi - lo) <= xtol)
            return mid;
        if (fm < 0.0)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

//! Kendall's tau-b in O(n log n) (Knight's algorithm), with tie corrections.
inline double kendall_tau(const std::vector<double>& x,
                          const std::vector<double>& y)
{
    const std::size_t n = x.size();
    if (n != y.size() || n < 2)
        throw std::invalid_argument("kendall_tau: need two columns of equal length >= 2");

    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) {
        return x[i] < x[j] || (x[i] == x[j] && y[i] < y[j]);
    });

    auto pairs_of = [](double t) { return t * (t - 1.0) / 2.0; };

    // ties in x and joint ties, scanning the (x, y)-sorted order
    double n1 = 0.0, n3 = 0.0;
    std::size_t run_x = 1, run_xy = 1;
    for (std::size_t i = 1; i < n; ++i) {
        if (x[idx[i]] == x[idx[i - 1]]) {
            ++run_x;
            if (y[idx[i]] == y[idx[i - 1]])
                ++run_xy;
            else {
                n3 += pairs_of(static_cast<double>(run_xy));
                run_xy = 1;
            }
        } else {
            n1 += pairs_of(static_cast<double>(run_x));
            n3 += pairs_of(static_cast<double>(run_xy));
            run_x = run_xy = 1;
        }
    }
    n1 += pairs_of(static_cast<double>(run_x));
    n3 += pairs_of(static_cast<double>(run_xy));

    // merge sort y in x-order, counting exchanges
    std::vector<double> ys(n), buf(n);
    for (std::size_t i = 0; i < n; ++i)
        ys[i] = y[idx[i]];
    double swaps = 0.0;
    for (std::size_t width = 1; width < n; width *= 2) {
        for (std::size_t lo = 0; lo < n; lo += 2 * width) {
            std::size_t mid = std::min(lo + width, n);
            std::size_t hi = std::min(lo + 2 * width, n);
            std::size_t i = lo, j = mid, k = lo;
            while (i < mid && j < hi) {
                if (ys[j] < ys[i]) {
                    swaps += static_cast<double>(mid - i);
                    buf[k++] = ys[j++];
                } else {
                    buf[k++] = ys[i++];
                }
            }
            while (i < mid)
                buf[k++] = ys[i++];
            while (j < hi)
                buf[k++] = ys[j++];
        }
        std::swap(ys, buf);
    }

    // ties in y
    std::vector<double> y2(y);
    std::sort(y2.begin(), y2.end());
    double n2 = 0.0;
    std::size_t run_y = 1;
    for (std::size_t i = 1; i < n; ++i) {
        if (y2[i] == y2[i - 1])
            ++run_y;
        else {
            n2 += pairs_of(static_cast<double>(run_y));
            run_y = 1;
        }
    }
    n2 += pairs_of(static_cast<double>(run_y));

    double n0 = pairs_of(static_cast<double>(n));
    double num = n0 - n1 - n2 + n3 - 2.0 * swaps;
    double den = std::sqrt((n0 - n1) * (n0 - n2));
    if (den <= 0.0)
        return 0.0;
    return num / den;
}

//! binomial pmf/cdf/quantile, exact for the small N used here
inline double binom_pmf(int k, int n, double p)
{
    if (k < 0 || k > n)
        return 0.0;
    double logc = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
    return std::exp(logc + k * std::log(p) + (n - k) * std::log1p(-p));
}

inline double binom_cdf(int k, int n, double p)
{
    if (k < 0)
        return 0.0;
    if (k >= n)
        return 1.0;
    double s = 0.0;
    for (int j = 0; j <= k; ++j)
        s += binom_pmf(j, n, p);
    return std::min(s, 1.0);
}

//! generalized inverse: smallest k with P(X <= k) >= alpha
inline int binom_quantile(double alpha, int n, double p)
{
    double s = 0.0;
    for (int k = 0; k < n; ++k) {
        s += binom_pmf(k, n, p);
        if (s >= alpha)
            return k;
    }
    return n;
}

//! splitmix64 step; used to derive independent substream seeds
inline std::uint64_t splitmix64(std::uint64_t z)
{
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream)
{
    return splitmix64(base ^ splitmix64(stream + 1));
}

//! run fn(i) for i in [0, count) on up to nthreads threads.
//! Work is strided so results land at fixed indices regardless of scheduling.
template <class F>
void parallel_for(std::size_t count, int nthreads, F&& fn)
{
    nthreads = std::max(1, nthreads);
    if (nthreads == 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i)
            fn(i);
        return;
    }
    std::size_t t_count = std::min<std::size_t>(nthreads, count);
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(t_count);
    for (std::size_t t = 0; t < t_count; ++t) {
        pool.emplace_back([&, t]() {
            try {
                for (std::size_t i = t; i < count; i += t_count)
                    fn(i);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (auto& th : pool)
        th.join();
    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);
}

} // namespace num
} // namespace dvqr
