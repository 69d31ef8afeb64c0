#pragma once

#include <array>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "dvqr/num.hpp"
#include "dvqr/types.hpp"

//! parametric bivariate copula families: CDF, density, h-functions and their
//! inverses, Kendall's tau relations, rotations, and continuous-data MLE
namespace dvqr {
namespace bicop {

enum class FamilyId { independence, gaussian, clayton, gumbel, frank, joe };

enum class Rotation { r0 = 0, r90 = 90, r180 = 180, r270 = 270 };

enum class Direction { first_given_second, second_given_first };

inline const char* family_name(FamilyId f)
{
    switch (f) {
        case FamilyId::independence: return "independence";
        case FamilyId::gaussian: return "gaussian";
        case FamilyId::clayton: return "clayton";
        case FamilyId::gumbel: return "gumbel";
        case FamilyId::frank: return "frank";
        case FamilyId::joe: return "joe";
    }
    return "?";
}

inline FamilyId family_from_name(const std::string& s)
{
    for (FamilyId f : {FamilyId::independence, FamilyId::gaussian,
                       FamilyId::clayton, FamilyId::gumbel, FamilyId::frank,
                       FamilyId::joe}) {
        if (s == family_name(f))
            return f;
    }
    throw input_error("unknown copula family: " + s);
}

//! closed parameter interval considered numerically safe for a family.
//! For frank the interval applies to |theta| (both signs are allowed).
struct ParamBounds {
    double lo;
    double hi;
};

inline ParamBounds param_bounds(FamilyId f)
{
    switch (f) {
        case FamilyId::independence: return {0.0, 0.0};
        case FamilyId::gaussian: return {-0.999, 0.999};
        case FamilyId::clayton: return {1e-4, 28.0};
        case FamilyId::gumbel: return {1.0 + 1e-4, 17.0};
        case FamilyId::frank: return {1e-4, 35.0};
        case FamilyId::joe: return {1.0 + 1e-4, 30.0};
    }
    return {0.0, 0.0};
}

//! family + rotation + parameter; fully describes one parametric pair-copula
struct PairCopulaSpec {
    FamilyId family = FamilyId::independence;
    Rotation rotation = Rotation::r0;
    double theta = 0.0;

    bool operator==(const PairCopulaSpec& o) const = default;
};

inline PairCopulaSpec independence_spec()
{
    return PairCopulaSpec{FamilyId::independence, Rotation::r0, 0.0};
}

inline void validate(const PairCopulaSpec& spec)
{
    if (spec.family == FamilyId::independence)
        return;
    auto b = param_bounds(spec.family);
    double t = spec.family == FamilyId::frank ? std::abs(spec.theta) : spec.theta;
    if (!(t >= b.lo && t <= b.hi) || !std::isfinite(spec.theta))
        throw invalid_spec_error(std::string("parameter out of bounds for ") +
                                 family_name(spec.family) + ": " +
                                 std::to_string(spec.theta));
    if (spec.rotation != Rotation::r0 &&
        (spec.family == FamilyId::gaussian || spec.family == FamilyId::frank))
        throw invalid_spec_error("rotations are only used for the asymmetric families");
}

namespace detail {

// ---- base-family formulas (rotation 0); all exchangeable in (u, v) ----

inline double clayton_cdf(double u, double v, double t)
{
    double su = std::exp(-t * std::log(u));
    double sv = std::exp(-t * std::log(v));
    return std::exp(-std::log(su + sv - 1.0) / t);
}

inline double clayton_pdf(double u, double v, double t)
{
    double lu = std::log(u), lv = std::log(v);
    double s = std::exp(-t * lu) + std::exp(-t * lv) - 1.0;
    return std::exp(std::log1p(t) - (t + 1.0) * (lu + lv) -
                    (2.0 + 1.0 / t) * std::log(s));
}

inline double clayton_hfunc(double u, double v, double t)
{
    // d/dv C(u, v)
    double lu = std::log(u), lv = std::log(v);
    double s = std::exp(-t * lu) + std::exp(-t * lv) - 1.0;
    return std::exp(-(t + 1.0) * lv - (1.0 + 1.0 / t) * std::log(s));
}

inline double clayton_hinv(double p, double v, double t)
{
    double lv = std::log(v);
    double ls = -(t * std::log(p)) / (t + 1.0) - t * lv;
    double rhs = std::exp(ls) - std::exp(-t * lv) + 1.0;
    if (rhs <= 1.0)
        return 1.0 - num::unit_eps;
    return std::exp(-std::log(rhs) / t);
}

inline double gaussian_pdf(double u, double v, double r)
{
    double x = num::qnorm(u), y = num::qnorm(v);
    double r2 = 1.0 - r * r;
    return std::exp(-0.5 * std::log(r2) -
                    (r * r * (x * x + y * y) - 2.0 * r * x * y) / (2.0 * r2));
}

inline double gaussian_hfunc(double u, double v, double r)
{
    double x = num::qnorm(u), y = num::qnorm(v);
    return num::pnorm((x - r * y) / std::sqrt(1.0 - r * r));
}

inline double gaussian_hinv(double p, double v, double r)
{
    double y = num::qnorm(v);
    return num::pnorm(num::qnorm(p) * std::sqrt(1.0 - r * r) + r * y);
}

inline double gumbel_cdf(double u, double v, double t)
{
    double a = -std::log(u), b = -std::log(v);
    double s = std::pow(a, t) + std::pow(b, t);
    return std::exp(-std::pow(s, 1.0 / t));
}

inline double gumbel_pdf(double u, double v, double t)
{
    double a = -std::log(u), b = -std::log(v);
    double ls = std::log(std::pow(a, t) + std::pow(b, t));
    double s1t = std::exp(ls / t);
    return std::exp(-s1t + (t - 1.0) * (std::log(a) + std::log(b)) + a + b +
                    (1.0 / t - 2.0) * ls + std::log(s1t + t - 1.0));
}

inline double gumbel_hfunc(double u, double v, double t)
{
    double a = -std::log(u), b = -std::log(v);
    double ls = std::log(std::pow(a, t) + std::pow(b, t));
    return std::exp(-std::exp(ls / t) + (1.0 / t - 1.0) * ls +
                    (t - 1.0) * std::log(b) + b);
}

// d + expm1(-t u) expm1(-t v) rewritten without the catastrophic
// cancellation that the naive form suffers for large |t|:
//   e^{-tu} expm1(-tv) + e^{-tv} expm1(-t(1-v))
inline double frank_denom(double u, double v, double t)
{
    return std::exp(-t * u) * std::expm1(-t * v) +
           std::exp(-t * v) * std::expm1(-t * (1.0 - v));
}

inline double frank_cdf(double u, double v, double t)
{
    double den = frank_denom(u, v, t);
    double d = std::expm1(-t);
    return -(std::log(std::abs(den)) - std::log(std::abs(d))) / t;
}

inline double frank_pdf(double u, double v, double t)
{
    double den = frank_denom(u, v, t);
    double d = std::expm1(-t);
    return -t * d * std::exp(-t * (u + v)) / (den * den);
}

inline double frank_hfunc(double u, double v, double t)
{
    return std::exp(-t * v) * std::expm1(-t * u) / frank_denom(u, v, t);
}

// log of M = (1-u)^t + (1-v)^t - (1-u)^t (1-v)^t, switching between the
// A+B-AB form (stable when both powers are small) and the 1-ab complement
// form (stable when M is away from zero)
inline double joe_log_m(double u, double v, double t)
{
    double la = t * std::log1p(-u);
    double lb = t * std::log1p(-v);
    double pa = std::exp(la), pb = std::exp(lb);
    if (pa < 0.5 && pb < 0.5)
        return std::log(pa + pb - pa * pb);
    double a = -std::expm1(la), b = -std::expm1(lb);
    return std::log1p(-a * b);
}

inline double joe_cdf(double u, double v, double t)
{
    return -std::expm1(joe_log_m(u, v, t) / t);
}

inline double joe_pdf(double u, double v, double t)
{
    double lm = joe_log_m(u, v, t);
    return std::exp((1.0 / t - 2.0) * lm +
                    (t - 1.0) * (std::log1p(-u) + std::log1p(-v)) +
                    std::log(t - 1.0 + std::exp(lm)));
}

inline double joe_hfunc(double u, double v, double t)
{
    double lm = joe_log_m(u, v, t);
    double la = std::log(-std::expm1(t * std::log1p(-u)));
    return std::exp((1.0 / t - 1.0) * lm + (t - 1.0) * std::log1p(-v) + la);
}

inline double base_cdf(FamilyId f, double u, double v, double t)
{
    switch (f) {
        case FamilyId::independence: return u * v;
        case FamilyId::gaussian:
            return num::bvn_cdf(num::qnorm(u), num::qnorm(v), t);
        case FamilyId::clayton: return clayton_cdf(u, v, t);
        case FamilyId::gumbel: return gumbel_cdf(u, v, t);
        case FamilyId::frank: return frank_cdf(u, v, t);
        case FamilyId::joe: return joe_cdf(u, v, t);
    }
    return u * v;
}

inline double base_pdf(FamilyId f, double u, double v, double t)
{
    switch (f) {
        case FamilyId::independence: return 1.0;
        case FamilyId::gaussian: return gaussian_pdf(u, v, t);
        case FamilyId::clayton: return clayton_pdf(u, v, t);
        case FamilyId::gumbel: return gumbel_pdf(u, v, t);
        case FamilyId::frank: return frank_pdf(u, v, t);
        case FamilyId::joe: return joe_pdf(u, v, t);
    }
    return 1.0;
}

// conditional CDF of the first argument given the second, rotation 0
inline double base_hfunc(FamilyId f, double u, double v, double t)
{
    switch (f) {
        case FamilyId::independence: return u;
        case FamilyId::gaussian: return gaussian_hfunc(u, v, t);
        case FamilyId::clayton: return clayton_hfunc(u, v, t);
        case FamilyId::gumbel: return gumbel_hfunc(u, v, t);
        case FamilyId::frank: return frank_hfunc(u, v, t);
        case FamilyId::joe: return joe_hfunc(u, v, t);
    }
    return u;
}

inline double base_hinv(FamilyId f, double p, double v, double t)
{
    double u;
    switch (f) {
        case FamilyId::independence: return p;
        case FamilyId::gaussian: u = gaussian_hinv(p, v, t); break;
        case FamilyId::clayton: u = clayton_hinv(p, v, t); break;
        default: {
            // gumbel/frank/joe: monotone bisection on the h-function
            auto fn = [&](double u_) { return base_hfunc(f, u_, v, t) - p; };
            return num::bisect_root(fn, num::unit_eps, 1.0 - num::unit_eps,
                                    1e-15, 1e-12, 200);
        }
    }
    // Newton polish of the closed form; dh/du is the copula density
    u = std::clamp(u, num::unit_eps, 1.0 - num::unit_eps);
    for (int it = 0; it < 4; ++it) {
        double res = base_hfunc(f, u, v, t) - p;
        if (std::abs(res) <= 1e-13)
            break;
        double slope = base_pdf(f, u, v, t);
        if (!(slope > 1e-8) || !std::isfinite(slope))
            break;
        u = std::clamp(u - res / slope, num::unit_eps, 1.0 - num::unit_eps);
    }
    return u;
}

inline double debye1(double x)
{
    static const num::QuadRule gl = num::gauss_legendre(64);
    auto f = [](double s) { return s < 1e-12 ? 1.0 : s / std::expm1(s); };
    return num::integrate_gl(f, 0.0, x, gl) / x;
}

// Kendall's tau of the unrotated family as a function of theta
inline double base_tau(FamilyId f, double t)
{
    switch (f) {
        case FamilyId::independence: return 0.0;
        case FamilyId::gaussian: return 2.0 * std::asin(t) / M_PI;
        case FamilyId::clayton: return t / (t + 2.0);
        case FamilyId::gumbel: return 1.0 - 1.0 / t;
        case FamilyId::frank: {
            if (std::abs(t) < 1e-12)
                return 0.0;
            double a = std::abs(t);
            double tau = 1.0 - 4.0 / a * (1.0 - debye1(a));
            return t > 0 ? tau : -tau;
        }
        case FamilyId::joe: {
            static const num::QuadRule gl = num::gauss_legendre(64);
            auto f2 = [t](double s) {
                double w = -std::expm1(t * std::log1p(-s));
                if (w <= 0.0 || w >= 1.0)
                    return 0.0;
                return w * std::log(w) /
                       (t * std::exp((t - 1.0) * std::log1p(-s)));
            };
            return 1.0 + 4.0 * num::integrate_gl(f2, 0.0, 1.0, gl);
        }
    }
    return 0.0;
}

// numeric inversion of base_tau on the family's parameter interval
inline double base_tau_inverse(FamilyId f, double tau)
{
    auto b = param_bounds(f);
    auto fn = [&](double t) { return base_tau(f, t) - tau; };
    return num::bisect_root(fn, b.lo, b.hi, 1e-12, 1e-12, 200);
}

} // namespace detail

//! C(u, v); grounded so C(u,0)=C(0,v)=0, C(u,1)=u, C(1,v)=v hold exactly
inline double cdf(const PairCopulaSpec& spec, double u, double v)
{
    validate(spec);
    if (u <= 0.0 || v <= 0.0)
        return 0.0;
    if (u >= 1.0)
        return std::min(v, 1.0);
    if (v >= 1.0)
        return u;
    u = num::clamp_unit(u);
    v = num::clamp_unit(v);
    double t = spec.theta;
    auto f = spec.family;
    switch (spec.rotation) {
        case Rotation::r0: return detail::base_cdf(f, u, v, t);
        case Rotation::r90: return v - detail::base_cdf(f, 1.0 - u, v, t);
        case Rotation::r180:
            return u + v - 1.0 + detail::base_cdf(f, 1.0 - u, 1.0 - v, t);
        case Rotation::r270: return u - detail::base_cdf(f, u, 1.0 - v, t);
    }
    return u * v;
}

//! copula density; inputs clamped away from the boundary, never NaN
inline double pdf(const PairCopulaSpec& spec, double u, double v)
{
    validate(spec);
    u = num::clamp_unit(u);
    v = num::clamp_unit(v);
    double t = spec.theta;
    auto f = spec.family;
    double out = 1.0;
    switch (spec.rotation) {
        case Rotation::r0: out = detail::base_pdf(f, u, v, t); break;
        case Rotation::r90: out = detail::base_pdf(f, 1.0 - u, v, t); break;
        case Rotation::r180:
            out = detail::base_pdf(f, 1.0 - u, 1.0 - v, t);
            break;
        case Rotation::r270: out = detail::base_pdf(f, u, 1.0 - v, t); break;
    }
    if (!std::isfinite(out) || out < 0.0)
        out = num::log_floor;
    return out;
}

//! conditional CDF h(target | given). Direction selects which copula
//! argument the target is: first_given_second differentiates C by the
//! second argument, second_given_first by the first.
inline double hfunc(const PairCopulaSpec& spec, double target, double given,
                    Direction dir)
{
    validate(spec);
    if (target <= 0.0)
        return 0.0;
    if (target >= 1.0)
        return 1.0;
    double u = num::clamp_unit(target);
    double v = num::clamp_unit(given);
    double t = spec.theta;
    auto f = spec.family;
    double out;
    if (dir == Direction::first_given_second) {
        switch (spec.rotation) {
            case Rotation::r0: out = detail::base_hfunc(f, u, v, t); break;
            case Rotation::r90:
                out = 1.0 - detail::base_hfunc(f, 1.0 - u, v, t);
                break;
            case Rotation::r180:
                out = 1.0 - detail::base_hfunc(f, 1.0 - u, 1.0 - v, t);
                break;
            case Rotation::r270:
            default: out = detail::base_hfunc(f, u, 1.0 - v, t); break;
        }
    } else {
        // target sits in the second copula slot; base families are
        // exchangeable, so only the rotation asymmetry matters
        switch (spec.rotation) {
            case Rotation::r0: out = detail::base_hfunc(f, u, v, t); break;
            case Rotation::r90:
                out = detail::base_hfunc(f, u, 1.0 - v, t);
                break;
            case Rotation::r180:
                out = 1.0 - detail::base_hfunc(f, 1.0 - u, 1.0 - v, t);
                break;
            case Rotation::r270:
            default:
                out = 1.0 - detail::base_hfunc(f, 1.0 - u, v, t);
                break;
        }
    }
    return std::clamp(out, 0.0, 1.0);
}

//! inverse of hfunc in its target argument
inline double hinv(const PairCopulaSpec& spec, double p, double given,
                   Direction dir)
{
    validate(spec);
    if (p <= 0.0)
        return 0.0;
    if (p >= 1.0)
        return 1.0;
    p = num::clamp_unit(p);
    double v = num::clamp_unit(given);
    double t = spec.theta;
    auto f = spec.family;
    double out;
    if (dir == Direction::first_given_second) {
        switch (spec.rotation) {
            case Rotation::r0: out = detail::base_hinv(f, p, v, t); break;
            case Rotation::r90:
                out = 1.0 - detail::base_hinv(f, 1.0 - p, v, t);
                break;
            case Rotation::r180:
                out = 1.0 - detail::base_hinv(f, 1.0 - p, 1.0 - v, t);
                break;
            case Rotation::r270:
            default: out = detail::base_hinv(f, p, 1.0 - v, t); break;
        }
    } else {
        switch (spec.rotation) {
            case Rotation::r0: out = detail::base_hinv(f, p, v, t); break;
            case Rotation::r90:
                out = detail::base_hinv(f, p, 1.0 - v, t);
                break;
            case Rotation::r180:
                out = 1.0 - detail::base_hinv(f, 1.0 - p, 1.0 - v, t);
                break;
            case Rotation::r270:
            default:
                out = 1.0 - detail::base_hinv(f, 1.0 - p, v, t);
                break;
        }
    }
    return std::clamp(out, 0.0, 1.0);
}

//! Kendall's tau implied by a spec (rotations 90/270 flip the sign)
inline double param_to_tau(const PairCopulaSpec& spec)
{
    validate(spec);
    double tau = detail::base_tau(spec.family, spec.theta);
    if (spec.rotation == Rotation::r90 || spec.rotation == Rotation::r270)
        tau = -tau;
    return tau;
}

//! attainable tau interval for a family/rotation combination
inline std::pair<double, double> tau_range(FamilyId f, Rotation rot)
{
    if (f == FamilyId::independence)
        return {0.0, 0.0};
    auto b = param_bounds(f);
    double lo = detail::base_tau(f, b.lo);
    double hi = detail::base_tau(f, b.hi);
    if (f == FamilyId::frank)
        return {-hi, hi};
    if (rot == Rotation::r90 || rot == Rotation::r270)
        return {-hi, -lo};
    return {lo, hi};
}

//! spec whose Kendall's tau equals the given value
inline PairCopulaSpec tau_to_param(FamilyId f, Rotation rot, double tau)
{
    if (f == FamilyId::independence) {
        if (std::abs(tau) > 1e-12)
            throw tau_range_error("independence only attains tau = 0");
        return independence_spec();
    }
    auto range = tau_range(f, rot);
    if (tau < range.first - 1e-12 || tau > range.second + 1e-12)
        throw tau_range_error(std::string("tau outside attainable range for ") +
                              family_name(f) + ": " + std::to_string(tau));
    tau = std::clamp(tau, range.first, range.second);

    bool neg = (rot == Rotation::r90 || rot == Rotation::r270);
    double base_target = neg ? -tau : tau;

    double theta;
    switch (f) {
        case FamilyId::gaussian: theta = std::sin(M_PI * base_target / 2.0); break;
        case FamilyId::clayton: theta = 2.0 * base_target / (1.0 - base_target); break;
        case FamilyId::gumbel: theta = 1.0 / (1.0 - base_target); break;
        case FamilyId::frank:
            theta = detail::base_tau_inverse(f, std::abs(base_target));
            if (base_target < 0)
                theta = -theta;
            break;
        case FamilyId::joe: theta = detail::base_tau_inverse(f, base_target); break;
        default: theta = 0.0;
    }
    auto b = param_bounds(f);
    if (f == FamilyId::frank)
        theta = std::copysign(std::clamp(std::abs(theta), b.lo, b.hi), theta);
    else
        theta = std::clamp(theta, b.lo, b.hi);
    return PairCopulaSpec{f, rot, theta};
}

//! outcome of a single-family maximum-likelihood fit
struct FitReport {
    PairCopulaSpec spec;
    double loglik = 0.0;
    int iterations = 0;
    bool converged = true;
    long clamp_events = 0;
};

namespace detail {

//! initial theta from the sample tau, clamped into the attainable range
inline PairCopulaSpec init_from_tau(FamilyId f, Rotation rot, double tau_hat)
{
    if (f == FamilyId::independence)
        return independence_spec();
    auto range = tau_range(f, rot);
    double margin = 0.02 * (range.second - range.first);
    double tau = std::clamp(tau_hat, range.first + margin, range.second - margin);
    return tau_to_param(f, rot, tau);
}

//! Brent search over theta; frank picks the sign interval from tau_hat
template <class LogLik>
FitReport fit_theta(FamilyId f, Rotation rot, double tau_hat, LogLik&& ll)
{
    if (f == FamilyId::independence) {
        FitReport rep;
        rep.spec = independence_spec();
        rep.loglik = ll(rep.spec);
        return rep;
    }
    auto b = param_bounds(f);
    double lo = b.lo, hi = b.hi;
    if (f == FamilyId::frank && tau_hat < 0.0) {
        lo = -b.hi;
        hi = -b.lo;
    }
    PairCopulaSpec init = init_from_tau(f, rot, tau_hat);
    auto obj = [&](double t) {
        return ll(PairCopulaSpec{f, rot, t});
    };
    auto r = num::brent_maximize(obj, lo, hi, init.theta, 1e-6, 200);
    FitReport rep;
    rep.spec = PairCopulaSpec{f, rot, r.x};
    rep.loglik = r.fx;
    rep.iterations = r.iterations;
    rep.converged = r.converged;
    if (!r.converged)
        throw fit_error(std::string("theta search did not converge for ") +
                            family_name(f),
                        r.x);
    return rep;
}

} // namespace detail

//! MLE of theta for one family/rotation on strictly continuous copula data
inline FitReport fit_mle_continuous(
    FamilyId family, Rotation rotation,
    const std::vector<std::pair<double, double>>& data)
{
    if (data.size() < 10)
        throw input_error("fit_mle_continuous: need at least 10 pairs");
    std::vector<double> us(data.size()), vs(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        us[i] = data[i].first;
        vs[i] = data[i].second;
        if (!(us[i] > 0.0 && us[i] < 1.0 && vs[i] > 0.0 && vs[i] < 1.0))
            throw input_error("fit_mle_continuous: data must lie strictly inside (0,1)^2");
    }
    double tau_hat = num::kendall_tau(us, vs);
    long clamps = 0;
    auto ll = [&](const PairCopulaSpec& spec) {
        double s = 0.0;
        for (std::size_t i = 0; i < data.size(); ++i) {
            double d = pdf(spec, us[i], vs[i]);
            if (d < num::log_floor)
                ++clamps;
            s += num::safe_log(d);
        }
        return s;
    };
    auto rep = detail::fit_theta(family, rotation, tau_hat, ll);
    rep.clamp_events = clamps;
    return rep;
}

//! the default candidate set: independence, gaussian and frank (which cover
//! negative dependence through the parameter sign), and the asymmetric
//! families in all four rotations
inline std::vector<std::pair<FamilyId, Rotation>> default_candidates()
{
    std::vector<std::pair<FamilyId, Rotation>> out;
    out.emplace_back(FamilyId::independence, Rotation::r0);
    out.emplace_back(FamilyId::gaussian, Rotation::r0);
    out.emplace_back(FamilyId::frank, Rotation::r0);
    for (FamilyId f : {FamilyId::clayton, FamilyId::gumbel, FamilyId::joe})
        for (Rotation r : {Rotation::r0, Rotation::r90, Rotation::r180,
                           Rotation::r270})
            out.emplace_back(f, r);
    return out;
}

//! deterministic tie-break order: family precedence, then lower rotation
inline int candidate_rank(FamilyId f, Rotation r)
{
    return static_cast<int>(f) * 4 + static_cast<int>(r) / 90;
}

} // namespace bicop
} // namespace dvqr
