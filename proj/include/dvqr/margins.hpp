#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <variant>
#include <vector>

#include "dvqr/num.hpp"
#include "dvqr/types.hpp"

//! univariate marginal estimation and probability integral transforms.
//! Continuous margins use a Gaussian-kernel smoothed empirical CDF with the
//! normal-reference bandwidth; discrete margins use the raw empirical PMF.
//! All CDF outputs are rescaled by n/(n+1) to keep pseudo-observations off 1.
namespace dvqr {
namespace margins {

enum class Kind { continuous, discrete };

inline const char* kind_name(Kind k)
{
    return k == Kind::continuous ? "continuous" : "discrete";
}

inline Kind kind_from_name(const std::string& s)
{
    if (s == "continuous")
        return Kind::continuous;
    if (s == "discrete")
        return Kind::discrete;
    throw input_error("unknown column kind: " + s);
}

//! kernel CDF estimate of a continuous margin
struct ContinuousMargin {
    std::vector<double> sample; // sorted
    double bandwidth = 1.0;
    double scale = 1.0; // n/(n+1)

    //! smoothed empirical CDF, rescaled by n/(n+1)
    double cdf(double x) const
    {
        double s = 0.0;
        for (double xi : sample)
            s += num::pnorm((x - xi) / bandwidth);
        return scale * s / static_cast<double>(sample.size());
    }

    //! inverts the rescaled CDF by bisection (tolerance 1e-8).
    //! The rescaled CDF tops out at n/(n+1), so the request is clamped into
    //! the attainable range and extreme levels return finite extremes.
    double quantile(double alpha) const
    {
        double target = std::clamp(alpha, scale * 1e-12,
                                   scale * (1.0 - 1e-12));
        double lo = sample.front() - 6.0 * bandwidth;
        double hi = sample.back() + 6.0 * bandwidth;
        int guard = 0;
        while (cdf(lo) > target && guard++ < 100)
            lo -= (hi - lo);
        while (cdf(hi) < target && guard++ < 100)
            hi += (hi - lo);
        auto f = [&](double x) { return cdf(x) - target; };
        return num::bisect_root(f, lo, hi, 1e-8, 1e-14, 200);
    }
};

//! empirical PMF of a discrete margin on its observed support
struct DiscreteMargin {
    std::vector<double> support; // sorted distinct values
    std::vector<double> pmf;
    std::vector<double> cum; // unscaled cumulative, back() == 1
    double scale = 1.0;      // n/(n+1)

    //! index of the nearest support value, ties resolved upward
    std::size_t snap_index(double x) const
    {
        auto it = std::lower_bound(support.begin(), support.end(), x);
        if (it == support.begin())
            return 0;
        if (it == support.end())
            return support.size() - 1;
        std::size_t hi = static_cast<std::size_t>(it - support.begin());
        std::size_t lo = hi - 1;
        // tie (equidistant) goes to the upper neighbour
        return (x - support[lo] < support[hi] - x) ? lo : hi;
    }

    double cdf_at_index(std::size_t i) const { return scale * cum[i]; }

    double left_limit_at_index(std::size_t i) const
    {
        return i == 0 ? 0.0 : scale * cum[i - 1];
    }

    //! smallest support value y with rescaled CDF(y) >= alpha
    double quantile(double alpha) const
    {
        for (std::size_t i = 0; i < support.size(); ++i)
            if (cdf_at_index(i) >= alpha)
                return support[i];
        return support.back();
    }
};

//! a fitted univariate margin, continuous or discrete
struct MarginalModel {
    std::variant<ContinuousMargin, DiscreteMargin> impl;

    Kind kind() const
    {
        return std::holds_alternative<ContinuousMargin>(impl)
                   ? Kind::continuous
                   : Kind::discrete;
    }

    const ContinuousMargin& as_continuous() const
    {
        return std::get<ContinuousMargin>(impl);
    }

    const DiscreteMargin& as_discrete() const
    {
        return std::get<DiscreteMargin>(impl);
    }

    //! probability integral transform with left limit
    PseudoObs pit(double x) const
    {
        if (kind() == Kind::continuous) {
            return PseudoObs::continuous(as_continuous().cdf(x));
        }
        const auto& d = as_discrete();
        std::size_t i = d.snap_index(x);
        return PseudoObs(d.cdf_at_index(i), d.left_limit_at_index(i), true);
    }

    //! generalized inverse of the fitted CDF
    double quantile(double alpha) const
    {
        if (kind() == Kind::continuous)
            return as_continuous().quantile(alpha);
        return as_discrete().quantile(alpha);
    }
};

//! fits a margin of the declared kind.
//! Continuous: Gaussian-kernel CDF with Silverman's normal-reference
//! bandwidth 1.06 * sd * n^(-1/5). Discrete: empirical PMF on the observed
//! support (at most max_support distinct values).
inline MarginalModel fit_margin(const std::vector<double>& column, Kind kind,
                                std::size_t max_support = 50)
{
    const std::size_t n = column.size();
    if (n < 10)
        throw input_error("fit_margin: need at least 10 observations");
    for (double x : column)
        if (!std::isfinite(x))
            throw input_error("fit_margin: non-finite observation");

    if (kind == Kind::continuous) {
        ContinuousMargin m;
        m.sample = column;
        std::sort(m.sample.begin(), m.sample.end());
        double mean = 0.0;
        for (double x : m.sample)
            mean += x;
        mean /= static_cast<double>(n);
        double ss = 0.0;
        for (double x : m.sample)
            ss += (x - mean) * (x - mean);
        double sd = std::sqrt(ss / static_cast<double>(n - 1));
        if (sd <= 0.0)
            throw degenerate_margin_error("fit_margin: constant column");
        m.bandwidth = 1.06 * sd * std::pow(static_cast<double>(n), -0.2);
        m.scale = static_cast<double>(n) / static_cast<double>(n + 1);
        return MarginalModel{std::move(m)};
    }

    DiscreteMargin d;
    d.support = column;
    std::sort(d.support.begin(), d.support.end());
    d.support.erase(std::unique(d.support.begin(), d.support.end()),
                    d.support.end());
    if (d.support.size() < 2)
        throw degenerate_margin_error("fit_margin: constant column");
    if (d.support.size() > max_support)
        throw input_error("fit_margin: discrete column has more than " +
                          std::to_string(max_support) + " distinct values");
    d.pmf.assign(d.support.size(), 0.0);
    for (double x : column) {
        auto it = std::lower_bound(d.support.begin(), d.support.end(), x);
        d.pmf[static_cast<std::size_t>(it - d.support.begin())] += 1.0;
    }
    d.cum.resize(d.support.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < d.pmf.size(); ++i) {
        d.pmf[i] /= static_cast<double>(n);
        acc += d.pmf[i];
        d.cum[i] = acc;
    }
    d.cum.back() = 1.0;
    d.scale = static_cast<double>(n) / static_cast<double>(n + 1);
    return MarginalModel{std::move(d)};
}

//! a known discrete distribution (used when true margins are available)
inline MarginalModel exact_discrete_margin(std::vector<double> support,
                                           std::vector<double> pmf)
{
    DiscreteMargin d;
    d.support = std::move(support);
    d.pmf = std::move(pmf);
    d.cum.resize(d.pmf.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < d.pmf.size(); ++i) {
        acc += d.pmf[i];
        d.cum[i] = acc;
    }
    d.cum.back() = 1.0;
    d.scale = 1.0;
    return MarginalModel{std::move(d)};
}

//! integer-valued with few distinct values reads as discrete
inline Kind auto_detect_kind(const std::vector<double>& column,
                             std::size_t max_discrete = 20)
{
    std::vector<double> distinct(column);
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()),
                   distinct.end());
    if (distinct.size() > max_discrete)
        return Kind::continuous;
    for (double x : distinct)
        if (std::abs(x - std::round(x)) > 1e-9)
            return Kind::continuous;
    return Kind::discrete;
}

} // namespace margins
} // namespace dvqr
