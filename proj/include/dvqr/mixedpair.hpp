#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "dvqr/bicop.hpp"
#include "dvqr/num.hpp"
#include "dvqr/types.hpp"

//! pair-copula likelihood and conditional transforms when either margin may
//! be discrete. Discrete coordinates contribute CDF differences (rectangle
//! masses) instead of densities, and conditioning on a discrete coordinate
//! uses the difference quotient over the conditioner's jump.
namespace dvqr {
namespace mixedpair {

using bicop::Direction;
using bicop::PairCopulaSpec;

//! counters surfaced by likelihood evaluations; clamp_events counts
//! rectangle masses at or below zero that were floored before the log
struct LoglikStats {
    long clamp_events = 0;
};

//! rectangle probability P(a.uminus < U1 <= a.u, b.uminus < U2 <= b.u)
inline double rect_mass(const PairCopulaSpec& spec, const PseudoObs& a,
                        const PseudoObs& b)
{
    return bicop::cdf(spec, a.u, b.u) - bicop::cdf(spec, a.uminus, b.u) -
           bicop::cdf(spec, a.u, b.uminus) +
           bicop::cdf(spec, a.uminus, b.uminus);
}

//! log density/mass of one observation pair under the spec:
//!   both continuous        -> log c(a.u, b.u)
//!   a discrete, b cont.    -> log [h(a.u|b.u) - h(a.uminus|b.u)]
//!   a cont., b discrete    -> symmetric
//!   both discrete          -> log rectangle mass
inline double pair_loglik_term(const PairCopulaSpec& spec, const PseudoObs& a,
                               const PseudoObs& b,
                               LoglikStats* stats = nullptr)
{
    double val;
    if (!a.discrete && !b.discrete) {
        val = bicop::pdf(spec, a.u, b.u);
    } else if (a.discrete && !b.discrete) {
        val = bicop::hfunc(spec, a.u, b.u, Direction::first_given_second) -
              bicop::hfunc(spec, a.uminus, b.u, Direction::first_given_second);
    } else if (!a.discrete && b.discrete) {
        val = bicop::hfunc(spec, b.u, a.u, Direction::second_given_first) -
              bicop::hfunc(spec, b.uminus, a.u, Direction::second_given_first);
    } else {
        val = rect_mass(spec, a, b);
    }
    if (val < num::log_floor) {
        if (stats)
            ++stats->clamp_events;
        val = num::log_floor;
    }
    return std::log(val);
}

//! pseudo-observation for the next tree: C_{target|given}.
//! Continuous conditioner applies the h-function; a discrete conditioner
//! applies the difference quotient over its jump (given.u - given.uminus).
//! direction states which copula slot the target occupies.
inline PseudoObs cond_transform(const PairCopulaSpec& spec,
                                const PseudoObs& target,
                                const PseudoObs& given, Direction dir)
{
    double u, uminus;
    if (!given.discrete) {
        u = bicop::hfunc(spec, target.u, given.u, dir);
        uminus = target.discrete
                     ? bicop::hfunc(spec, target.uminus, given.u, dir)
                     : u;
    } else {
        double denom = given.mass();
        if (denom < 1e-12)
            throw degenerate_conditioner_error(
                "cond_transform: discrete conditioner with zero mass");
        auto quotient = [&](double w) {
            double num_ = (dir == Direction::first_given_second)
                              ? bicop::cdf(spec, w, given.u) -
                                    bicop::cdf(spec, w, given.uminus)
                              : bicop::cdf(spec, given.u, w) -
                                    bicop::cdf(spec, given.uminus, w);
            return num_ / denom;
        };
        u = quotient(target.u);
        uminus = target.discrete ? quotient(target.uminus) : u;
    }
    u = std::clamp(u, 0.0, 1.0);
    uminus = std::clamp(uminus, 0.0, u);
    return PseudoObs(u, uminus, target.discrete);
}

//! MLE of theta for one family/rotation on mixed pseudo-observation pairs;
//! reduces exactly to the continuous MLE when no coordinate is discrete
inline bicop::FitReport fit_mixed(
    bicop::FamilyId family, bicop::Rotation rotation,
    const std::vector<std::pair<PseudoObs, PseudoObs>>& data)
{
    if (data.size() < 10)
        throw input_error("fit_mixed: need at least 10 pairs");
    std::vector<double> ma(data.size()), mb(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        ma[i] = 0.5 * (data[i].first.u + data[i].first.uminus);
        mb[i] = 0.5 * (data[i].second.u + data[i].second.uminus);
    }
    auto sd = [](const std::vector<double>& x) {
        double m = 0.0;
        for (double v : x)
            m += v;
        m /= static_cast<double>(x.size());
        double s = 0.0;
        for (double v : x)
            s += (v - m) * (v - m);
        return std::sqrt(s / static_cast<double>(x.size() - 1));
    };
    if (sd(ma) < 1e-9 || sd(mb) < 1e-9)
        throw degenerate_margin_error("fit_mixed: a margin is constant");

    double tau_hat = num::kendall_tau(ma, mb);
    LoglikStats stats;
    auto ll = [&](const PairCopulaSpec& spec) {
        double s = 0.0;
        for (const auto& [a, b] : data)
            s += pair_loglik_term(spec, a, b, &stats);
        return s;
    };
    auto rep = bicop::detail::fit_theta(family, rotation, tau_hat, ll);
    rep.clamp_events = stats.clamp_events;
    return rep;
}

//! outcome of a family-selection sweep
struct SelectionResult {
    bicop::FitReport best;
    bool fallback = false; // every candidate fit failed; independence used
    bool indep_by_test = false; // the pre-test short-circuited the sweep
    int failed_fits = 0;
};

//! two-sided p-value of the asymptotic Kendall's tau independence test
inline double indep_test_pvalue(
    const std::vector<std::pair<PseudoObs, PseudoObs>>& data)
{
    const double n = static_cast<double>(data.size());
    std::vector<double> xs(data.size()), ys(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        xs[i] = 0.5 * (data[i].first.u + data[i].first.uminus);
        ys[i] = 0.5 * (data[i].second.u + data[i].second.uminus);
    }
    double tau = num::kendall_tau(xs, ys);
    double z = 3.0 * tau * std::sqrt(n * (n - 1.0)) /
               std::sqrt(2.0 * (2.0 * n + 5.0));
    return 2.0 * (1.0 - num::pnorm(std::abs(z)));
}

//! fits every candidate and returns the one with the best criterion value.
//! A Kendall's tau independence pre-test (level indep_test_level, 0 turns it
//! off) short-circuits to the independence family, as in the usual
//! tree-wise vine selection algorithms. Parameter counts: independence 0,
//! every other family 1. Criterion ties below 1e-9 break by family
//! precedence, lower rotation first.
inline SelectionResult select_family(
    const std::vector<std::pair<PseudoObs, PseudoObs>>& data,
    Criterion criterion = Criterion::aic,
    const std::vector<std::pair<bicop::FamilyId, bicop::Rotation>>&
        candidates = bicop::default_candidates(),
    double indep_test_level = 0.05)
{
    if (candidates.empty())
        throw input_error("select_family: empty candidate set");
    const double n = static_cast<double>(data.size());

    if (indep_test_level > 0.0 &&
        indep_test_pvalue(data) > indep_test_level) {
        SelectionResult out;
        out.best.spec = bicop::independence_spec();
        LoglikStats stats;
        for (const auto& [a, b] : data)
            out.best.loglik += pair_loglik_term(out.best.spec, a, b, &stats);
        out.indep_by_test = true;
        return out;
    }
    auto score_of = [&](double ll, int n_par) {
        switch (criterion) {
            case Criterion::cll: return ll;
            case Criterion::aic: return ll - n_par;
            case Criterion::bic: return ll - 0.5 * std::log(n) * n_par;
        }
        return ll;
    };

    SelectionResult out;
    bool have_best = false;
    double best_score = 0.0;
    int best_rank = 0;
    for (const auto& [fam, rot] : candidates) {
        bicop::FitReport rep;
        try {
            rep = fit_mixed(fam, rot, data);
        } catch (const fit_error&) {
            ++out.failed_fits;
            continue;
        } catch (const tau_range_error&) {
            ++out.failed_fits;
            continue;
        } catch (const degenerate_margin_error&) {
            ++out.failed_fits;
            continue;
        }
        int n_par = fam == bicop::FamilyId::independence ? 0 : 1;
        double score = score_of(rep.loglik, n_par);
        int rank = bicop::candidate_rank(fam, rot);
        bool better = !have_best || score > best_score + 1e-9 ||
                      (score > best_score - 1e-9 && rank < best_rank);
        if (better) {
            out.best = rep;
            best_score = score;
            best_rank = rank;
            have_best = true;
        }
    }
    if (!have_best) {
        LoglikStats stats;
        bicop::FitReport rep;
        rep.spec = bicop::independence_spec();
        double s = 0.0;
        for (const auto& [a, b] : data)
            s += pair_loglik_term(rep.spec, a, b, &stats);
        rep.loglik = s;
        out.best = rep;
        out.fallback = true;
    }
    return out;
}

//! continuous convenience overload
inline SelectionResult select_family(
    const std::vector<std::pair<double, double>>& data,
    Criterion criterion = Criterion::aic,
    const std::vector<std::pair<bicop::FamilyId, bicop::Rotation>>&
        candidates = bicop::default_candidates(),
    double indep_test_level = 0.05)
{
    std::vector<std::pair<PseudoObs, PseudoObs>> obs;
    obs.reserve(data.size());
    for (const auto& [u, v] : data)
        obs.emplace_back(PseudoObs::continuous(u), PseudoObs::continuous(v));
    return select_family(obs, criterion, candidates, indep_test_level);
}

} // namespace mixedpair
} // namespace dvqr
