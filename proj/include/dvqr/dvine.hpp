#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "dvqr/margins.hpp"
#include "dvqr/mixedpair.hpp"
#include "dvqr/npcop.hpp"
#include "dvqr/num.hpp"
#include "dvqr/types.hpp"

//! D-vine quantile regression: forward covariate selection, conditional
//! distribution evaluation, and quantile prediction for mixed
//! discrete-continuous data, parametric or nonparametric.
//!
//! The response is the first node of the D-vine path. Fitting appends one
//! covariate at a time as the new last node; each tentative extension fits
//! exactly one new pair-copula per existing tree level and is accepted only
//! if it strictly improves the penalized conditional log-likelihood.
namespace dvqr {
namespace dvine {

enum class Mode { parametric, nonparametric };

inline const char* mode_name(Mode m)
{
    return m == Mode::parametric ? "parametric" : "nonparametric";
}

inline Mode mode_from_name(const std::string& s)
{
    if (s == "parametric")
        return Mode::parametric;
    if (s == "nonparametric")
        return Mode::nonparametric;
    throw input_error("unknown mode: " + s);
}

//! one pair-copula in the array: a parametric spec or a kernel estimate
struct PairModel {
    std::variant<bicop::PairCopulaSpec, npcop::KernelCopula> impl;

    bool parametric() const
    {
        return std::holds_alternative<bicop::PairCopulaSpec>(impl);
    }

    const bicop::PairCopulaSpec& spec() const
    {
        return std::get<bicop::PairCopulaSpec>(impl);
    }

    const npcop::KernelCopula& kernel() const
    {
        return std::get<npcop::KernelCopula>(impl);
    }

    //! independence contributes no parameters, any other parametric family
    //! one, a kernel pair the configured effective count
    double param_count(double np_pair_params) const
    {
        if (!parametric())
            return np_pair_params;
        return spec().family == bicop::FamilyId::independence ? 0.0 : 1.0;
    }

    PseudoObs transform(const PseudoObs& target, const PseudoObs& given,
                        bicop::Direction dir) const
    {
        if (parametric())
            return mixedpair::cond_transform(spec(), target, given, dir);
        double u = npcop::kc_hfunc(kernel(), target.u, given.u, dir);
        return PseudoObs(u, u, false);
    }

    //! log of the conditional-density factor d C_{V|..,U}(v) / d C_{V|..}(v)
    //! contributed by conditioning a continuous response on `given`
    double log_factor_continuous(const PseudoObs& resp, const PseudoObs& given,
                                 mixedpair::LoglikStats* stats) const
    {
        if (!parametric())
            return num::safe_log(npcop::kc_pdf(kernel(), resp.u, given.u));
        if (!given.discrete)
            return num::safe_log(bicop::pdf(spec(), resp.u, given.u));
        double hi = bicop::hfunc(spec(), given.u, resp.u,
                                 bicop::Direction::second_given_first);
        double lo = bicop::hfunc(spec(), given.uminus, resp.u,
                                 bicop::Direction::second_given_first);
        double mass = (hi - lo) / given.mass();
        if (mass < num::log_floor && stats)
            ++stats->clamp_events;
        return num::safe_log(mass);
    }
};

//! fitting configuration
struct FitOptions {
    Mode mode = Mode::parametric;
    Criterion penalty = Criterion::aic; // covariate-selection criterion
    Criterion pair_criterion = Criterion::aic; // per-pair family selection
    double indep_test_level = 0.05;
    std::uint64_t seed = 0;
    int jitter_replicates = 1;
    double np_pair_params = 5.0; // effective parameters per kernel pair
    std::vector<std::pair<bicop::FamilyId, bicop::Rotation>> candidates =
        bicop::default_candidates();
    std::size_t max_discrete_levels = 50;
};

//! one fitted vine (one jitter replicate in nonparametric mode)
struct VineFit {
    margins::MarginalModel resp_margin;
    std::vector<margins::MarginalModel> cov_margins; // parallel to order
    std::vector<std::size_t> order; // selected covariate indices
    // pairs[t-1][e]: tree t edge e, connecting path nodes e and e+t
    // (node 0 is the response); edge 0 is the response edge
    std::vector<std::vector<PairModel>> pairs;
    double cll = 0.0;
    double penalized_cll = 0.0;
    double param_count = 0.0;
    long clamp_events = 0;
    std::uint64_t jitter_seed = 0;
    // original supports of jittered columns (nonparametric mode decode)
    std::vector<std::vector<double>> cov_support;
    std::vector<double> resp_support;
};

//! fitted D-vine regression model
struct DVineRegModel {
    Mode mode = Mode::parametric;
    Criterion penalty = Criterion::aic;
    std::uint64_t seed = 0;
    int jitter_replicates = 1;
    double np_pair_params = 5.0;
    bool response_discrete = false;
    std::string response_name;
    std::vector<std::string> covariate_names; // all offered covariates
    std::vector<margins::Kind> covariate_kinds;
    std::vector<VineFit> fits; // one entry per jitter replicate
    bool selected_none = false;
    std::vector<std::string> warnings;

    const std::vector<std::size_t>& order() const { return fits.front().order; }

    double cll() const
    {
        double s = 0.0;
        for (const auto& f : fits)
            s += f.cll;
        return s / static_cast<double>(fits.size());
    }

    double penalized_cll() const
    {
        double s = 0.0;
        for (const auto& f : fits)
            s += f.penalized_cll;
        return s / static_cast<double>(fits.size());
    }
};

//! a batch quantile request: strictly increasing levels inside (0,1)
struct QuantileRequest {
    std::vector<double> alphas;

    void validate() const
    {
        if (alphas.empty())
            throw request_error("quantile request: no alpha levels");
        double prev = 0.0;
        for (double a : alphas) {
            if (!(a > 0.0 && a < 1.0))
                throw request_error("quantile request: alpha outside (0,1)");
            if (a < prev)
                throw request_error("quantile request: alphas must be sorted");
            prev = a;
        }
    }
};

namespace detail {

inline double criterion_score(Criterion c, double cll, double params,
                              double n)
{
    switch (c) {
        case Criterion::cll: return cll;
        case Criterion::aic: return cll - params;
        case Criterion::bic: return cll - 0.5 * std::log(n) * params;
    }
    return cll;
}

//! per-observation pseudo-data state during the forward selection
struct SelectionState {
    std::vector<PseudoObs> resp_cond; // C_{V | selected}
    // fwd_full[i]: node at path position i+1 conditioned on its successors
    std::vector<std::vector<PseudoObs>> fwd_full;
    double cll = 0.0;
    double params = 0.0;
    long clamps = 0;
};

//! outcome of tentatively appending one covariate as the new last node
struct CandidateFit {
    std::vector<PairModel> new_pairs; // tree 1 .. m+1
    std::vector<std::vector<PseudoObs>> chain; // conditioned candidate obs
    double delta_cll = 0.0;
    double new_params = 0.0;
    long clamps = 0;
    bool ok = false;
};

} // namespace detail

//! evaluates the conditional CDF chain for one observation row.
//! Returns the final response pseudo-observation; when `factors` is given,
//! accumulates the log conditional-density factors for a continuous
//! response along the way.
inline PseudoObs propagate_response(
    const VineFit& fit, const PseudoObs& resp,
    const std::vector<PseudoObs>& cond_g, double* log_density = nullptr,
    mixedpair::LoglikStats* stats = nullptr)
{
    PseudoObs a = resp;
    for (std::size_t t = 0; t < cond_g.size(); ++t) {
        const PairModel& pm = fit.pairs[t][0];
        if (log_density && !resp.discrete)
            *log_density += pm.log_factor_continuous(a, cond_g[t], stats);
        a = pm.transform(a, cond_g[t], bicop::Direction::first_given_second);
    }
    return a;
}

//! conditioned covariate pseudo-observations C_{N_t | N_1..N_{t-1}} for one
//! observation row, from the inner edges of the pair array
inline std::vector<PseudoObs> conditioned_covariates(
    const VineFit& fit, const std::vector<PseudoObs>& cov_obs)
{
    const std::size_t k = cov_obs.size();
    std::vector<PseudoObs> out(k);
    if (k == 0)
        return out;
    out[0] = cov_obs[0];
    // double-array recursion over the covariate path nodes 1..k
    std::vector<PseudoObs> fwd = cov_obs, bwd = cov_obs;
    for (std::size_t t = 1; t < k; ++t) {
        // after this loop: bwd[j] = C_{N_{j+1} | previous t nodes}
        std::vector<PseudoObs> nfwd = fwd, nbwd = bwd;
        for (std::size_t e = 0; e + t < k; ++e) {
            const PairModel& pm = fit.pairs[t - 1][e + 1];
            nfwd[e] = pm.transform(fwd[e], bwd[e + t],
                                   bicop::Direction::first_given_second);
            nbwd[e + t] = pm.transform(bwd[e + t], fwd[e],
                                       bicop::Direction::second_given_first);
        }
        fwd = std::move(nfwd);
        bwd = std::move(nbwd);
        out[t] = bwd[t];
    }
    return out;
}

namespace detail {

//! margins and pseudo-observations for the fitting data
struct PreparedData {
    margins::MarginalModel resp_margin;
    std::vector<PseudoObs> resp_obs;
    std::vector<margins::MarginalModel> cov_margins;
    std::vector<std::vector<PseudoObs>> cov_obs;
    std::vector<std::size_t> usable; // covariate indices with valid margins
    std::vector<std::vector<double>> cov_support;
    std::vector<double> resp_support;
    std::vector<std::string> warnings;
};

inline std::vector<double> sorted_support(const std::vector<double>& col)
{
    std::vector<double> s(col);
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    return s;
}

//! jitter a discrete column onto the continuous code scale
inline std::vector<double> jitter_codes(const std::vector<double>& col,
                                        const std::vector<double>& support,
                                        std::uint64_t seed)
{
    std::vector<double> codes(col.size());
    for (std::size_t i = 0; i < col.size(); ++i)
        codes[i] = static_cast<double>(npcop::rank_code(support, col[i]));
    npcop::JitterSpec js;
    js.seed = seed;
    return npcop::jitter(codes, js);
}

inline PreparedData prepare(const std::vector<std::vector<double>>& columns,
                            const std::vector<margins::Kind>& kinds,
                            std::size_t response_col, const FitOptions& opts,
                            std::uint64_t jitter_seed)
{
    PreparedData out;
    const bool np = opts.mode == Mode::nonparametric;

    auto fit_one = [&](const std::vector<double>& col, margins::Kind kind,
                       std::size_t col_index, std::vector<double>& support_out)
        -> std::pair<margins::MarginalModel, std::vector<PseudoObs>> {
        if (np && kind == margins::Kind::discrete) {
            auto support = sorted_support(col);
            if (support.size() < 2)
                throw degenerate_margin_error("constant column");
            if (support.size() > opts.max_discrete_levels)
                throw input_error("too many discrete levels");
            auto jittered = jitter_codes(
                col, support, num::derive_seed(jitter_seed, col_index));
            auto margin =
                margins::fit_margin(jittered, margins::Kind::continuous);
            std::vector<PseudoObs> obs(jittered.size());
            for (std::size_t i = 0; i < jittered.size(); ++i)
                obs[i] = margin.pit(jittered[i]);
            support_out = support;
            return {std::move(margin), std::move(obs)};
        }
        auto margin = margins::fit_margin(col, kind, opts.max_discrete_levels);
        std::vector<PseudoObs> obs(col.size());
        for (std::size_t i = 0; i < col.size(); ++i)
            obs[i] = margin.pit(col[i]);
        return {std::move(margin), std::move(obs)};
    };

    auto [rm, ro] = fit_one(columns[response_col], kinds[response_col],
                            response_col, out.resp_support);
    out.resp_margin = std::move(rm);
    out.resp_obs = std::move(ro);

    std::size_t cov_counter = 0;
    for (std::size_t j = 0; j < columns.size(); ++j) {
        if (j == response_col)
            continue;
        std::size_t cov_index = cov_counter++;
        std::vector<double> support;
        try {
            auto [m, o] = fit_one(columns[j], kinds[j], j, support);
            out.cov_margins.push_back(std::move(m));
            out.cov_obs.push_back(std::move(o));
            out.cov_support.push_back(std::move(support));
            out.usable.push_back(cov_index);
        } catch (const degenerate_margin_error&) {
            out.warnings.push_back("covariate column skipped (degenerate)");
        }
    }
    return out;
}

//! fit one pair (parametric family sweep or kernel) on pseudo-data
inline std::pair<PairModel, long> fit_pair(
    const std::vector<PseudoObs>& first, const std::vector<PseudoObs>& second,
    const FitOptions& opts)
{
    std::vector<std::pair<PseudoObs, PseudoObs>> data(first.size());
    for (std::size_t i = 0; i < first.size(); ++i)
        data[i] = {first[i], second[i]};

    if (opts.mode == Mode::nonparametric) {
        // the independence gate also prunes kernel pairs
        if (opts.indep_test_level > 0.0 &&
            mixedpair::indep_test_pvalue(data) > opts.indep_test_level)
            return {PairModel{bicop::independence_spec()}, 0};
        std::vector<std::pair<double, double>> uv(first.size());
        for (std::size_t i = 0; i < first.size(); ++i)
            uv[i] = {num::clamp_unit(first[i].u),
                     num::clamp_unit(second[i].u)};
        return {PairModel{npcop::fit_kernel_copula(uv)}, 0};
    }
    auto sel = mixedpair::select_family(data, opts.pair_criterion,
                                        opts.candidates,
                                        opts.indep_test_level);
    return {PairModel{sel.best.spec}, sel.best.clamp_events};
}

//! tentatively append one covariate; fits one new pair per tree level
inline CandidateFit evaluate_candidate(const SelectionState& st,
                                       const std::vector<PseudoObs>& cand_obs,
                                       bool resp_discrete,
                                       const FitOptions& opts)
{
    const std::size_t m = st.fwd_full.size();
    const std::size_t n = cand_obs.size();
    CandidateFit out;
    out.chain.reserve(m + 1);
    out.chain.push_back(cand_obs);
    try {
        for (std::size_t t = 1; t <= m; ++t) {
            const auto& left = st.fwd_full[m - t]; // node at position m-t+1
            auto [pm, clamps] = fit_pair(left, out.chain[t - 1], opts);
            out.clamps += clamps;
            std::vector<PseudoObs> next(n);
            for (std::size_t i = 0; i < n; ++i)
                next[i] =
                    pm.transform(out.chain[t - 1][i], left[i],
                                 bicop::Direction::second_given_first);
            out.new_pairs.push_back(std::move(pm));
            out.chain.push_back(std::move(next));
        }
        auto [vpair, vclamps] = fit_pair(st.resp_cond, out.chain[m], opts);
        out.clamps += vclamps;

        mixedpair::LoglikStats stats;
        double delta = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const PseudoObs& a = st.resp_cond[i];
            const PseudoObs& g = out.chain[m][i];
            if (resp_discrete) {
                PseudoObs next = vpair.transform(
                    a, g, bicop::Direction::first_given_second);
                delta += num::safe_log(next.mass()) - num::safe_log(a.mass());
            } else {
                delta += vpair.log_factor_continuous(a, g, &stats);
            }
        }
        out.clamps += stats.clamp_events;
        out.new_pairs.push_back(std::move(vpair));
        out.delta_cll = delta;
        for (const auto& pm : out.new_pairs)
            out.new_params += pm.param_count(opts.np_pair_params);
        out.ok = true;
    } catch (const error&) {
        out.ok = false;
    }
    return out;
}

inline std::vector<PseudoObs> transform_all(
    const std::vector<PseudoObs>& targets,
    const std::vector<PseudoObs>& givens, const PairModel& pm,
    bicop::Direction dir)
{
    std::vector<PseudoObs> out(targets.size());
    for (std::size_t i = 0; i < targets.size(); ++i)
        out[i] = pm.transform(targets[i], givens[i], dir);
    return out;
}

//! the forward-selection loop for one prepared dataset
inline VineFit fit_one_vine(const PreparedData& data, bool resp_discrete,
                            const FitOptions& opts, std::uint64_t jitter_seed,
                            std::vector<std::string>& warnings)
{
    const std::size_t n = data.resp_obs.size();
    VineFit fit;
    fit.resp_margin = data.resp_margin;
    fit.resp_support = data.resp_support;
    fit.jitter_seed = jitter_seed;

    // in nonparametric mode all pseudo-observations are continuous
    bool resp_disc_eff = resp_discrete && opts.mode == Mode::parametric;

    SelectionState st;
    st.resp_cond = data.resp_obs;
    if (resp_disc_eff) {
        for (const auto& o : data.resp_obs)
            st.cll += num::safe_log(o.mass());
    }

    std::vector<std::size_t> pool = data.usable;
    while (!pool.empty()) {
        double current_score = criterion_score(
            opts.penalty, st.cll, st.params, static_cast<double>(n));
        std::vector<CandidateFit> cands(pool.size());
        for (std::size_t c = 0; c < pool.size(); ++c)
            cands[c] = evaluate_candidate(st, data.cov_obs[pool[c]],
                                          resp_disc_eff, opts);

        // strict improvement required; ties below 1e-9 go to the lowest
        // original column index
        std::ptrdiff_t best = -1;
        double best_score = 0.0;
        for (std::size_t c = 0; c < cands.size(); ++c) {
            if (!cands[c].ok)
                continue;
            double score = criterion_score(opts.penalty,
                                           st.cll + cands[c].delta_cll,
                                           st.params + cands[c].new_params,
                                           static_cast<double>(n));
            if (score <= current_score)
                continue;
            bool better =
                best < 0 || score > best_score + 1e-9 ||
                (score > best_score - 1e-9 &&
                 pool[c] < pool[static_cast<std::size_t>(best)]);
            if (better) {
                best = static_cast<std::ptrdiff_t>(c);
                best_score = score;
            }
        }
        if (best < 0)
            break;

        auto& won = cands[static_cast<std::size_t>(best)];
        const std::size_t m = st.fwd_full.size();
        const std::size_t cov = pool[static_cast<std::size_t>(best)];

        // new anti-diagonal: the pair at tree t is always the currently
        // last edge of that tree; tree m+1 is created with the response edge
        for (std::size_t t = 1; t <= m; ++t)
            fit.pairs[t - 1].push_back(won.new_pairs[t - 1]);
        fit.pairs.push_back({won.new_pairs[m]});

        // extend the cached forward pseudo-observations one level
        for (std::size_t i = 0; i < m; ++i) {
            const PairModel& pm = won.new_pairs[m - i - 1];
            st.fwd_full[i] =
                transform_all(st.fwd_full[i], won.chain[m - i - 1], pm,
                              bicop::Direction::first_given_second);
        }
        st.fwd_full.push_back(won.chain[0]);
        st.resp_cond =
            transform_all(st.resp_cond, won.chain[m], won.new_pairs[m],
                          bicop::Direction::first_given_second);
        st.cll += won.delta_cll;
        st.params += won.new_params;
        st.clamps += won.clamps;

        fit.order.push_back(cov);
        fit.cov_margins.push_back(data.cov_margins[cov]);
        fit.cov_support.push_back(data.cov_support[cov]);
        pool.erase(pool.begin() + best);
    }

    fit.cll = st.cll;
    fit.param_count = st.params;
    fit.clamp_events = st.clamps;
    fit.penalized_cll = criterion_score(opts.penalty, st.cll, st.params,
                                        static_cast<double>(n));
    if (fit.order.empty())
        warnings.push_back("no covariate improved the penalized cll");
    return fit;
}

//! pseudo-observations of one covariate vector (selected covariates only)
inline std::vector<PseudoObs> pit_covariates(const VineFit& fit, Mode mode,
                                             const std::vector<margins::Kind>& kinds,
                                             const std::vector<std::size_t>& order,
                                             const std::vector<double>& x)
{
    std::vector<PseudoObs> obs(order.size());
    for (std::size_t t = 0; t < order.size(); ++t) {
        double val = x[order[t]];
        if (mode == Mode::nonparametric &&
            kinds[order[t]] == margins::Kind::discrete) {
            // condition the jittered margin at the rank code of the value
            double code = static_cast<double>(
                npcop::rank_code(fit.cov_support[t], val));
            obs[t] = PseudoObs::continuous(
                fit.cov_margins[t].as_continuous().cdf(code));
        } else {
            obs[t] = fit.cov_margins[t].pit(val);
        }
    }
    return obs;
}

} // namespace detail

//! fits a D-vine regression model.
//! columns are column-major; kinds declares each column's type; names are
//! optional column labels (defaults c0, c1, ...).
inline DVineRegModel fit(const std::vector<std::vector<double>>& columns,
                         const std::vector<margins::Kind>& kinds,
                         std::size_t response_col,
                         const FitOptions& opts = {},
                         std::vector<std::string> names = {})
{
    if (columns.empty() || columns.size() < 2)
        throw input_error("fit: need a response and at least one covariate");
    if (kinds.size() != columns.size())
        throw schema_error("fit: one kind per column required");
    if (response_col >= columns.size())
        throw schema_error("fit: response column out of range");
    const std::size_t n = columns[0].size();
    for (const auto& c : columns)
        if (c.size() != n)
            throw schema_error("fit: ragged columns");
    if (n < 30)
        throw input_error("fit: need at least 30 rows");
    if (names.empty()) {
        for (std::size_t j = 0; j < columns.size(); ++j)
            names.push_back("c" + std::to_string(j));
    }
    if (names.size() != columns.size())
        throw schema_error("fit: one name per column required");

    DVineRegModel model;
    model.mode = opts.mode;
    model.penalty = opts.penalty;
    model.seed = opts.seed;
    model.jitter_replicates =
        opts.mode == Mode::nonparametric ? std::max(1, opts.jitter_replicates)
                                         : 1;
    model.np_pair_params = opts.np_pair_params;
    model.response_discrete = kinds[response_col] == margins::Kind::discrete;
    model.response_name = names[response_col];
    for (std::size_t j = 0; j < columns.size(); ++j) {
        if (j == response_col)
            continue;
        model.covariate_names.push_back(names[j]);
        model.covariate_kinds.push_back(kinds[j]);
    }

    for (int r = 0; r < model.jitter_replicates; ++r) {
        std::uint64_t jseed = num::derive_seed(opts.seed, 1000003ULL +
                                                              static_cast<std::uint64_t>(r));
        auto data = detail::prepare(columns, kinds, response_col, opts, jseed);
        for (const auto& w : data.warnings)
            model.warnings.push_back(w);
        model.fits.push_back(detail::fit_one_vine(
            data, model.response_discrete, opts, jseed, model.warnings));
    }
    model.selected_none = model.fits.front().order.empty();
    return model;
}

//! conditional CDF of the response's copula-scale value given covariates.
//! v carries a left limit when the response is discrete.
inline double cond_cdf(const DVineRegModel& model, const PseudoObs& v,
                       const std::vector<double>& x)
{
    if (x.size() != model.covariate_names.size())
        throw schema_error("cond_cdf: covariate vector has the wrong length");
    double total = 0.0;
    for (const auto& fit : model.fits) {
        auto cov_obs = detail::pit_covariates(fit, model.mode,
                                              model.covariate_kinds,
                                              fit.order, x);
        auto cond_g = conditioned_covariates(fit, cov_obs);
        total += propagate_response(fit, v, cond_g).u;
    }
    return total / static_cast<double>(model.fits.size());
}

//! convenience overload: continuous copula-scale value
inline double cond_cdf(const DVineRegModel& model, double v,
                       const std::vector<double>& x)
{
    return cond_cdf(model, PseudoObs::continuous(v), x);
}

namespace detail {

//! copula-scale conditional quantile for one fit, one alpha.
//! lo_hint warm-starts the bisection for ascending alpha batches.
inline double conditional_quantile_u(const VineFit& fit, bool closed_form,
                                     const std::vector<PseudoObs>& cond_g,
                                     double alpha, double lo_hint)
{
    if (fit.order.empty())
        return alpha;
    if (closed_form) {
        // invert the h-function chain from the deepest tree outward
        double p = alpha;
        for (std::size_t t = cond_g.size(); t-- > 0;) {
            const PairModel& pm = fit.pairs[t][0];
            if (pm.parametric())
                p = bicop::hinv(pm.spec(), p, num::clamp_unit(cond_g[t].u),
                                bicop::Direction::first_given_second);
            else
                p = npcop::kc_hinv(pm.kernel(), p, cond_g[t].u,
                                   bicop::Direction::first_given_second);
        }
        return p;
    }
    auto f = [&](double v) {
        return propagate_response(fit, PseudoObs::continuous(v), cond_g).u -
               alpha;
    };
    // halving [1e-10, 1-1e-10] sixty times guarantees 1e-8 precision
    double lo = std::max(num::unit_eps, lo_hint);
    if (f(lo) > 0.0)
        lo = num::unit_eps;
    return num::bisect_root(f, lo, 1.0 - num::unit_eps, 1e-10, 1e-12, 60);
}

} // namespace detail

//! predicted conditional quantiles of the response at each alpha, for one
//! covariate vector. Output is nondecreasing across the sorted levels.
inline std::vector<double> predict_quantile(const DVineRegModel& model,
                                            const QuantileRequest& req,
                                            const std::vector<double>& x)
{
    req.validate();
    if (x.size() != model.covariate_names.size())
        throw schema_error("predict: covariate vector has the wrong length");

    const bool discrete_resp = model.response_discrete;
    std::vector<double> out(req.alphas.size(), 0.0);

    if (model.mode == Mode::parametric) {
        const VineFit& fit = model.fits.front();
        auto cov_obs = detail::pit_covariates(fit, model.mode,
                                              model.covariate_kinds,
                                              fit.order, x);
        auto cond_g = conditioned_covariates(fit, cov_obs);

        if (discrete_resp) {
            // smallest support value whose conditional CDF reaches alpha;
            // the tolerance keeps exact ties independent of rounding noise
            const auto& dm = fit.resp_margin.as_discrete();
            std::size_t idx = 0;
            for (std::size_t a = 0; a < req.alphas.size(); ++a) {
                double alpha = req.alphas[a];
                while (idx + 1 < dm.support.size()) {
                    PseudoObs v(dm.cdf_at_index(idx),
                                dm.left_limit_at_index(idx), true);
                    if (propagate_response(fit, v, cond_g).u >= alpha - 1e-9)
                        break;
                    ++idx;
                }
                out[a] = dm.support[idx];
            }
            return out;
        }

        bool all_continuous = true;
        for (const auto& g : cond_g)
            all_continuous = all_continuous && !g.discrete;
        double prev_u = num::unit_eps;
        for (std::size_t a = 0; a < req.alphas.size(); ++a) {
            double u = detail::conditional_quantile_u(
                fit, all_continuous, cond_g, req.alphas[a], prev_u);
            u = std::max(u, prev_u);
            prev_u = u;
            out[a] = fit.resp_margin.quantile(u);
        }
        for (std::size_t a = 1; a < out.size(); ++a)
            out[a] = std::max(out[a], out[a - 1]);
        return out;
    }

    // nonparametric mode: closed-form inverse recursion on the jittered
    // scale, averaged over jitter replicates, then de-jittered
    std::vector<double> acc(req.alphas.size(), 0.0);
    for (const auto& fit : model.fits) {
        auto cov_obs = detail::pit_covariates(fit, model.mode,
                                              model.covariate_kinds,
                                              fit.order, x);
        auto cond_g = conditioned_covariates(fit, cov_obs);
        for (std::size_t a = 0; a < req.alphas.size(); ++a) {
            double u = detail::conditional_quantile_u(fit, true, cond_g,
                                                      req.alphas[a], 0.0);
            acc[a] += fit.resp_margin.quantile(num::clamp_unit(u));
        }
    }
    for (auto& q : acc)
        q /= static_cast<double>(model.fits.size());
    for (std::size_t a = 1; a < acc.size(); ++a)
        acc[a] = std::max(acc[a], acc[a - 1]);

    if (!discrete_resp)
        return acc;
    // round the averaged code-scale quantile to the nearest support value,
    // ties upward
    const auto& support = model.fits.front().resp_support;
    for (std::size_t a = 0; a < acc.size(); ++a) {
        double code = std::floor(acc[a] + 0.5);
        code = std::clamp(code, 0.0,
                          static_cast<double>(support.size() - 1));
        out[a] = support[static_cast<std::size_t>(code)];
    }
    return out;
}

//! conditional log-likelihood of a dataset under a fitted model
inline double cll(const DVineRegModel& model,
                  const std::vector<std::vector<double>>& columns,
                  std::size_t response_col)
{
    const std::size_t n = columns.at(response_col).size();
    std::vector<std::size_t> cov_cols;
    for (std::size_t j = 0; j < columns.size(); ++j)
        if (j != response_col)
            cov_cols.push_back(j);
    if (cov_cols.size() != model.covariate_names.size())
        throw schema_error("cll: column count does not match the model");

    double total = 0.0;
    for (const auto& fit : model.fits) {
        double fit_cll = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> x(cov_cols.size());
            for (std::size_t j = 0; j < cov_cols.size(); ++j)
                x[j] = columns[cov_cols[j]][i];
            double y = columns[response_col][i];

            auto cov_obs = detail::pit_covariates(fit, model.mode,
                                                  model.covariate_kinds,
                                                  fit.order, x);
            auto cond_g = conditioned_covariates(fit, cov_obs);
            if (model.response_discrete && model.mode == Mode::parametric) {
                PseudoObs v = fit.resp_margin.pit(y);
                PseudoObs end = propagate_response(fit, v, cond_g);
                fit_cll += num::safe_log(end.mass());
            } else if (model.mode == Mode::parametric) {
                PseudoObs v = fit.resp_margin.pit(y);
                double logf = 0.0;
                propagate_response(fit, v, cond_g, &logf);
                fit_cll += logf;
            } else {
                // jittered scale: evaluate at the code midpoint for discrete
                // responses, the raw value otherwise
                double yy = y;
                if (model.response_discrete)
                    yy = static_cast<double>(
                        npcop::rank_code(fit.resp_support, y));
                PseudoObs v = PseudoObs::continuous(
                    fit.resp_margin.as_continuous().cdf(yy));
                double logf = 0.0;
                propagate_response(fit, v, cond_g, &logf);
                fit_cll += logf;
            }
        }
        total += fit_cll;
    }
    return total / static_cast<double>(model.fits.size());
}

//! AIC/BIC-penalized conditional log-likelihood
inline double penalized_cll(const DVineRegModel& model,
                            const std::vector<std::vector<double>>& columns,
                            std::size_t response_col, Criterion penalty)
{
    double ll = cll(model, columns, response_col);
    double p = 0.0;
    for (const auto& fit : model.fits)
        p += fit.param_count;
    p /= static_cast<double>(model.fits.size());
    double n = static_cast<double>(columns.at(response_col).size());
    switch (penalty) {
        case Criterion::cll: return ll;
        case Criterion::aic: return -2.0 * ll + 2.0 * p;
        case Criterion::bic: return -2.0 * ll + std::log(n) * p;
    }
    return ll;
}

} // namespace dvine
} // namespace dvqr
