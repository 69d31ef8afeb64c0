#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>

#include "dvqr/dvine.hpp"
#include "dvqr/model_io.hpp"
#include "testutil.hpp"

using namespace dvqr;
using bicop::FamilyId;
using bicop::PairCopulaSpec;
using bicop::Rotation;
using dvine::Mode;
using margins::Kind;
using nlohmann::json;

namespace {

//! exchangeable d-dimensional Clayton CDF (the enumeration oracle's core)
double clayton_mv_cdf(const std::vector<double>& u, double theta)
{
    double s = 0.0;
    for (double ui : u) {
        if (ui <= 0.0)
            return 0.0;
        s += std::pow(std::min(ui, 1.0), -theta);
    }
    s -= static_cast<double>(u.size()) - 1.0;
    return std::pow(s, -1.0 / theta);
}

//! joint PMF over a discrete grid by inclusion-exclusion over cell corners
struct JointPmf {
    std::vector<std::vector<double>> cdfs; // per variable: scaled cum values
    double theta = 1.0;

    double cell(const std::vector<std::size_t>& idx) const
    {
        const std::size_t d = idx.size();
        double total = 0.0;
        for (std::size_t mask = 0; mask < (std::size_t{1} << d); ++mask) {
            std::vector<double> corner(d);
            int sign = 1;
            bool zero = false;
            for (std::size_t j = 0; j < d; ++j) {
                if (mask & (std::size_t{1} << j)) {
                    sign = -sign;
                    if (idx[j] == 0) {
                        zero = true;
                        break;
                    }
                    corner[j] = cdfs[j][idx[j] - 1];
                } else {
                    corner[j] = cdfs[j][idx[j]];
                }
            }
            if (zero)
                continue;
            total += sign * clayton_mv_cdf(corner, theta);
        }
        return total;
    }
};

//! true binomial margin with exact CDF values
margins::MarginalModel binom_margin(int n_trials)
{
    std::vector<double> support, pmf;
    for (int k = 0; k <= n_trials; ++k) {
        support.push_back(static_cast<double>(k));
        pmf.push_back(num::binom_pmf(k, n_trials, 0.5));
    }
    return margins::exact_discrete_margin(support, pmf);
}

std::vector<double> scaled_cum(const margins::MarginalModel& m)
{
    const auto& d = m.as_discrete();
    std::vector<double> out(d.cum.size());
    for (std::size_t i = 0; i < d.cum.size(); ++i)
        out[i] = d.scale * d.cum[i];
    return out;
}

//! an injected two-variable model: V and one covariate, true clayton pair
dvine::DVineRegModel make_d2_model(int n_resp, int n_cov, double theta)
{
    dvine::DVineRegModel model;
    model.mode = Mode::parametric;
    model.response_discrete = true;
    model.response_name = "y";
    model.covariate_names = {"x1"};
    model.covariate_kinds = {Kind::discrete};
    dvine::VineFit fit;
    fit.resp_margin = binom_margin(n_resp);
    fit.cov_margins = {binom_margin(n_cov)};
    fit.order = {0};
    fit.pairs = {{dvine::PairModel{
        PairCopulaSpec{FamilyId::clayton, Rotation::r0, theta}}}};
    fit.cov_support = {{}};
    model.fits.push_back(std::move(fit));
    return model;
}

//! three variables (V, U1, U2): trivariate clayton decomposed along the
//! path; the conditional pair of a clayton copula is clayton(theta/(1+theta))
dvine::DVineRegModel make_d3_model(int n_trials, double theta)
{
    dvine::DVineRegModel model;
    model.mode = Mode::parametric;
    model.response_discrete = true;
    model.response_name = "y";
    model.covariate_names = {"x1", "x2"};
    model.covariate_kinds = {Kind::discrete, Kind::discrete};
    dvine::VineFit fit;
    fit.resp_margin = binom_margin(n_trials);
    fit.cov_margins = {binom_margin(n_trials), binom_margin(n_trials)};
    fit.order = {0, 1};
    PairCopulaSpec base{FamilyId::clayton, Rotation::r0, theta};
    PairCopulaSpec cond{FamilyId::clayton, Rotation::r0,
                        theta / (1.0 + theta)};
    fit.pairs = {{dvine::PairModel{base}, dvine::PairModel{base}},
                 {dvine::PairModel{cond}}};
    fit.cov_support = {{}, {}};
    model.fits.push_back(std::move(fit));
    return model;
}

//! clayton-coupled regression data on the original scale
struct TestData {
    std::vector<std::vector<double>> columns; // y, x1, x2
    std::vector<Kind> kinds;
};

TestData make_regression_data(std::size_t n, std::uint64_t seed,
                              bool discretize_x1, bool discretize_y)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> norm(0.0, 1.0);
    auto pairs = testutil::sample_pairs(
        testutil::spec_at(FamilyId::clayton, Rotation::r0, 0.5), n, seed);
    TestData td;
    td.columns.assign(3, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
        double u1 = pairs[i].first, u2 = pairs[i].second;
        double x1 = discretize_x1
                        ? static_cast<double>(num::binom_quantile(u1, 4, 0.5))
                        : num::qnorm(u1);
        double x2 = num::qnorm(u2);
        double y = 1.5 * x1 + 0.5 * norm(rng);
        if (discretize_y)
            y = std::round(std::clamp(y, 0.0, 6.0));
        td.columns[0][i] = y;
        td.columns[1][i] = x1;
        td.columns[2][i] = x2;
    }
    td.kinds = {discretize_y ? Kind::discrete : Kind::continuous,
                discretize_x1 ? Kind::discrete : Kind::continuous,
                Kind::continuous};
    return td;
}

} // namespace

TEST_CASE("d=2 all-discrete model matches brute-force enumeration", "[dvine]")
{
    auto model = make_d2_model(2, 2, 1.0);
    JointPmf oracle;
    oracle.theta = 1.0;
    oracle.cdfs = {scaled_cum(model.fits[0].resp_margin),
                   scaled_cum(model.fits[0].cov_margins[0])};

    for (std::size_t xi = 0; xi < 3; ++xi) {
        double px = 0.0;
        std::vector<double> cume;
        double acc = 0.0;
        for (std::size_t yi = 0; yi < 3; ++yi) {
            double p = oracle.cell({yi, xi});
            REQUIRE(p >= -1e-12);
            acc += p;
            cume.push_back(acc);
            px += p;
        }
        std::vector<double> x{static_cast<double>(xi)};
        for (std::size_t yi = 0; yi < 3; ++yi) {
            PseudoObs v =
                model.fits[0].resp_margin.pit(static_cast<double>(yi));
            double got = dvine::cond_cdf(model, v, x);
            REQUIRE(got == Catch::Approx(cume[yi] / px).margin(1e-6));
        }
        // conditional quantiles at a grid of levels
        dvine::QuantileRequest req;
        for (int a = 1; a <= 19; ++a)
            req.alphas.push_back(a / 20.0);
        auto pred = dvine::predict_quantile(model, req, x);
        for (std::size_t a = 0; a < req.alphas.size(); ++a) {
            double want = 2.0;
            for (std::size_t yi = 0; yi < 3; ++yi) {
                if (cume[yi] / px >= req.alphas[a] - 1e-12) {
                    want = static_cast<double>(yi);
                    break;
                }
            }
            REQUIRE(pred[a] == want);
        }
    }
}

//! joint PMF of the three-variable discrete vine, built directly from the
//! pair CDFs and margins by the difference-quotient factorization, an
//! independent route that shares no code with the propagation chain
namespace {

double vine3_joint_pmf(const std::vector<double>& fv,
                       const std::vector<double>& f1,
                       const std::vector<double>& f2,
                       const PairCopulaSpec& c_v1, const PairCopulaSpec& c_12,
                       const PairCopulaSpec& c_v2, std::size_t yi,
                       std::size_t x1, std::size_t x2)
{
    auto at = [](const std::vector<double>& f, std::size_t i) {
        return i == 0 ? 0.0 : f[i - 1];
    };
    double ma = f1[x1] - at(f1, x1); // P(U1 cell)
    // single-tree difference quotients: exact conditional CDFs given U1
    auto gv = [&](std::size_t i) {
        double hi = bicop::cdf(c_v1, fv[i], f1[x1]);
        double lo = bicop::cdf(c_v1, fv[i], at(f1, x1));
        return (hi - lo) / ma;
    };
    auto g2 = [&](std::size_t i) {
        double hi = bicop::cdf(c_12, f1[x1], f2[i]);
        double lo = bicop::cdf(c_12, at(f1, x1), f2[i]);
        return (hi - lo) / ma;
    };
    double av = gv(yi), av_m = yi == 0 ? 0.0 : gv(yi - 1);
    double bv = g2(x2), bv_m = x2 == 0 ? 0.0 : g2(x2 - 1);
    double rect = bicop::cdf(c_v2, av, bv) - bicop::cdf(c_v2, av_m, bv) -
                  bicop::cdf(c_v2, av, bv_m) + bicop::cdf(c_v2, av_m, bv_m);
    return ma * rect;
}

} // namespace

TEST_CASE("d=3 all-discrete model matches brute-force enumeration", "[dvine]")
{
    auto model = make_d3_model(2, 1.0);
    auto fv = scaled_cum(model.fits[0].resp_margin);
    auto f1 = scaled_cum(model.fits[0].cov_margins[0]);
    auto f2 = scaled_cum(model.fits[0].cov_margins[1]);
    PairCopulaSpec c_v1 = model.fits[0].pairs[0][0].spec();
    PairCopulaSpec c_12 = model.fits[0].pairs[0][1].spec();
    PairCopulaSpec c_v2 = model.fits[0].pairs[1][0].spec();

    double mass = 0.0;
    for (std::size_t x1 = 0; x1 < 3; ++x1)
        for (std::size_t x2 = 0; x2 < 3; ++x2)
            for (std::size_t yi = 0; yi < 3; ++yi)
                mass += vine3_joint_pmf(fv, f1, f2, c_v1, c_12, c_v2, yi, x1,
                                        x2);
    REQUIRE(mass == Catch::Approx(1.0).margin(1e-10));

    for (std::size_t x1 = 0; x1 < 3; ++x1) {
        for (std::size_t x2 = 0; x2 < 3; ++x2) {
            double px = 0.0;
            std::vector<double> cume;
            double acc = 0.0;
            for (std::size_t yi = 0; yi < 3; ++yi) {
                double p = vine3_joint_pmf(fv, f1, f2, c_v1, c_12, c_v2, yi,
                                           x1, x2);
                REQUIRE(p >= -1e-12);
                acc += p;
                cume.push_back(acc);
                px += p;
            }
            std::vector<double> x{static_cast<double>(x1),
                                  static_cast<double>(x2)};
            for (std::size_t yi = 0; yi < 3; ++yi) {
                PseudoObs v =
                    model.fits[0].resp_margin.pit(static_cast<double>(yi));
                double got = dvine::cond_cdf(model, v, x);
                REQUIRE(got == Catch::Approx(cume[yi] / px).margin(1e-6));
            }
            dvine::QuantileRequest req;
            for (int a = 1; a <= 19; ++a)
                req.alphas.push_back(a / 20.0);
            auto pred = dvine::predict_quantile(model, req, x);
            for (std::size_t a = 0; a < req.alphas.size(); ++a) {
                double want = 2.0;
                for (std::size_t yi = 0; yi < 3; ++yi) {
                    if (cume[yi] / px >= req.alphas[a] - 1e-12) {
                        want = static_cast<double>(yi);
                        break;
                    }
                }
                REQUIRE(pred[a] == want);
            }
        }
    }
}

TEST_CASE("d=4 all-discrete model matches brute-force enumeration", "[dvine]")
{
    // distinct parameters on every edge so index or direction mix-ups in
    // the recursion cannot cancel
    PairCopulaSpec c_v1{FamilyId::clayton, Rotation::r0, 1.0};
    PairCopulaSpec c_12{FamilyId::clayton, Rotation::r0, 1.6};
    PairCopulaSpec c_23{FamilyId::clayton, Rotation::r0, 0.8};
    PairCopulaSpec c_v2{FamilyId::clayton, Rotation::r0, 0.5};
    PairCopulaSpec c_13{FamilyId::clayton, Rotation::r0, 1.2};
    PairCopulaSpec c_v3{FamilyId::clayton, Rotation::r0, 0.33};

    dvine::DVineRegModel model;
    model.mode = Mode::parametric;
    model.response_discrete = true;
    model.response_name = "y";
    model.covariate_names = {"x1", "x2", "x3"};
    model.covariate_kinds = {Kind::discrete, Kind::discrete, Kind::discrete};
    dvine::VineFit fit;
    fit.resp_margin = binom_margin(2);
    fit.cov_margins = {binom_margin(2), binom_margin(2), binom_margin(2)};
    fit.order = {0, 1, 2};
    fit.pairs = {{dvine::PairModel{c_v1}, dvine::PairModel{c_12},
                  dvine::PairModel{c_23}},
                 {dvine::PairModel{c_v2}, dvine::PairModel{c_13}},
                 {dvine::PairModel{c_v3}}};
    fit.cov_support = {{}, {}, {}};
    model.fits.push_back(std::move(fit));

    auto f0 = scaled_cum(model.fits[0].resp_margin);
    auto f1 = scaled_cum(model.fits[0].cov_margins[0]);
    auto f2 = scaled_cum(model.fits[0].cov_margins[1]);
    auto f3 = scaled_cum(model.fits[0].cov_margins[2]);
    auto at = [](const std::vector<double>& f, std::size_t i) {
        return i == 0 ? 0.0 : f[i - 1];
    };
    auto rect = [](const PairCopulaSpec& s, double au, double al, double bu,
                   double bl) {
        return bicop::cdf(s, au, bu) - bicop::cdf(s, al, bu) -
               bicop::cdf(s, au, bl) + bicop::cdf(s, al, bl);
    };

    // enumeration of the vine-defined joint by explicit rectangle algebra,
    // one conditioning level at a time
    auto joint = [&](std::size_t yi, std::size_t a, std::size_t b,
                     std::size_t c) {
        double mass_a = f1[a] - at(f1, a);
        double mass_b = f2[b] - at(f2, b);
        // level 1: conditionals given the U1 event and given the U2 event
        auto gv_a = [&](std::size_t i) {
            return (bicop::cdf(c_v1, f0[i], f1[a]) -
                    bicop::cdf(c_v1, f0[i], at(f1, a))) /
                   mass_a;
        };
        auto g2_a = [&](std::size_t i) {
            return (bicop::cdf(c_12, f1[a], f2[i]) -
                    bicop::cdf(c_12, at(f1, a), f2[i])) /
                   mass_a;
        };
        auto g1_b = [&](std::size_t i) {
            return (bicop::cdf(c_12, f1[i], f2[b]) -
                    bicop::cdf(c_12, f1[i], at(f2, b))) /
                   mass_b;
        };
        auto g3_b = [&](std::size_t i) {
            return (bicop::cdf(c_23, f2[b], f3[i]) -
                    bicop::cdf(c_23, at(f2, b), f3[i])) /
                   mass_b;
        };
        // level 2: V given (A,B) and U3 given (A,B) by telescoped rectangles
        double pb_a = g2_a(b) - (b == 0 ? 0.0 : g2_a(b - 1));
        auto gv_ab = [&](std::size_t i) {
            double hi2 = bicop::cdf(c_v2, gv_a(i), g2_a(b));
            double lo2 = bicop::cdf(c_v2, gv_a(i),
                                    b == 0 ? 0.0 : g2_a(b - 1));
            return (hi2 - lo2) / pb_a;
        };
        double pa_b = g1_b(a) - (a == 0 ? 0.0 : g1_b(a - 1));
        auto g3_ab = [&](std::size_t i) {
            double hi2 = bicop::cdf(c_13, g1_b(a), g3_b(i));
            double lo2 = bicop::cdf(c_13, a == 0 ? 0.0 : g1_b(a - 1),
                                    g3_b(i));
            return (hi2 - lo2) / pa_b;
        };
        // level 3: the (V, U3; U1,U2) rectangle
        double p_vc = rect(c_v3, gv_ab(yi), yi == 0 ? 0.0 : gv_ab(yi - 1),
                           g3_ab(c), c == 0 ? 0.0 : g3_ab(c - 1));
        // assemble: P(A,B) * P(V,U3 | A,B)
        double p_ab = rect(c_12, f1[a], at(f1, a), f2[b], at(f2, b));
        return p_ab * p_vc;
    };

    double mass = 0.0;
    for (std::size_t y = 0; y < 3; ++y)
        for (std::size_t a = 0; a < 3; ++a)
            for (std::size_t b = 0; b < 3; ++b)
                for (std::size_t c = 0; c < 3; ++c)
                    mass += joint(y, a, b, c);
    REQUIRE(mass == Catch::Approx(1.0).margin(1e-9));

    dvine::QuantileRequest req;
    for (int a = 1; a <= 19; ++a)
        req.alphas.push_back(a / 20.0);
    for (std::size_t a = 0; a < 3; ++a) {
        for (std::size_t b = 0; b < 3; ++b) {
            for (std::size_t c = 0; c < 3; ++c) {
                double px = 0.0;
                std::vector<double> cume;
                for (std::size_t y = 0; y < 3; ++y) {
                    px += joint(y, a, b, c);
                    cume.push_back(px);
                }
                std::vector<double> x{static_cast<double>(a),
                                      static_cast<double>(b),
                                      static_cast<double>(c)};
                for (std::size_t y = 0; y < 3; ++y) {
                    PseudoObs v = model.fits[0].resp_margin.pit(
                        static_cast<double>(y));
                    REQUIRE(dvine::cond_cdf(model, v, x) ==
                            Catch::Approx(cume[y] / px).margin(1e-6));
                }
                auto pred = dvine::predict_quantile(model, req, x);
                for (std::size_t q = 0; q < req.alphas.size(); ++q) {
                    double want = 2.0;
                    for (std::size_t y = 0; y < 3; ++y) {
                        if (cume[y] / px >= req.alphas[q] - 1e-9) {
                            want = static_cast<double>(y);
                            break;
                        }
                    }
                    REQUIRE(pred[q] == want);
                }
            }
        }
    }
}

TEST_CASE("independence vine leaves the marginal quantiles untouched",
          "[dvine]")
{
    auto model = make_d2_model(2, 2, 1.0);
    model.fits[0].pairs[0][0] = dvine::PairModel{bicop::independence_spec()};
    std::vector<double> x{1.0};
    PseudoObs v = model.fits[0].resp_margin.pit(1.0);
    REQUIRE(dvine::cond_cdf(model, v, x) == Catch::Approx(v.u).margin(1e-12));
    dvine::QuantileRequest req;
    req.alphas = {0.1, 0.5, 0.9};
    auto pred = dvine::predict_quantile(model, req, x);
    for (std::size_t a = 0; a < req.alphas.size(); ++a)
        REQUIRE(pred[a] == model.fits[0].resp_margin.quantile(req.alphas[a]));
}

TEST_CASE("cond_cdf is monotone in the response argument", "[dvine]")
{
    auto td = make_regression_data(200, 404, true, false);
    auto model = dvine::fit(td.columns, td.kinds, 0);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> unif(0.05, 0.95);
    std::uniform_real_distribution<double> xdist(-2.0, 2.0);
    for (int rep = 0; rep < 100; ++rep) {
        std::vector<double> x{static_cast<double>(rep % 5), xdist(rng)};
        double lo = unif(rng), hi = unif(rng);
        if (lo > hi)
            std::swap(lo, hi);
        REQUIRE(dvine::cond_cdf(model, lo, x) <=
                dvine::cond_cdf(model, hi, x) + 1e-12);
    }
}

TEST_CASE("closed-form and bisection inversion agree on continuous data",
          "[dvine]")
{
    auto td = make_regression_data(300, 11, false, false);
    auto model = dvine::fit(td.columns, td.kinds, 0);
    REQUIRE_FALSE(model.selected_none);
    const auto& fit = model.fits[0];
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> xdist(-2.0, 2.0);
    std::uniform_real_distribution<double> adist(0.03, 0.97);
    for (int rep = 0; rep < 60; ++rep) {
        std::vector<double> x{xdist(rng), xdist(rng)};
        auto cov_obs = dvine::detail::pit_covariates(
            fit, model.mode, model.covariate_kinds, fit.order, x);
        auto cond_g = dvine::conditioned_covariates(fit, cov_obs);
        double alpha = adist(rng);
        double closed = dvine::detail::conditional_quantile_u(fit, true,
                                                              cond_g, alpha,
                                                              0.0);
        double bisect = dvine::detail::conditional_quantile_u(fit, false,
                                                              cond_g, alpha,
                                                              0.0);
        REQUIRE(std::abs(closed - bisect) <= 1e-6);
    }
}

TEST_CASE("no quantile crossing across fitted models", "[dvine]")
{
    dvine::QuantileRequest req;
    for (int a = 1; a <= 99; ++a)
        req.alphas.push_back(a / 100.0);
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> xdist(-2.5, 2.5);

    for (int setup = 0; setup < 4; ++setup) {
        bool dx = setup & 1, dy = (setup & 2) != 0;
        auto td = make_regression_data(150, 500 + setup, dx, dy);
        dvine::FitOptions opts;
        opts.mode = (setup % 2 == 0) ? Mode::parametric : Mode::nonparametric;
        opts.seed = static_cast<std::uint64_t>(setup);
        auto model = dvine::fit(td.columns, td.kinds, 0, opts);
        for (int rep = 0; rep < 10; ++rep) {
            std::vector<double> x{
                dx ? static_cast<double>(rep % 5) : xdist(rng), xdist(rng)};
            auto pred = dvine::predict_quantile(model, req, x);
            for (std::size_t a = 1; a < pred.size(); ++a)
                REQUIRE(pred[a] >= pred[a - 1]);
        }
    }
}

TEST_CASE("forward selection is deterministic", "[dvine]")
{
    auto td = make_regression_data(150, 21, true, false);
    dvine::FitOptions opts;
    opts.seed = 5;
    auto m1 = dvine::fit(td.columns, td.kinds, 0, opts);
    auto m2 = dvine::fit(td.columns, td.kinds, 0, opts);
    REQUIRE(m1.order() == m2.order());
    REQUIRE(model_io::to_json(m1).dump() == model_io::to_json(m2).dump());
}

TEST_CASE("independent response selects no covariates", "[dvine]")
{
    std::mt19937_64 rng(31);
    std::normal_distribution<double> norm(0.0, 1.0);
    int none = 0;
    for (int run = 0; run < 20; ++run) {
        std::vector<std::vector<double>> cols(3, std::vector<double>(120));
        for (std::size_t i = 0; i < 120; ++i) {
            cols[0][i] = norm(rng);
            cols[1][i] = norm(rng);
            cols[2][i] = std::round(std::abs(norm(rng)) * 2.0);
        }
        std::vector<Kind> kinds{Kind::continuous, Kind::continuous,
                                Kind::discrete};
        auto model = dvine::fit(cols, kinds, 0);
        if (model.selected_none)
            ++none;
    }
    REQUIRE(none >= 16);
}

TEST_CASE("zero-covariate model predicts marginal quantiles", "[dvine]")
{
    std::mt19937_64 rng(37);
    std::normal_distribution<double> norm(0.0, 1.0);
    std::vector<std::vector<double>> cols(2, std::vector<double>(100));
    for (std::size_t i = 0; i < 100; ++i) {
        cols[0][i] = norm(rng);
        cols[1][i] = norm(rng);
    }
    auto model = dvine::fit(cols, {Kind::continuous, Kind::continuous}, 0);
    if (model.selected_none) {
        dvine::QuantileRequest req;
        req.alphas = {0.25, 0.5, 0.75};
        auto pred = dvine::predict_quantile(model, req, {1.23});
        for (std::size_t a = 0; a < req.alphas.size(); ++a)
            REQUIRE(pred[a] ==
                    model.fits[0].resp_margin.quantile(req.alphas[a]));
    }
}

TEST_CASE("perfectly dependent covariate is always selected", "[dvine]")
{
    std::mt19937_64 rng(43);
    std::normal_distribution<double> norm(0.0, 1.0);
    std::vector<std::vector<double>> cols(2, std::vector<double>(100));
    for (std::size_t i = 0; i < 100; ++i) {
        double z = norm(rng);
        cols[0][i] = z;
        cols[1][i] = z;
    }
    auto model = dvine::fit(cols, {Kind::continuous, Kind::continuous}, 0);
    REQUIRE_FALSE(model.selected_none);
    REQUIRE(model.order() == std::vector<std::size_t>{0});
    REQUIRE(model.cll() > 0.0);
}

TEST_CASE("cll identities", "[dvine]")
{
    // hand-built independence vine, continuous response: the copula part of
    // the conditional log-likelihood is zero
    auto td = make_regression_data(100, 51, false, false);
    dvine::DVineRegModel model;
    model.mode = Mode::parametric;
    model.response_discrete = false;
    model.covariate_names = {"x1"};
    model.covariate_kinds = {Kind::continuous};
    dvine::VineFit fit;
    fit.resp_margin = margins::fit_margin(td.columns[0], Kind::continuous);
    fit.cov_margins = {margins::fit_margin(td.columns[1], Kind::continuous)};
    fit.order = {0};
    fit.pairs = {{dvine::PairModel{bicop::independence_spec()}}};
    fit.cov_support = {{}};
    model.fits.push_back(std::move(fit));

    std::vector<std::vector<double>> data{td.columns[0], td.columns[1]};
    REQUIRE(dvine::cll(model, data, 0) == Catch::Approx(0.0).margin(1e-12));

    // penalized_cll arithmetic
    double ll = dvine::cll(model, data, 0);
    model.fits[0].param_count = 3.0;
    double aic = dvine::penalized_cll(model, data, 0, Criterion::aic);
    REQUIRE(aic == Catch::Approx(-2.0 * ll + 2.0 * 3.0).margin(1e-12));
    double bic = dvine::penalized_cll(model, data, 0, Criterion::bic);
    REQUIRE(bic ==
            Catch::Approx(-2.0 * ll + std::log(100.0) * 3.0).margin(1e-12));
}

TEST_CASE("selection never decreases the penalized cll", "[dvine]")
{
    for (int run = 0; run < 5; ++run) {
        auto td = make_regression_data(120, 600 + run, run % 2 == 0, false);
        auto model = dvine::fit(td.columns, td.kinds, 0);
        // the zero-covariate reference has penalized cll zero for a
        // continuous response (uniform conditional density, no parameters)
        REQUIRE(model.fits[0].penalized_cll >= -1e-12);
    }
}

TEST_CASE("serialization round trip reproduces predictions", "[dvine]")
{
    dvine::QuantileRequest req;
    req.alphas = {0.05, 0.3, 0.5, 0.7, 0.95};

    SECTION("parametric: bit identical")
    {
        auto td = make_regression_data(150, 61, true, true);
        auto model = dvine::fit(td.columns, td.kinds, 0);
        auto j = model_io::to_json(model);
        auto back = model_io::from_json(json::parse(j.dump()));
        for (double x1 : {0.0, 2.0, 4.0}) {
            auto a = dvine::predict_quantile(model, req, {x1, 0.5});
            auto b = dvine::predict_quantile(back, req, {x1, 0.5});
            REQUIRE(a == b);
        }
    }

    SECTION("nonparametric: within 1e-12")
    {
        auto td = make_regression_data(120, 67, true, false);
        dvine::FitOptions opts;
        opts.mode = Mode::nonparametric;
        opts.seed = 3;
        auto model = dvine::fit(td.columns, td.kinds, 0, opts);
        auto j = model_io::to_json(model);
        auto back = model_io::from_json(json::parse(j.dump()));
        for (double x1 : {0.0, 2.0, 4.0}) {
            auto a = dvine::predict_quantile(model, req, {x1, 0.5});
            auto b = dvine::predict_quantile(back, req, {x1, 0.5});
            for (std::size_t i = 0; i < a.size(); ++i)
                REQUIRE(a[i] == Catch::Approx(b[i]).margin(1e-12));
        }
    }
}

TEST_CASE("nonparametric discrete response predicts support values",
          "[dvine]")
{
    auto td = make_regression_data(200, 71, true, true);
    dvine::FitOptions opts;
    opts.mode = Mode::nonparametric;
    opts.seed = 9;
    auto model = dvine::fit(td.columns, td.kinds, 0, opts);
    dvine::QuantileRequest req;
    req.alphas = {0.1, 0.5, 0.9};
    const auto& support = model.fits[0].resp_support;
    REQUIRE_FALSE(support.empty());
    for (double x1 : {0.0, 1.0, 3.0}) {
        auto pred = dvine::predict_quantile(model, req, {x1, 0.0});
        for (double q : pred)
            REQUIRE(std::find(support.begin(), support.end(), q) !=
                    support.end());
    }
}

TEST_CASE("jitter replicates average deterministically", "[dvine]")
{
    auto td = make_regression_data(150, 81, true, true);
    dvine::FitOptions opts;
    opts.mode = Mode::nonparametric;
    opts.seed = 42;
    opts.jitter_replicates = 3;
    auto m1 = dvine::fit(td.columns, td.kinds, 0, opts);
    auto m2 = dvine::fit(td.columns, td.kinds, 0, opts);
    REQUIRE(m1.fits.size() == 3);
    dvine::QuantileRequest req;
    req.alphas = {0.25, 0.5, 0.75};
    auto a = dvine::predict_quantile(m1, req, {2.0, 0.3});
    auto b = dvine::predict_quantile(m2, req, {2.0, 0.3});
    REQUIRE(a == b);
}

TEST_CASE("fit rejects bad inputs", "[dvine]")
{
    std::vector<std::vector<double>> cols(2, std::vector<double>(10, 0.5));
    REQUIRE_THROWS_AS(
        dvine::fit(cols, {Kind::continuous, Kind::continuous}, 0),
        input_error);
    REQUIRE_THROWS_AS(
        dvine::fit({std::vector<double>(50, 1.0)}, {Kind::continuous}, 0),
        input_error);

    auto td = make_regression_data(100, 91, false, false);
    auto model = dvine::fit(td.columns, td.kinds, 0);
    dvine::QuantileRequest bad;
    bad.alphas = {0.5, 1.2};
    REQUIRE_THROWS_AS(dvine::predict_quantile(model, bad, {0.0, 0.0}),
                      request_error);
}
