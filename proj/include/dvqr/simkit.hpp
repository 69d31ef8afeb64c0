#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include <boost/math/distributions/students_t.hpp>

#include "dvqr/dvine.hpp"
#include "dvqr/num.hpp"
#include "dvqr/types.hpp"

//! scenario generation, true-quantile oracle, and evaluation metrics for the
//! simulation protocol: Clayton-coupled covariates, the first two binomially
//! discretized, Gaussian additive noise scaled to a target signal-to-noise
//! ratio, and out-of-sample mean root average squared error
namespace dvqr {
namespace simkit {

enum class GFunction { linear3, nonlinear3, nonlinear5 };

inline const char* g_name(GFunction g)
{
    switch (g) {
        case GFunction::linear3: return "linear3";
        case GFunction::nonlinear3: return "nonlinear3";
        case GFunction::nonlinear5: return "nonlinear5";
    }
    return "?";
}

inline GFunction g_from_name(const std::string& s)
{
    if (s == "linear3")
        return GFunction::linear3;
    if (s == "nonlinear3")
        return GFunction::nonlinear3;
    if (s == "nonlinear5")
        return GFunction::nonlinear5;
    throw input_error("unknown g function: " + s);
}

inline int g_arity(GFunction g)
{
    return g == GFunction::nonlinear5 ? 5 : 3;
}

//! counts absolute-value guards taken in the nonlinear5 square root
inline std::atomic<long>& g_guard_count()
{
    static std::atomic<long> count{0};
    return count;
}

inline double g_eval(GFunction g, const std::vector<double>& x)
{
    if (static_cast<int>(x.size()) != g_arity(g))
        throw input_error("g_eval: arity mismatch");
    switch (g) {
        case GFunction::linear3: return 2.0 * x[0] - 3.0 * x[2];
        case GFunction::nonlinear3:
            return x[0] - 2.0 * (x[1] - 3.0) * (x[1] - 3.0) +
                   4.0 * std::sqrt(std::abs(x[2]));
        case GFunction::nonlinear5: {
            double x1 = x[0];
            if (x1 < 0.0) {
                ++g_guard_count();
                x1 = -x1;
            }
            return 3.0 * std::sqrt(x1) - x[2] * x[2] +
                   (x[3] + 1.0) * (x[3] + 1.0) * (x[3] + 1.0) - x[1] * x[4];
        }
    }
    return 0.0;
}

//! one cell of the simulation design
struct SimulationScenario {
    int d = 3;
    std::size_t n_train = 250;
    int binom_n = 2; // N of the binomial(N, 1/2) discretization
    double snr = 2.0;
    double theta = 1.0;
    GFunction g = GFunction::linear3;
    std::vector<int> discrete_cols = {0, 1}; // covariate indices
    std::size_t n_eval = 1000;
    int replications = 20;
    std::uint64_t seed = 0;

    void validate() const
    {
        if (d != g_arity(g))
            throw input_error("scenario: d must match the g function arity");
        for (int c : discrete_cols)
            if (c < 0 || c >= d)
                throw input_error("scenario: discrete column out of range");
        if (!(theta > 0.0) || !(snr > 0.0))
            throw input_error("scenario: theta and snr must be positive");
    }
};

//! n rows from the exchangeable d-dimensional Clayton copula
//! (Marshall-Olkin gamma-frailty construction), column-major
inline std::vector<std::vector<double>> sample_clayton(int d, double theta,
                                                       std::size_t n,
                                                       std::uint64_t seed)
{
    std::vector<std::vector<double>> u(static_cast<std::size_t>(d),
                                       std::vector<double>(n));
    std::mt19937_64 rng(seed);
    if (theta < 1e-10) {
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        for (std::size_t i = 0; i < n; ++i)
            for (int j = 0; j < d; ++j)
                u[static_cast<std::size_t>(j)][i] = unif(rng);
        return u;
    }
    std::gamma_distribution<double> frailty(1.0 / theta, 1.0);
    std::exponential_distribution<double> expo(1.0);
    for (std::size_t i = 0; i < n; ++i) {
        double w = frailty(rng);
        while (w <= 0.0)
            w = frailty(rng);
        for (int j = 0; j < d; ++j) {
            double e = expo(rng);
            u[static_cast<std::size_t>(j)][i] =
                std::exp(-std::log1p(e / w) / theta);
        }
    }
    return u;
}

//! Monte-Carlo estimates of Var(g(X)) per (g, theta, N), with optional
//! JSON persistence
class VarianceCache {
public:
    explicit VarianceCache(std::size_t draws = 1000000,
                           std::uint64_t seed = 424242)
        : draws_(draws)
        , seed_(seed)
    {
    }

    double get(GFunction g, double theta, int binom_n,
               const std::vector<int>& discrete_cols)
    {
        auto key = std::make_tuple(std::string(g_name(g)), theta, binom_n);
        {
            std::lock_guard<std::mutex> lock(mutex_);
            auto it = cache_.find(key);
            if (it != cache_.end())
                return it->second;
        }
        double var = estimate(g, theta, binom_n, discrete_cols, draws_, seed_);
        std::lock_guard<std::mutex> lock(mutex_);
        cache_[key] = var;
        return var;
    }

    //! direct estimate with explicit draw count and seed (for reproducibility
    //! checks)
    static double estimate(GFunction g, double theta, int binom_n,
                           const std::vector<int>& discrete_cols,
                           std::size_t draws, std::uint64_t seed)
    {
        int d = g_arity(g);
        auto u = sample_clayton(d, theta, draws, seed);
        double mean = 0.0, m2 = 0.0;
        std::vector<double> x(static_cast<std::size_t>(d));
        for (std::size_t i = 0; i < draws; ++i) {
            for (int j = 0; j < d; ++j) {
                bool disc = std::find(discrete_cols.begin(),
                                      discrete_cols.end(),
                                      j) != discrete_cols.end();
                double uj = u[static_cast<std::size_t>(j)][i];
                x[static_cast<std::size_t>(j)] =
                    disc ? static_cast<double>(
                               num::binom_quantile(uj, binom_n, 0.5))
                         : num::qnorm(uj);
            }
            double gi = g_eval(g, x);
            double delta = gi - mean;
            mean += delta / static_cast<double>(i + 1);
            m2 += delta * (gi - mean);
        }
        return m2 / static_cast<double>(draws - 1);
    }

    nlohmann::json to_json() const
    {
        nlohmann::json j = nlohmann::json::array();
        for (const auto& [key, var] : cache_) {
            j.push_back({{"g", std::get<0>(key)},
                         {"theta", std::get<1>(key)},
                         {"N", std::get<2>(key)},
                         {"var", var},
                         {"draws", draws_},
                         {"seed", seed_}});
        }
        return j;
    }

    void load_json(const nlohmann::json& j)
    {
        std::lock_guard<std::mutex> lock(mutex_);
        for (const auto& e : j) {
            cache_[std::make_tuple(e.at("g").get<std::string>(),
                                   e.at("theta").get<double>(),
                                   e.at("N").get<int>())] =
                e.at("var").get<double>();
        }
    }

private:
    std::size_t draws_;
    std::uint64_t seed_;
    std::map<std::tuple<std::string, double, int>, double> cache_;
    mutable std::mutex mutex_;
};

//! training data plus the evaluation covariates of one replication
struct ScenarioDataset {
    std::vector<std::vector<double>> train; // [y, x1, ..., xd]
    std::vector<std::vector<double>> eval_x; // [x1, ..., xd]
    std::vector<margins::Kind> kinds; // for the training columns
    double sigma = 0.0;
};

//! covariates from copula-scale draws: discretized or normal-transformed
inline std::vector<std::vector<double>> transform_covariates(
    const std::vector<std::vector<double>>& u,
    const SimulationScenario& sc)
{
    std::vector<std::vector<double>> x(u.size());
    for (std::size_t j = 0; j < u.size(); ++j) {
        bool disc = std::find(sc.discrete_cols.begin(),
                              sc.discrete_cols.end(),
                              static_cast<int>(j)) != sc.discrete_cols.end();
        x[j].resize(u[j].size());
        for (std::size_t i = 0; i < u[j].size(); ++i)
            x[j][i] = disc ? static_cast<double>(num::binom_quantile(
                                 u[j][i], sc.binom_n, 0.5))
                           : num::qnorm(u[j][i]);
    }
    return x;
}

inline ScenarioDataset build_dataset(const SimulationScenario& sc,
                                     int replication, VarianceCache& cache)
{
    sc.validate();
    std::uint64_t rep_seed = sc.seed + static_cast<std::uint64_t>(replication);
    auto u_train = sample_clayton(sc.d, sc.theta, sc.n_train, rep_seed);
    auto u_eval = sample_clayton(sc.d, sc.theta, sc.n_eval,
                                 num::derive_seed(rep_seed, 1));
    std::mt19937_64 noise_rng(num::derive_seed(rep_seed, 2));
    std::normal_distribution<double> norm(0.0, 1.0);

    ScenarioDataset out;
    auto x = transform_covariates(u_train, sc);
    out.eval_x = transform_covariates(u_eval, sc);
    out.sigma =
        std::isinf(sc.snr)
            ? 0.0
            : std::sqrt(
                  cache.get(sc.g, sc.theta, sc.binom_n, sc.discrete_cols) /
                  sc.snr);

    std::vector<double> y(sc.n_train);
    std::vector<double> row(static_cast<std::size_t>(sc.d));
    for (std::size_t i = 0; i < sc.n_train; ++i) {
        for (int j = 0; j < sc.d; ++j)
            row[static_cast<std::size_t>(j)] =
                x[static_cast<std::size_t>(j)][i];
        y[i] = g_eval(sc.g, row) + out.sigma * norm(noise_rng);
    }
    out.train.push_back(std::move(y));
    for (auto& col : x)
        out.train.push_back(std::move(col));
    out.kinds.assign(static_cast<std::size_t>(sc.d) + 1,
                     margins::Kind::continuous);
    for (int c : sc.discrete_cols)
        out.kinds[static_cast<std::size_t>(c) + 1] = margins::Kind::discrete;
    return out;
}

//! exact conditional quantile: Gaussian additive noise shifts g(x)
inline double true_quantile(const SimulationScenario& sc, double sigma,
                            double alpha, const std::vector<double>& x)
{
    if (!(alpha > 0.0 && alpha < 1.0))
        throw request_error("true_quantile: alpha outside (0,1)");
    return g_eval(sc.g, x) + sigma * num::qnorm(alpha);
}

//! mean over replications of the root average squared error per row
inline double mrase(const std::vector<std::vector<double>>& predicted,
                    const std::vector<std::vector<double>>& truth)
{
    if (predicted.size() != truth.size() || predicted.empty())
        throw input_error("mrase: shape mismatch");
    double total = 0.0;
    for (std::size_t r = 0; r < predicted.size(); ++r) {
        if (predicted[r].size() != truth[r].size() || predicted[r].empty())
            throw input_error("mrase: shape mismatch");
        double se = 0.0;
        for (std::size_t i = 0; i < predicted[r].size(); ++i) {
            double d = predicted[r][i] - truth[r][i];
            se += d * d;
        }
        total += std::sqrt(se / static_cast<double>(predicted[r].size()));
    }
    return total / static_cast<double>(predicted.size());
}

//! check-function loss rho_alpha(y - q)
inline double tick_loss(double y, double q, double alpha)
{
    double z = y - q;
    return z * (alpha - (z < 0.0 ? 1.0 : 0.0));
}

inline double averaged_tick_loss(const std::vector<double>& y,
                                 const std::vector<double>& q, double alpha)
{
    if (y.size() != q.size() || y.empty())
        throw input_error("averaged_tick_loss: shape mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i)
        s += tick_loss(y[i], q[i], alpha);
    return s / static_cast<double>(y.size());
}

//! paired two-sided t-test on per-replication RASEs
struct PairedTTest {
    double t = 0.0;
    double p_value = 1.0;
    std::size_t dof = 0;
};

inline PairedTTest paired_ttest(const std::vector<double>& a,
                                const std::vector<double>& b)
{
    if (a.size() != b.size() || a.size() < 2)
        throw input_error("paired_ttest: need two samples of equal size >= 2");
    const double n = static_cast<double>(a.size());
    double mean = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        mean += a[i] - b[i];
    mean /= n;
    double ss = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i] - mean;
        ss += d * d;
    }
    double sd = std::sqrt(ss / (n - 1.0));
    PairedTTest out;
    out.dof = a.size() - 1;
    if (sd < 1e-300) {
        out.t = mean == 0.0 ? 0.0 : std::copysign(1e30, mean);
        out.p_value = mean == 0.0 ? 1.0 : 0.0;
        return out;
    }
    out.t = mean / (sd / std::sqrt(n));
    boost::math::students_t_distribution<double> dist(n - 1.0);
    out.p_value = 2.0 * boost::math::cdf(dist, -std::abs(out.t));
    return out;
}

enum class Method { pdvqr, npdvqr, oracle };

inline const char* method_name(Method m)
{
    switch (m) {
        case Method::pdvqr: return "pdvqr";
        case Method::npdvqr: return "npdvqr";
        case Method::oracle: return "oracle";
    }
    return "?";
}

inline Method method_from_name(const std::string& s)
{
    if (s == "pdvqr")
        return Method::pdvqr;
    if (s == "npdvqr")
        return Method::npdvqr;
    if (s == "oracle")
        return Method::oracle;
    throw input_error("unknown method: " + s);
}

//! one result cell of the grid
struct GridCell {
    SimulationScenario scenario;
    Method method = Method::pdvqr;
    double alpha = 0.5;
    std::vector<double> rases; // one per successful replication
    int failures = 0;
    double seconds = 0.0;

    double mrase_value() const
    {
        double s = 0.0;
        for (double r : rases)
            s += r;
        return rases.empty() ? std::nan("") : s / static_cast<double>(rases.size());
    }

    double rase_sd() const
    {
        if (rases.size() < 2)
            return 0.0;
        double m = mrase_value(), ss = 0.0;
        for (double r : rases)
            ss += (r - m) * (r - m);
        return std::sqrt(ss / static_cast<double>(rases.size() - 1));
    }
};

struct GridResults {
    std::vector<GridCell> cells;
};

//! runs every scenario x method x alpha cell; replications run concurrently,
//! each on its derived seed, so results do not depend on scheduling
inline GridResults run_grid(const std::vector<SimulationScenario>& scenarios,
                            const std::vector<Method>& methods,
                            const std::vector<double>& alphas,
                            VarianceCache& cache, int threads = 1,
                            const dvine::FitOptions& base_options = {})
{
    GridResults results;
    for (const auto& sc : scenarios) {
        sc.validate();
        // warm the variance cache once, outside the parallel section
        if (!std::isinf(sc.snr))
            cache.get(sc.g, sc.theta, sc.binom_n, sc.discrete_cols);

        struct RepOutcome {
            // per method: per alpha RASE; empty marks failure
            std::map<Method, std::vector<double>> rases;
            std::map<Method, double> seconds;
            std::map<Method, bool> failed;
        };
        std::vector<RepOutcome> outcomes(
            static_cast<std::size_t>(sc.replications));

        num::parallel_for(
            static_cast<std::size_t>(sc.replications), threads,
            [&](std::size_t r) {
                auto& outcome = outcomes[r];
                auto data = build_dataset(sc, static_cast<int>(r), cache);
                dvine::QuantileRequest req;
                req.alphas = alphas;

                // exact conditional quantiles on the evaluation points
                std::vector<std::vector<double>> truth(
                    alphas.size(),
                    std::vector<double>(data.eval_x[0].size()));
                std::vector<double> xrow(static_cast<std::size_t>(sc.d));
                for (std::size_t i = 0; i < data.eval_x[0].size(); ++i) {
                    for (int j = 0; j < sc.d; ++j)
                        xrow[static_cast<std::size_t>(j)] =
                            data.eval_x[static_cast<std::size_t>(j)][i];
                    for (std::size_t a = 0; a < alphas.size(); ++a)
                        truth[a][i] =
                            true_quantile(sc, data.sigma, alphas[a], xrow);
                }

                for (Method method : methods) {
                    auto t0 = std::chrono::steady_clock::now();
                    try {
                        std::vector<std::vector<double>> pred(
                            alphas.size(),
                            std::vector<double>(data.eval_x[0].size()));
                        if (method == Method::oracle) {
                            pred = truth;
                        } else {
                            dvine::FitOptions opts = base_options;
                            opts.mode = method == Method::pdvqr
                                            ? dvine::Mode::parametric
                                            : dvine::Mode::nonparametric;
                            opts.seed = num::derive_seed(
                                sc.seed + static_cast<std::uint64_t>(r), 77);
                            auto model =
                                dvine::fit(data.train, data.kinds, 0, opts);
                            for (std::size_t i = 0;
                                 i < data.eval_x[0].size(); ++i) {
                                for (int j = 0; j < sc.d; ++j)
                                    xrow[static_cast<std::size_t>(j)] =
                                        data.eval_x[static_cast<std::size_t>(
                                            j)][i];
                                auto q = dvine::predict_quantile(model, req,
                                                                 xrow);
                                for (std::size_t a = 0; a < alphas.size();
                                     ++a)
                                    pred[a][i] = q[a];
                            }
                        }
                        std::vector<double>& rases = outcome.rases[method];
                        rases.resize(alphas.size());
                        for (std::size_t a = 0; a < alphas.size(); ++a)
                            rases[a] = mrase({pred[a]}, {truth[a]});
                        outcome.failed[method] = false;
                    } catch (const std::exception&) {
                        outcome.failed[method] = true;
                    }
                    outcome.seconds[method] =
                        std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - t0)
                            .count();
                }
            });

        for (Method method : methods) {
            for (std::size_t a = 0; a < alphas.size(); ++a) {
                GridCell cell;
                cell.scenario = sc;
                cell.method = method;
                cell.alpha = alphas[a];
                for (auto& outcome : outcomes) {
                    if (outcome.failed[method]) {
                        ++cell.failures;
                        continue;
                    }
                    cell.rases.push_back(outcome.rases[method][a]);
                    cell.seconds += outcome.seconds[method];
                }
                results.cells.push_back(std::move(cell));
            }
        }
    }
    return results;
}

//! results CSV matching the tables' layout, one row per cell
inline void write_results_csv(const GridResults& results, std::ostream& out)
{
    out << "snr,n_train,N,alpha,method,mrase,rase_sd,replications,failures,"
           "seconds\n";
    out.precision(12);
    for (const auto& c : results.cells) {
        out << c.scenario.snr << ',' << c.scenario.n_train << ','
            << c.scenario.binom_n << ',' << c.alpha << ','
            << method_name(c.method) << ',' << c.mrase_value() << ','
            << c.rase_sd() << ',' << c.rases.size() << ',' << c.failures
            << ',' << c.seconds << '\n';
    }
}

} // namespace simkit
} // namespace dvqr
