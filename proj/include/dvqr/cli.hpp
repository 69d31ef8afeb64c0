#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "dvqr/csv.hpp"
#include "dvqr/dvine.hpp"
#include "dvqr/model_io.hpp"
#include "dvqr/simkit.hpp"
#include "dvqr/version.hpp"

//! command implementations behind the command-line front end.
//! Exit codes: 0 success, 2 usage or data error, 3 numerical failure.
namespace dvqr {
namespace cli {

inline constexpr int exit_ok = 0;
inline constexpr int exit_usage = 2;
inline constexpr int exit_numeric = 3;

//! per-column declaration: name, kind (continuous/discrete/auto) and role
struct ColumnSchema {
    struct Column {
        std::string name;
        std::string kind; // continuous | discrete | auto
        std::string role; // response | covariate | ignore
    };
    std::vector<Column> columns;

    //! parses "name:kind:role,..." or, if the string names a readable file,
    //! the same entries one per line
    static ColumnSchema parse(const std::string& text)
    {
        std::string payload = text;
        if (std::filesystem::exists(text)) {
            std::ifstream in(text);
            std::ostringstream ss;
            std::string line;
            bool first = true;
            while (std::getline(in, line)) {
                line = csv::detail::strip(line);
                if (line.empty() || line[0] == '#')
                    continue;
                if (!first)
                    ss << ',';
                ss << line;
                first = false;
            }
            payload = ss.str();
        }
        ColumnSchema schema;
        std::istringstream ss(payload);
        std::string entry;
        while (std::getline(ss, entry, ',')) {
            entry = csv::detail::strip(entry);
            if (entry.empty())
                continue;
            std::istringstream es(entry);
            Column col;
            if (!std::getline(es, col.name, ':') ||
                !std::getline(es, col.kind, ':') ||
                !std::getline(es, col.role))
                throw input_error("schema entry must be name:kind:role, got \"" +
                                  entry + "\"");
            if (col.kind != "continuous" && col.kind != "discrete" &&
                col.kind != "auto")
                throw input_error("schema kind must be continuous, discrete or auto: " +
                                  entry);
            if (col.role != "response" && col.role != "covariate" &&
                col.role != "ignore")
                throw input_error("schema role must be response, covariate or ignore: " +
                                  entry);
            schema.columns.push_back(std::move(col));
        }
        int responses = 0, covariates = 0;
        for (const auto& c : schema.columns) {
            responses += c.role == "response";
            covariates += c.role == "covariate";
        }
        if (responses != 1)
            throw input_error("schema needs exactly one response column");
        if (covariates < 1)
            throw input_error("schema needs at least one covariate column");
        return schema;
    }
};

//! provenance record emitted next to every command's output
struct RunManifest {
    std::string command;
    nlohmann::json options;
    std::uint64_t seed = 0;
    int threads = 1;
    double wall_seconds = 0.0;
    std::vector<std::string> outputs;
    nlohmann::json extra;

    nlohmann::json to_json() const
    {
        nlohmann::json j;
        j["command"] = command;
        j["library_version"] = version_string;
        j["options"] = options;
        j["config_hash"] = config_hash();
        j["seed"] = seed;
        j["threads"] = threads;
        j["wall_seconds"] = wall_seconds;
        j["outputs"] = outputs;
        if (!extra.is_null())
            j["extra"] = extra;
        return j;
    }

    //! FNV-1a over the canonical option dump
    std::uint64_t config_hash() const
    {
        std::string s = command + options.dump();
        std::uint64_t h = 1469598103934665603ULL;
        for (unsigned char c : s) {
            h ^= c;
            h *= 1099511628211ULL;
        }
        return h;
    }

    void write(const std::string& path) const
    {
        std::ofstream out(path);
        if (!out)
            throw input_error("cannot write manifest: " + path);
        out << to_json().dump(2) << "\n";
    }
};

namespace detail {

struct PreparedCsv {
    std::vector<std::vector<double>> columns; // response first
    std::vector<margins::Kind> kinds;
    std::vector<std::string> names;
    std::size_t dropped_rows = 0;
};

inline margins::Kind resolve_kind(const std::string& kind,
                                  const std::vector<double>& column)
{
    if (kind == "continuous")
        return margins::Kind::continuous;
    if (kind == "discrete")
        return margins::Kind::discrete;
    return margins::auto_detect_kind(column);
}

//! applies a schema to a table: selects columns, resolves "auto" kinds and
//! drops rows with missing values
inline PreparedCsv apply_schema(const csv::Table& table,
                                const ColumnSchema& schema)
{
    std::vector<std::size_t> src;
    PreparedCsv out;
    // response first, then covariates in schema order
    for (const auto& c : schema.columns) {
        if (c.role != "response")
            continue;
        src.push_back(table.column_index(c.name));
        out.names.push_back(c.name);
    }
    for (const auto& c : schema.columns)
        if (c.role == "covariate") {
            src.push_back(table.column_index(c.name));
            out.names.push_back(c.name);
        }

    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < table.rows(); ++i) {
        bool complete = true;
        for (std::size_t j : src)
            complete = complete && !std::isnan(table.columns[j][i]);
        if (complete)
            keep.push_back(i);
    }
    out.dropped_rows = table.rows() - keep.size();

    out.columns.assign(src.size(), {});
    for (std::size_t j = 0; j < src.size(); ++j) {
        out.columns[j].reserve(keep.size());
        for (std::size_t i : keep)
            out.columns[j].push_back(table.columns[src[j]][i]);
    }

    std::size_t pos = 0;
    for (const auto& c : schema.columns) {
        if (c.role != "response")
            continue;
        out.kinds.push_back(resolve_kind(c.kind, out.columns[pos]));
        ++pos;
    }
    for (const auto& c : schema.columns) {
        if (c.role != "covariate")
            continue;
        out.kinds.push_back(resolve_kind(c.kind, out.columns[pos]));
        ++pos;
    }
    return out;
}

} // namespace detail

//! shared command options (from the global CLI flags)
struct CommonOptions {
    std::uint64_t seed = 0;
    int threads = static_cast<int>(std::thread::hardware_concurrency());
    std::string mode = "parametric";
    std::string penalty = "aic";
    std::vector<double> alphas = {0.1, 0.5, 0.9};
    int jitter_replicates = 1;
};

inline dvine::FitOptions make_fit_options(const CommonOptions& common,
                                          const std::string& mode)
{
    dvine::FitOptions opts;
    opts.mode = dvine::mode_from_name(mode);
    opts.penalty = criterion_from_name(common.penalty);
    opts.seed = common.seed;
    opts.jitter_replicates = common.jitter_replicates;
    return opts;
}

//! fit a model from a CSV file and serialize it
inline int cmd_fit(const std::string& csv_path, const std::string& schema_text,
                   const std::string& out_path, const CommonOptions& common,
                   std::ostream& log = std::cout)
{
    auto t0 = std::chrono::steady_clock::now();
    auto schema = ColumnSchema::parse(schema_text);
    auto table = csv::read_file(csv_path);
    auto prepared = detail::apply_schema(table, schema);
    if (prepared.dropped_rows > 0)
        log << "dropped " << prepared.dropped_rows
            << " rows with missing values\n";
    if (prepared.columns[0].size() < 30)
        throw input_error("fewer than 30 complete rows");

    auto opts = make_fit_options(common, common.mode);
    auto model = dvine::fit(prepared.columns, prepared.kinds, 0, opts,
                            prepared.names);
    model_io::save(model, out_path);

    log << "selected covariates:";
    if (model.order().empty())
        log << " (none)";
    for (std::size_t idx : model.order())
        log << ' ' << model.covariate_names[idx];
    log << "\npenalized cll: " << model.penalized_cll() << "\n";
    for (const auto& w : model.warnings)
        log << "warning: " << w << "\n";

    RunManifest manifest;
    manifest.command = "fit";
    manifest.options = {{"csv", csv_path},
                        {"schema", schema_text},
                        {"mode", common.mode},
                        {"penalty", common.penalty},
                        {"jitter_replicates", common.jitter_replicates},
                        {"out", out_path}};
    manifest.seed = common.seed;
    manifest.threads = common.threads;
    manifest.extra = {{"dropped_rows", prepared.dropped_rows},
                      {"rows_used", prepared.columns[0].size()},
                      {"cll", model.cll()},
                      {"penalized_cll", model.penalized_cll()}};
    manifest.outputs = {out_path};
    manifest.wall_seconds = std::chrono::duration<double>(
                                std::chrono::steady_clock::now() - t0)
                                .count();
    manifest.write(out_path + ".manifest.json");
    return exit_ok;
}

//! predict quantiles for each complete row of a CSV file
inline int cmd_predict(const std::string& model_path,
                       const std::string& csv_path,
                       const std::vector<double>& alphas,
                       const std::string& out_path,
                       const CommonOptions& common,
                       std::ostream& log = std::cout)
{
    auto t0 = std::chrono::steady_clock::now();
    auto model = model_io::load(model_path);
    auto table = csv::read_file(csv_path);
    for (const auto& name : model.covariate_names)
        if (!table.has_column(name))
            throw schema_error("prediction input lacks covariate column: " +
                               name);

    dvine::QuantileRequest req;
    req.alphas = alphas;
    std::sort(req.alphas.begin(), req.alphas.end());
    req.validate();

    std::vector<std::size_t> src;
    for (const auto& name : model.covariate_names)
        src.push_back(table.column_index(name));

    std::vector<std::string> out_names{"row"};
    for (double a : req.alphas) {
        std::ostringstream name;
        name << "q" << a;
        out_names.push_back(name.str());
    }
    std::vector<std::vector<double>> out_cols(out_names.size());

    std::size_t dropped = 0;
    for (std::size_t i = 0; i < table.rows(); ++i) {
        std::vector<double> x(src.size());
        bool complete = true;
        for (std::size_t j = 0; j < src.size(); ++j) {
            x[j] = table.columns[src[j]][i];
            complete = complete && !std::isnan(x[j]);
        }
        if (!complete) {
            ++dropped;
            continue;
        }
        auto q = dvine::predict_quantile(model, req, x);
        out_cols[0].push_back(static_cast<double>(i));
        for (std::size_t a = 0; a < q.size(); ++a)
            out_cols[a + 1].push_back(q[a]);
    }
    if (dropped > 0)
        log << "skipped " << dropped << " rows with missing covariates\n";
    csv::write_file(out_path, out_names, out_cols);

    RunManifest manifest;
    manifest.command = "predict";
    manifest.options = {{"model", model_path},
                        {"csv", csv_path},
                        {"alphas", req.alphas},
                        {"out", out_path}};
    manifest.seed = common.seed;
    manifest.threads = common.threads;
    manifest.extra = {{"rows_predicted", out_cols[0].size()},
                      {"rows_skipped", dropped}};
    manifest.outputs = {out_path};
    manifest.wall_seconds = std::chrono::duration<double>(
                                std::chrono::steady_clock::now() - t0)
                                .count();
    manifest.write(out_path + ".manifest.json");
    return exit_ok;
}

//! k-fold cross-validated tick loss per alpha and mode
inline int cmd_crossval(const std::string& csv_path,
                        const std::string& schema_text, int folds,
                        const CommonOptions& common,
                        const std::string& out_path, bool debug_echo_response,
                        std::ostream& log = std::cout)
{
    auto t0 = std::chrono::steady_clock::now();
    if (folds < 2)
        throw input_error("crossval: need at least 2 folds");
    auto schema = ColumnSchema::parse(schema_text);
    auto table = csv::read_file(csv_path);
    auto prepared = detail::apply_schema(table, schema);
    const std::size_t n = prepared.columns[0].size();
    if (n / static_cast<std::size_t>(folds) < 30)
        throw input_error("crossval: folds of fewer than 30 rows");

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(common.seed);
    std::shuffle(perm.begin(), perm.end(), rng);

    std::vector<std::string> modes =
        common.mode == "both"
            ? std::vector<std::string>{"parametric", "nonparametric"}
            : std::vector<std::string>{common.mode};

    std::vector<double> sorted_alphas = common.alphas;
    std::sort(sorted_alphas.begin(), sorted_alphas.end());
    dvine::QuantileRequest req;
    req.alphas = sorted_alphas;
    req.validate();

    // accumulated tick losses per (mode, alpha)
    std::map<std::pair<std::string, double>, std::pair<double, std::size_t>>
        losses;
    for (const auto& mode : modes) {
        for (int f = 0; f < folds; ++f) {
            std::vector<std::size_t> test, train;
            for (std::size_t i = 0; i < n; ++i) {
                if (static_cast<int>(i % static_cast<std::size_t>(folds)) == f)
                    test.push_back(perm[i]);
                else
                    train.push_back(perm[i]);
            }
            std::vector<std::vector<double>> train_cols(
                prepared.columns.size());
            for (std::size_t j = 0; j < prepared.columns.size(); ++j) {
                train_cols[j].reserve(train.size());
                for (std::size_t i : train)
                    train_cols[j].push_back(prepared.columns[j][i]);
            }
            auto opts = make_fit_options(common, mode);
            opts.seed = num::derive_seed(common.seed,
                                         static_cast<std::uint64_t>(f));
            auto model = dvine::fit(train_cols, prepared.kinds, 0, opts,
                                    prepared.names);

            for (std::size_t i : test) {
                std::vector<double> x(prepared.columns.size() - 1);
                for (std::size_t j = 1; j < prepared.columns.size(); ++j)
                    x[j - 1] = prepared.columns[j][i];
                double y = prepared.columns[0][i];
                std::vector<double> q;
                if (debug_echo_response)
                    q.assign(req.alphas.size(), y);
                else
                    q = dvine::predict_quantile(model, req, x);
                for (std::size_t a = 0; a < req.alphas.size(); ++a) {
                    auto& slot = losses[{mode, req.alphas[a]}];
                    slot.first += simkit::tick_loss(y, q[a], req.alphas[a]);
                    slot.second += 1;
                }
            }
        }
    }

    std::vector<std::string> names{"alpha", "mode", "avg_tick_loss", "folds",
                                   "n"};
    std::ostringstream body;
    body << "alpha,mode,avg_tick_loss,folds,n\n";
    body << std::setprecision(12);
    for (const auto& mode : modes)
        for (double a : req.alphas) {
            auto& slot = losses[{mode, a}];
            body << a << ',' << mode << ','
                 << slot.first / static_cast<double>(slot.second) << ','
                 << folds << ',' << n << '\n';
        }
    log << body.str();
    if (!out_path.empty()) {
        std::ofstream out(out_path);
        if (!out)
            throw input_error("cannot write: " + out_path);
        out << body.str();
    }

    RunManifest manifest;
    manifest.command = "crossval";
    manifest.options = {{"csv", csv_path},
                        {"schema", schema_text},
                        {"folds", folds},
                        {"mode", common.mode},
                        {"penalty", common.penalty},
                        {"alphas", req.alphas},
                        {"debug_echo_response", debug_echo_response}};
    manifest.seed = common.seed;
    manifest.threads = common.threads;
    manifest.extra = {{"rows_used", n},
                      {"dropped_rows", prepared.dropped_rows}};
    if (!out_path.empty())
        manifest.outputs = {out_path};
    manifest.wall_seconds = std::chrono::duration<double>(
                                std::chrono::steady_clock::now() - t0)
                                .count();
    if (!out_path.empty())
        manifest.write(out_path + ".manifest.json");
    return exit_ok;
}

//! key = value grid configuration for the simulate command
struct GridConfig {
    int d = 3;
    std::string g = "linear3";
    std::vector<std::size_t> n_train = {250};
    std::vector<int> binom_n = {2};
    std::vector<double> snr = {2.0};
    std::vector<double> alphas = {0.5};
    std::vector<std::string> methods = {"pdvqr", "npdvqr"};
    int replications = 20;
    double theta = 1.0;
    std::size_t n_eval = 1000;
    std::size_t variance_draws = 1000000;

    static GridConfig parse_file(const std::string& path)
    {
        std::ifstream in(path);
        if (!in)
            throw input_error("cannot open grid config: " + path);
        GridConfig cfg;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            line = csv::detail::strip(line);
            if (line.empty() || line[0] == '#')
                continue;
            auto eq = line.find('=');
            if (eq == std::string::npos)
                throw input_error("grid config line " +
                                  std::to_string(lineno) +
                                  ": expected key = value");
            std::string key = csv::detail::strip(line.substr(0, eq));
            std::string value = csv::detail::strip(line.substr(eq + 1));
            auto as_list = [&](auto parse_one) {
                std::vector<decltype(parse_one(std::string{}))> out;
                std::istringstream ss(value);
                std::string item;
                while (std::getline(ss, item, ','))
                    out.push_back(parse_one(csv::detail::strip(item)));
                if (out.empty())
                    throw input_error("grid config: empty list for " + key);
                return out;
            };
            auto to_double = [](const std::string& s) { return std::stod(s); };
            auto to_size = [](const std::string& s) {
                return static_cast<std::size_t>(std::stoull(s));
            };
            auto to_int = [](const std::string& s) { return std::stoi(s); };
            auto to_str = [](const std::string& s) { return s; };
            try {
                if (key == "d")
                    cfg.d = std::stoi(value);
                else if (key == "g")
                    cfg.g = value;
                else if (key == "n_train")
                    cfg.n_train = as_list(to_size);
                else if (key == "N")
                    cfg.binom_n = as_list(to_int);
                else if (key == "snr")
                    cfg.snr = as_list(to_double);
                else if (key == "alphas")
                    cfg.alphas = as_list(to_double);
                else if (key == "methods")
                    cfg.methods = as_list(to_str);
                else if (key == "replications")
                    cfg.replications = std::stoi(value);
                else if (key == "theta")
                    cfg.theta = std::stod(value);
                else if (key == "n_eval")
                    cfg.n_eval = static_cast<std::size_t>(std::stoull(value));
                else if (key == "variance_draws")
                    cfg.variance_draws =
                        static_cast<std::size_t>(std::stoull(value));
                else
                    throw input_error("grid config: unknown key: " + key);
            } catch (const input_error&) {
                throw;
            } catch (const std::exception&) {
                throw input_error("grid config: bad value for key " + key +
                                  ": \"" + value + "\"");
            }
        }
        return cfg;
    }
};

//! run a simulation grid and write the results table
inline int cmd_simulate(const std::string& config_path,
                        const std::string& out_dir,
                        const CommonOptions& common,
                        std::ostream& log = std::cout)
{
    auto t0 = std::chrono::steady_clock::now();
    auto cfg = GridConfig::parse_file(config_path);

    std::vector<simkit::SimulationScenario> scenarios;
    for (std::size_t n : cfg.n_train)
        for (int nn : cfg.binom_n)
            for (double s : cfg.snr) {
                simkit::SimulationScenario sc;
                sc.d = cfg.d;
                sc.g = simkit::g_from_name(cfg.g);
                sc.n_train = n;
                sc.binom_n = nn;
                sc.snr = s;
                sc.theta = cfg.theta;
                sc.n_eval = cfg.n_eval;
                sc.replications = cfg.replications;
                sc.seed = common.seed;
                sc.validate();
                scenarios.push_back(sc);
            }
    std::vector<simkit::Method> methods;
    for (const auto& m : cfg.methods)
        methods.push_back(simkit::method_from_name(m));

    std::filesystem::create_directories(out_dir);
    simkit::VarianceCache cache(cfg.variance_draws);
    auto cache_path = out_dir + "/variance_manifest.json";
    if (std::filesystem::exists(cache_path)) {
        std::ifstream in(cache_path);
        nlohmann::json j;
        in >> j;
        cache.load_json(j.at("variances"));
    }

    dvine::FitOptions base;
    base.penalty = criterion_from_name(common.penalty);
    base.jitter_replicates = common.jitter_replicates;
    auto results = simkit::run_grid(scenarios, methods, cfg.alphas, cache,
                                    common.threads, base);

    auto results_path = out_dir + "/results.csv";
    {
        std::ofstream out(results_path);
        if (!out)
            throw input_error("cannot write: " + results_path);
        simkit::write_results_csv(results, out);
    }
    {
        std::ofstream out(cache_path);
        nlohmann::json j;
        j["variances"] = cache.to_json();
        out << j.dump(2) << "\n";
    }
    log << "wrote " << results_path << " (" << results.cells.size()
        << " cells)\n";

    RunManifest manifest;
    manifest.command = "simulate";
    manifest.options = {{"config", config_path},
                        {"out_dir", out_dir},
                        {"penalty", common.penalty},
                        {"jitter_replicates", common.jitter_replicates}};
    manifest.seed = common.seed;
    manifest.threads = common.threads;
    manifest.outputs = {results_path, cache_path};
    manifest.wall_seconds = std::chrono::duration<double>(
                                std::chrono::steady_clock::now() - t0)
                                .count();
    manifest.write(out_dir + "/manifest.json");
    return exit_ok;
}

} // namespace cli
} // namespace dvqr
