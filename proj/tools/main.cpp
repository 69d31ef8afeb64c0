#include <exception>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "dvqr/cli.hpp"
#include "dvqr/version.hpp"

using namespace dvqr;

int main(int argc, char** argv)
{
    CLI::App app{"D-vine copula quantile regression for mixed "
                 "discrete-continuous data"};
    app.set_version_flag("--version", std::string(version_string));
    app.require_subcommand(1);

    cli::CommonOptions common;
    app.add_option("--seed", common.seed, "master seed for all randomness")
        ->capture_default_str();
    app.add_option("--threads", common.threads,
                   "parallelism for replications")
        ->capture_default_str();

    std::string csv_path, schema_text, model_path, out_path, config_path,
        out_dir;
    int folds = 10;
    bool debug_echo = false;

    auto* fit = app.add_subcommand("fit", "fit a model from a CSV file");
    fit->add_option("csv", csv_path, "training data CSV")->required();
    fit->add_option("--schema", schema_text,
                    "name:kind:role list (or a file of entries); kinds: "
                    "continuous|discrete|auto, roles: "
                    "response|covariate|ignore")
        ->required();
    fit->add_option("--out", out_path, "model file to write")->required();
    fit->add_option("--mode", common.mode, "parametric|nonparametric")
        ->check(CLI::IsMember({"parametric", "nonparametric"}))
        ->capture_default_str();
    fit->add_option("--penalty", common.penalty, "cll|aic|bic")
        ->check(CLI::IsMember({"cll", "aic", "bic"}))
        ->capture_default_str();
    fit->add_option("--jitter-replicates", common.jitter_replicates,
                    "jitter replicates (nonparametric mode)")
        ->capture_default_str();

    auto* predict = app.add_subcommand("predict",
                                       "predict conditional quantiles");
    predict->add_option("model", model_path, "fitted model file")->required();
    predict->add_option("csv", csv_path, "covariate CSV")->required();
    predict->add_option("--alphas", common.alphas, "quantile levels")
        ->delimiter(',')
        ->capture_default_str();
    predict->add_option("--out", out_path, "predictions CSV to write")
        ->required();

    auto* crossval = app.add_subcommand(
        "crossval", "k-fold cross-validated tick loss");
    crossval->add_option("csv", csv_path, "data CSV")->required();
    crossval->add_option("--schema", schema_text, "column schema")->required();
    crossval->add_option("--folds", folds, "number of folds")
        ->capture_default_str();
    crossval->add_option("--alphas", common.alphas, "quantile levels")
        ->delimiter(',')
        ->capture_default_str();
    crossval
        ->add_option("--mode", common.mode,
                     "parametric|nonparametric|both")
        ->check(CLI::IsMember({"parametric", "nonparametric", "both"}))
        ->capture_default_str();
    crossval->add_option("--penalty", common.penalty, "cll|aic|bic")
        ->check(CLI::IsMember({"cll", "aic", "bic"}))
        ->capture_default_str();
    crossval->add_option("--jitter-replicates", common.jitter_replicates,
                         "jitter replicates (nonparametric mode)")
        ->capture_default_str();
    crossval->add_option("--out", out_path, "report CSV to write");
    crossval->add_flag("--debug-echo-response", debug_echo,
                       "testing hook: predict the observed response");

    auto* simulate = app.add_subcommand(
        "simulate", "run a simulation grid from a config file");
    simulate->add_option("config", config_path, "key = value grid config")
        ->required();
    simulate->add_option("--out-dir", out_dir, "output directory")
        ->required();
    simulate->add_option("--penalty", common.penalty, "cll|aic|bic")
        ->check(CLI::IsMember({"cll", "aic", "bic"}))
        ->capture_default_str();
    simulate->add_option("--jitter-replicates", common.jitter_replicates,
                         "jitter replicates (nonparametric mode)")
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : cli::exit_usage;
    }

    if (common.threads < 1)
        common.threads = 1;

    try {
        if (app.got_subcommand(fit))
            return cli::cmd_fit(csv_path, schema_text, out_path, common);
        if (app.got_subcommand(predict))
            return cli::cmd_predict(model_path, csv_path, common.alphas,
                                    out_path, common);
        if (app.got_subcommand(crossval))
            return cli::cmd_crossval(csv_path, schema_text, folds, common,
                                     out_path, debug_echo);
        if (app.got_subcommand(simulate))
            return cli::cmd_simulate(config_path, out_dir, common);
    } catch (const input_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return cli::exit_usage;
    } catch (const schema_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return cli::exit_usage;
    } catch (const request_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return cli::exit_usage;
    } catch (const error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return cli::exit_numeric;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return cli::exit_numeric;
    }
    return cli::exit_usage;
}
