#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dvqr/cli.hpp"
#include "dvqr/csv.hpp"
#include "dvqr/simkit.hpp"

using namespace dvqr;
namespace fs = std::filesystem;

namespace {

//! run the CLI binary, returning its exit code
int run_cli(const std::string& args)
{
    std::string cmd = std::string(DVQR_CLI_BIN) + " " + args +
                      " >/dev/null 2>/dev/null";
    int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string run_cli_capture(const std::string& args, int& code)
{
    fs::path tmp = fs::temp_directory_path() / "dvqr_cli_capture.txt";
    std::string cmd = std::string(DVQR_CLI_BIN) + " " + args + " >" +
                      tmp.string() + " 2>&1";
    code = WEXITSTATUS(std::system(cmd.c_str()));
    std::ifstream in(tmp);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct TempDir {
    fs::path path;
    TempDir()
    {
        path = fs::temp_directory_path() /
               ("dvqr_test_" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

//! linear3 training CSV written to disk; returns its path
fs::path write_sim_csv(const fs::path& dir, std::size_t n,
                       std::uint64_t seed)
{
    simkit::SimulationScenario sc;
    sc.d = 3;
    sc.n_train = n;
    sc.binom_n = 2;
    sc.snr = 2.0;
    sc.g = simkit::GFunction::linear3;
    sc.seed = seed;
    simkit::VarianceCache cache(100000);
    auto data = simkit::build_dataset(sc, 0, cache);
    fs::path p = dir / "train.csv";
    csv::write_file(p.string(), {"y", "x1", "x2", "x3"}, data.train);
    return p;
}

} // namespace

TEST_CASE("csv io round trips within 1e-10", "[cli]")
{
    std::ostringstream out;
    std::vector<std::vector<double>> cols{
        {1.0 / 3.0, -2.5e-7, 123456.789012}, {0.1, 0.2, std::nan("")}};
    csv::write(out, {"a", "b"}, cols);
    std::istringstream in(out.str());
    auto table = csv::read(in);
    REQUIRE(table.names == std::vector<std::string>{"a", "b"});
    for (std::size_t j = 0; j < 2; ++j)
        for (std::size_t i = 0; i < 3; ++i) {
            if (std::isnan(cols[j][i]))
                REQUIRE(std::isnan(table.columns[j][i]));
            else
                REQUIRE(table.columns[j][i] ==
                        Catch::Approx(cols[j][i]).epsilon(1e-10));
        }
}

TEST_CASE("csv parse errors are reported", "[cli]")
{
    std::istringstream bad("a,b\n1,2\n3\n");
    REQUIRE_THROWS_AS(csv::read(bad), input_error);
    std::istringstream junk("a,b\n1,xyz\n");
    REQUIRE_THROWS_AS(csv::read(junk), input_error);
    std::istringstream empty("");
    REQUIRE_THROWS_AS(csv::read(empty), input_error);
}

TEST_CASE("fit writes a model and a manifest", "[cli]")
{
    TempDir dir;
    auto train = write_sim_csv(dir.path, 400, 7);
    auto model_path = dir.path / "model.json";
    int code;
    auto log = run_cli_capture(
        "--seed 3 fit " + train.string() +
            " --schema y:continuous:response,x1:discrete:covariate,"
            "x2:discrete:covariate,x3:continuous:covariate --out " +
            model_path.string(),
        code);
    INFO(log);
    REQUIRE(code == 0);
    REQUIRE(fs::exists(model_path));
    REQUIRE(fs::exists(dir.path / "model.json.manifest.json"));
    REQUIRE(log.find("selected covariates:") != std::string::npos);
    REQUIRE(log.find("penalized cll:") != std::string::npos);

    // x1 and x3 carry the signal in the linear design
    REQUIRE(log.find("x1") != std::string::npos);
    REQUIRE(log.find("x3") != std::string::npos);

    // identical invocation reproduces the model byte for byte
    auto first = slurp(model_path);
    REQUIRE(run_cli("--seed 3 fit " + train.string() +
                    " --schema y:continuous:response,x1:discrete:covariate,"
                    "x2:discrete:covariate,x3:continuous:covariate --out " +
                    model_path.string()) == 0);
    REQUIRE(slurp(model_path) == first);
}

TEST_CASE("fit rejects bad schemas and bad data", "[cli]")
{
    TempDir dir;
    auto train = write_sim_csv(dir.path, 60, 9);
    auto out = (dir.path / "m.json").string();
    // zero covariates
    REQUIRE(run_cli("fit " + train.string() +
                    " --schema y:continuous:response --out " + out) == 2);
    // unknown column
    REQUIRE(run_cli("fit " + train.string() +
                    " --schema y:continuous:response,zz:auto:covariate "
                    "--out " +
                    out) == 2);
    // missing file
    REQUIRE(run_cli("fit /nonexistent.csv --schema "
                    "y:continuous:response,x1:auto:covariate --out " +
                    out) == 2);
    // too few rows
    {
        std::ofstream tiny(dir.path / "tiny.csv");
        tiny << "y,x1\n";
        for (int i = 0; i < 10; ++i)
            tiny << i << "," << i << "\n";
    }
    REQUIRE(run_cli("fit " + (dir.path / "tiny.csv").string() +
                    " --schema y:continuous:response,x1:auto:covariate "
                    "--out " +
                    out) == 2);
}

TEST_CASE("predict emits nondecreasing quantile columns", "[cli]")
{
    TempDir dir;
    auto train = write_sim_csv(dir.path, 400, 11);
    auto model_path = (dir.path / "model.json").string();
    REQUIRE(run_cli("--seed 1 fit " + train.string() +
                    " --schema y:continuous:response,x1:discrete:covariate,"
                    "x2:discrete:covariate,x3:continuous:covariate --out " +
                    model_path) == 0);

    auto pred_path = (dir.path / "pred.csv").string();
    REQUIRE(run_cli("predict " + model_path + " " + train.string() +
                    " --alphas 0.1,0.5,0.9 --out " + pred_path) == 0);
    auto table = csv::read_file(pred_path);
    REQUIRE(table.names ==
            std::vector<std::string>{"row", "q0.1", "q0.5", "q0.9"});
    REQUIRE(table.rows() == 400);
    for (std::size_t i = 0; i < table.rows(); ++i) {
        REQUIRE(table.columns[1][i] <= table.columns[2][i]);
        REQUIRE(table.columns[2][i] <= table.columns[3][i]);
    }

    // a covariate column the model needs is absent
    {
        std::ofstream missing(dir.path / "missing.csv");
        missing << "x1,x2\n1,1\n";
    }
    REQUIRE(run_cli("predict " + model_path + " " +
                    (dir.path / "missing.csv").string() +
                    " --alphas 0.5 --out " + pred_path) == 2);
    // invalid alpha
    REQUIRE(run_cli("predict " + model_path + " " + train.string() +
                    " --alphas 1.5 --out " + pred_path) == 2);
}

TEST_CASE("crossval reports one row per alpha and mode", "[cli]")
{
    TempDir dir;
    auto train = write_sim_csv(dir.path, 300, 13);
    int code;
    auto log = run_cli_capture(
        "--seed 2 crossval " + train.string() +
            " --schema y:continuous:response,x1:discrete:covariate,"
            "x2:discrete:covariate,x3:continuous:covariate --folds 5 "
            "--alphas 0.25,0.75 --mode parametric",
        code);
    INFO(log);
    REQUIRE(code == 0);
    REQUIRE(log.find("alpha,mode,avg_tick_loss,folds,n") != std::string::npos);
    REQUIRE(log.find("0.25,parametric") != std::string::npos);
    REQUIRE(log.find("0.75,parametric") != std::string::npos);

    // the debug hook scores exactly zero
    auto log2 = run_cli_capture(
        "--seed 2 crossval " + train.string() +
            " --schema y:continuous:response,x1:discrete:covariate,"
            "x2:discrete:covariate,x3:continuous:covariate --folds 5 "
            "--alphas 0.5 --mode parametric --debug-echo-response",
        code);
    REQUIRE(code == 0);
    REQUIRE(log2.find("0.5,parametric,0,") != std::string::npos);

    // undersized folds
    REQUIRE(run_cli("crossval " + train.string() +
                    " --schema y:continuous:response,x1:discrete:covariate,"
                    "x2:discrete:covariate,x3:continuous:covariate "
                    "--folds 50 --mode parametric") == 2);
}

TEST_CASE("simulate runs a tiny grid and writes the results table", "[cli]")
{
    TempDir dir;
    auto cfg_path = dir.path / "grid.cfg";
    {
        std::ofstream cfg(cfg_path);
        cfg << "# desk-scale smoke grid\n"
            << "d = 3\n"
            << "g = linear3\n"
            << "n_train = 120\n"
            << "N = 2\n"
            << "snr = 2\n"
            << "alphas = 0.5\n"
            << "methods = oracle\n"
            << "replications = 2\n"
            << "n_eval = 50\n"
            << "variance_draws = 100000\n";
    }
    auto out_dir = (dir.path / "results").string();
    REQUIRE(run_cli("--seed 4 simulate " + cfg_path.string() + " --out-dir " +
                    out_dir) == 0);
    REQUIRE(fs::exists(out_dir + "/results.csv"));
    REQUIRE(fs::exists(out_dir + "/manifest.json"));
    REQUIRE(fs::exists(out_dir + "/variance_manifest.json"));
    auto text = slurp(out_dir + "/results.csv");
    REQUIRE(text.find("snr,n_train,N,alpha,method,mrase,rase_sd,"
                      "replications,failures,seconds") != std::string::npos);
    REQUIRE(text.find("oracle,0,") != std::string::npos);

    // the manifest records the seed
    auto manifest = slurp(out_dir + "/manifest.json");
    REQUIRE(manifest.find("\"seed\": 4") != std::string::npos);

    // unknown config keys name the offender
    {
        std::ofstream cfg(cfg_path, std::ios::app);
        cfg << "bogus_key = 1\n";
    }
    int code;
    auto log = run_cli_capture("simulate " + cfg_path.string() +
                                   " --out-dir " + out_dir,
                               code);
    REQUIRE(code == 2);
    REQUIRE(log.find("bogus_key") != std::string::npos);
}

TEST_CASE("predict through the CLI matches the enumeration oracle", "[cli]")
{
    TempDir dir;
    // injected true-margin model: binomial(2) response, binomial(2)
    // covariate, clayton theta=1 pair
    dvine::DVineRegModel model;
    model.mode = dvine::Mode::parametric;
    model.response_discrete = true;
    model.response_name = "y";
    model.covariate_names = {"x1"};
    model.covariate_kinds = {margins::Kind::discrete};
    dvine::VineFit fit;
    std::vector<double> support{0, 1, 2};
    std::vector<double> pmf{0.25, 0.5, 0.25};
    fit.resp_margin = margins::exact_discrete_margin(support, pmf);
    fit.cov_margins = {margins::exact_discrete_margin(support, pmf)};
    fit.order = {0};
    bicop::PairCopulaSpec cl{bicop::FamilyId::clayton, bicop::Rotation::r0,
                             1.0};
    fit.pairs = {{dvine::PairModel{cl}}};
    fit.cov_support = {{}};
    model.fits.push_back(std::move(fit));
    auto model_path = (dir.path / "oracle_model.json").string();
    model_io::save(model, model_path);

    csv::write_file((dir.path / "x.csv").string(), {"x1"}, {{0.0, 1.0, 2.0}});
    auto pred_path = (dir.path / "oracle_pred.csv").string();
    REQUIRE(run_cli("predict " + model_path + " " +
                    (dir.path / "x.csv").string() +
                    " --alphas 0.25,0.5,0.75 --out " + pred_path) == 0);
    auto table = csv::read_file(pred_path);

    // enumeration oracle over the 3x3 rectangle masses
    std::vector<double> cum{0.25, 0.75, 1.0};
    auto rect = [&](std::size_t yi, std::size_t xi) {
        auto lo = [&](std::size_t i) { return i == 0 ? 0.0 : cum[i - 1]; };
        return bicop::cdf(cl, cum[yi], cum[xi]) -
               bicop::cdf(cl, lo(yi), cum[xi]) -
               bicop::cdf(cl, cum[yi], lo(xi)) +
               bicop::cdf(cl, lo(yi), lo(xi));
    };
    std::vector<double> alphas{0.25, 0.5, 0.75};
    for (std::size_t xi = 0; xi < 3; ++xi) {
        double px = rect(0, xi) + rect(1, xi) + rect(2, xi);
        for (std::size_t a = 0; a < alphas.size(); ++a) {
            double acc = 0.0, want = 2.0;
            for (std::size_t yi = 0; yi < 3; ++yi) {
                acc += rect(yi, xi);
                if (acc / px >= alphas[a] - 1e-9) {
                    want = static_cast<double>(yi);
                    break;
                }
            }
            REQUIRE(table.columns[a + 1][xi] == want);
        }
    }
}

TEST_CASE("crossval reproduces the nonlinear-case method ordering", "[cli]")
{
    // nonlinear g with N=8: the jittered kernel estimator should beat the
    // parametric one on out-of-sample tick loss, as in the simulation study
    TempDir dir;
    simkit::SimulationScenario sc;
    sc.d = 3;
    sc.g = simkit::GFunction::nonlinear3;
    sc.n_train = 400;
    sc.binom_n = 8;
    sc.snr = 2.0;
    sc.seed = 31;
    simkit::VarianceCache cache(200000);
    auto data = simkit::build_dataset(sc, 0, cache);
    auto train = dir.path / "nl.csv";
    csv::write_file(train.string(), {"y", "x1", "x2", "x3"}, data.train);

    auto out = (dir.path / "cv.csv").string();
    REQUIRE(run_cli("--seed 8 crossval " + train.string() +
                    " --schema y:continuous:response,x1:discrete:covariate,"
                    "x2:discrete:covariate,x3:continuous:covariate "
                    "--folds 5 --alphas 0.5 --mode both --out " +
                    out) == 0);
    double par = -1.0, np = -1.0;
    int rows = 0;
    std::ifstream in(out);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        ++rows;
        auto cells = csv::detail::split(line);
        if (cells[1] == "parametric")
            par = std::stod(cells[2]);
        else if (cells[1] == "nonparametric")
            np = std::stod(cells[2]);
    }
    REQUIRE(rows == 2);
    REQUIRE(par > 0.0);
    REQUIRE(np > 0.0);
    REQUIRE(np < par);
}

TEST_CASE("schema files parse like inline schemas", "[cli]")
{
    TempDir dir;
    auto schema_path = dir.path / "schema.txt";
    {
        std::ofstream s(schema_path);
        s << "# columns\n"
          << "y:continuous:response\n"
          << "x1:auto:covariate\n"
          << "x2:auto:ignore\n"
          << "x3:auto:covariate\n";
    }
    auto schema = cli::ColumnSchema::parse(schema_path.string());
    REQUIRE(schema.columns.size() == 4);
    REQUIRE(schema.columns[0].role == "response");
    REQUIRE(schema.columns[2].role == "ignore");

    auto inline_schema = cli::ColumnSchema::parse(
        "y:continuous:response,x1:auto:covariate");
    REQUIRE(inline_schema.columns.size() == 2);

    REQUIRE_THROWS_AS(cli::ColumnSchema::parse("y:continuous:response"),
                      input_error);
    REQUIRE_THROWS_AS(cli::ColumnSchema::parse("y:bogus:response,x:auto:covariate"),
                      input_error);
}
