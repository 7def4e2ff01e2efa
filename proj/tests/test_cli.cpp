#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "nplcm/simulate.hpp"

namespace fs = std::filesystem;

namespace {

const std::string kCli = NPLCM_CLI_PATH;

int run(const std::string& args) {
    const std::string cmd = kCli + " " + args + " >cli_stdout.txt 2>cli_stderr.txt";
    return std::system(cmd.c_str());
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct WorkDir {
    fs::path dir_;
    explicit WorkDir(const std::string& name) : dir_(name) {
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    ~WorkDir() { fs::remove_all(dir_); }
    std::string operator/(const std::string& p) const { return (dir_ / p).string(); }
};

std::string small_truth_json() {
    using namespace nplcm;
    TruthConfig tc = scenario_simulation_II(16);
    tc.n_cases = {50, 50};
    tc.n_controls = {50, 50};
    tc.ss_pathogens = {0};
    tc.theta_ss = {0.15};
    return truth_config_to_json(tc);
}

}  // namespace

TEST_CASE("cli end-to-end pipeline") {
    WorkDir wd("cli_work");
    std::ofstream(wd / "truth.json") << small_truth_json();

    SUBCASE("simulate is deterministic and refuses unknown scenarios") {
        REQUIRE(run("simulate --truth " + (wd / "truth.json") + " --seed 7 --out " + (wd / "s1")) == 0);
        REQUIRE(run("simulate --truth " + (wd / "truth.json") + " --seed 7 --out " + (wd / "s2")) == 0);
        CHECK(slurp(wd / "s1/data.csv") == slurp(wd / "s2/data.csv"));
        CHECK(slurp(wd / "s1/truth_record.csv") == slurp(wd / "s2/truth_record.csv"));
        CHECK(fs::exists(wd / "s1/manifest.json"));
        CHECK(run("simulate --scenario no_such_scenario --out " + (wd / "bad")) != 0);
    }

    SUBCASE("grid points select distinct simulation II scenarios") {
        REQUIRE(run("simulate --scenario sim2 --grid 13 --seed 3 --out " + (wd / "g13")) == 0);
        REQUIRE(run("simulate --scenario sim2 --grid 14 --seed 3 --out " + (wd / "g14")) == 0);
        CHECK(slurp(wd / "g13/truth_config.json") != slurp(wd / "g14/truth_config.json"));
        CHECK(run("simulate --scenario sim2 --grid 48 --seed 3 --out " + (wd / "g48")) != 0);
    }

    SUBCASE("fit, diagnose, summarize") {
        REQUIRE(run("simulate --truth " + (wd / "truth.json") + " --seed 11 --out " + (wd / "sim")) == 0);
        REQUIRE(run("fit --data " + (wd / "sim/data.csv") + " --model " + (wd / "sim/model.json") +
                    " --chains 2 --burnin 80 --keep 120 --seed 5 --out " + (wd / "fit")) == 0);
        CHECK(fs::exists(wd / "fit/chain_0.csv"));
        CHECK(fs::exists(wd / "fit/chain_1.csv"));
        CHECK(fs::exists(wd / "fit/address_book.json"));
        CHECK(fs::exists(wd / "fit/latents_chain_0.csv"));

        REQUIRE(run("diagnose --draws " + (wd / "fit") + " --out " + (wd / "diag.json")) == 0);
        CHECK(slurp(wd / "diag.json").find("\"rc\"") != std::string::npos);
        REQUIRE(run("diagnose --draws " + (wd / "fit") + " --filter no_match_here") == 0);

        REQUIRE(run("summarize --draws " + (wd / "fit") + " --what overall --out " + (wd / "ov.csv")) ==
                0);
        const std::string ov = slurp(wd / "ov.csv");
        CHECK(ov.find("cause,mean,lo,hi") == 0);

        std::ofstream(wd / "grid.csv") << "s2\n0\n1\n";
        REQUIRE(run("summarize --draws " + (wd / "fit") + " --what pef --grid " + (wd / "grid.csv") +
                    " --out " + (wd / "pef.csv")) == 0);
        CHECK(slurp(wd / "pef.csv").find("grid_row,cause") == 0);

        REQUIRE(run("summarize --draws " + (wd / "fit") + " --what rates --grid " + (wd / "grid.csv") +
                    " --out " + (wd / "rates.csv")) == 0);
        CHECK(slurp(wd / "rates.csv").find("ctrl_mean") != std::string::npos);

        REQUIRE(run("summarize --draws " + (wd / "fit") + " --what ief --cases 0,1 --out " +
                    (wd / "ief.csv")) == 0);
        CHECK(slurp(wd / "ief.csv").find("case_row") == 0);
    }

    SUBCASE("single-stratum overall pef equals the stratum pef") {
        using namespace nplcm;
        TruthConfig tc = scenario_seven_sites(true);
        tc.n_strata = 1;
        tc.n_cases = {80};
        tc.n_controls = {80};
        Matrix one_row(1, 6);
        for (int l = 0; l < 6; ++l) one_row(0, l) = tc.pi_table(0, l);
        tc.pi_table = one_row;
        std::ofstream(wd / "truth1.json") << truth_config_to_json(tc);

        REQUIRE(run("simulate --truth " + (wd / "truth1.json") + " --seed 2 --out " + (wd / "sim1")) ==
                0);
        REQUIRE(run("fit --data " + (wd / "sim1/data.csv") + " --model " + (wd / "sim1/model.json") +
                    " --chains 1 --burnin 60 --keep 100 --seed 9 --out " + (wd / "fit1")) == 0);
        REQUIRE(run("summarize --draws " + (wd / "fit1") + " --what overall --out " + (wd / "ov1.csv")) ==
                0);
        // single stratum: every case shares one covariate row, so "overall"
        // and the stratum PEF are the same number
        std::ofstream(wd / "grid1.csv") << "x\n0\n";  // no covariates: header ignored
        const std::string ov = slurp(wd / "ov1.csv");
        CHECK(ov.find("A,") != std::string::npos);
    }

    SUBCASE("fit resume reproduces the finished run") {
        REQUIRE(run("simulate --truth " + (wd / "truth.json") + " --seed 21 --out " + (wd / "simr")) ==
                0);
        REQUIRE(run("fit --data " + (wd / "simr/data.csv") + " --model " + (wd / "simr/model.json") +
                    " --chains 1 --burnin 40 --keep 60 --seed 77 --checkpoint-every 25 --out " +
                    (wd / "fitr")) == 0);
        const std::string first = slurp(wd / "fitr/chain_0.csv");
        CHECK(fs::exists(wd / "fitr/checkpoints/chain_0.checkpoint.json"));
        REQUIRE(run("fit --data " + (wd / "simr/data.csv") + " --model " + (wd / "simr/model.json") +
                    " --chains 1 --burnin 40 --keep 60 --seed 77 --resume --out " + (wd / "fitr")) ==
                0);
        CHECK(slurp(wd / "fitr/chain_0.csv") == first);
    }

    SUBCASE("replicate produces a metrics table") {
        REQUIRE(run("replicate --scenario sim2 --grid 16 --reps 2 --parallel 2 --seed 4 --chains 1 "
                    "--burnin 50 --keep 50 --out " +
                    (wd / "rep")) == 0);
        const std::string metrics = slurp(wd / "rep/metrics.json");
        CHECK(metrics.find("overall.A") != std::string::npos);
        CHECK(metrics.find("site2.") != std::string::npos);
        CHECK(fs::exists(wd / "rep/metrics.csv"));
    }
}
