#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gtd/experiment.hpp"

using namespace gtd;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

RunConfig small_config(const fs::path& out) {
    RunConfig c;
    c.params.L = 16;
    c.sample_count = 5;
    c.n_steps = 64;
    c.quantile_samples = 500;
    c.out_dir = out.string();
    return c;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(GTD_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("settings and config files") {
    RunConfig c;
    apply_setting(c, "N", "3");
    apply_setting(c, "eps", "0.02");
    apply_setting(c, "terminal", "capped_range");
    CHECK(c.params.N == 3);
    CHECK(c.params.eps == 0.02);
    CHECK(c.terminal == "capped_range");
    CHECK_THROWS_AS(apply_setting(c, "colour", "blue"), ConfigError);
    CHECK_THROWS_AS(apply_setting(c, "N", "three"), ConfigError);

    const fs::path file = fs::temp_directory_path() / "gtd_test.cfg";
    {
        std::ofstream out(file);
        out << "# comment\n\nL = 32\nseed=99\n";
    }
    const RunConfig loaded = load_config(file.string());
    CHECK(loaded.params.L == 32);
    CHECK(loaded.seed == 99);

    const auto lines = describe(finalized(loaded));
    bool has_delta = false;
    for (const auto& [k, v] : lines) has_delta = has_delta || (k == "Delta" && std::stod(v) > 0.0);
    CHECK(has_delta);
}

TEST_CASE("seed domains are distinct") {
    CHECK(domain_seed(1, SeedDomain::Choice) != domain_seed(1, SeedDomain::MeasureEstimate));
    CHECK(domain_seed(1, SeedDomain::Choice) != domain_seed(2, SeedDomain::Choice));
}

TEST_CASE("sample command is deterministic") {
    const fs::path a = fs::temp_directory_path() / "gtd_sample_a";
    const fs::path b = fs::temp_directory_path() / "gtd_sample_b";
    fs::remove_all(a);
    fs::remove_all(b);
    RunConfig ca = small_config(a), cb = small_config(b);
    cb.threads = 3;
    CHECK(cmd_sample(ca) == 0);
    CHECK(cmd_sample(cb) == 0);
    CHECK(slurp(a / "bookkeeping.csv") == slurp(b / "bookkeeping.csv"));
    CHECK(slurp(a / "samples" / "path_000003.csv") == slurp(b / "samples" / "path_000003.csv"));

    RunConfig strat = small_config(a / "strategy");
    strat.paths_dir = a.string();
    CHECK(cmd_strategy(strat) == 0);
    CHECK(fs::exists(a / "strategy" / "summary.txt"));
}

TEST_CASE("dp and metrics commands") {
    const fs::path dir = fs::temp_directory_path() / "gtd_dp";
    fs::remove_all(dir);
    RunConfig c = small_config(dir);
    CHECK(cmd_dp(c) == 0);
    CHECK(fs::exists(dir / "walk_table_stage0.csv"));
    CHECK(slurp(dir / "dp_report.csv").find("# seed=") != std::string::npos);

    const MetricReport m = metric_check(3, 100, 1e-3, 1);
    CHECK(m.pass);
}

TEST_CASE("command line interface") {
    const fs::path dir = fs::temp_directory_path() / "gtd_cli_test";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::string base = "--out " + (dir / "x").string() + " --set L=16 --set n_steps=64 --set sample_count=3 ";
    CHECK(run_cli("sample " + base + "--set quantile_samples=500") == 0);
    CHECK(run_cli("sample " + base + "--set quantile_samples=500 --seed 5") == 0);

    {
        std::ofstream bad(dir / "bad.csv");
        bad << "t,value\n0,1\n0.5,0\n1,0.3\n";
    }
    CHECK(run_cli("strategy " + base + "--set path_file=" + (dir / "bad.csv").string()) == 2);
    CHECK(run_cli("strategy " + base + "--set path_file=" + (dir / "missing.csv").string()) == 2);
    CHECK(run_cli("dp " + base + "--set terminal=straddle") == 2);
    CHECK(run_cli("dp " + base + "--set N=zero") == 2);
    CHECK(run_cli("") != 0);

    const std::string det = "sample --set L=16 --set n_steps=64 --set sample_count=3 --set quantile_samples=500 --seed 77 ";
    CHECK(run_cli(det + "--out " + (dir / "r1").string()) == 0);
    CHECK(run_cli(det + "--threads 2 --out " + (dir / "r2").string()) == 0);
    CHECK(slurp(dir / "r1" / "bookkeeping.csv") == slurp(dir / "r2" / "bookkeeping.csv"));
    CHECK_FALSE(slurp(dir / "r1" / "bookkeeping.csv").empty());
}
