#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <doctest.h>

#include "dfs/app.hpp"

using namespace dfs;
namespace fs = std::filesystem;

namespace
{
fs::path scratch(std::string const& name)
{
    auto dir = fs::temp_directory_path() / "dfs_test_app" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

int cli(std::string const& args)
{
    std::string cmd = std::string(DFS_CLI) + " " + args + " > /dev/null 2>&1";
    int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(fs::path const& p)
{
    std::ifstream f(p);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}
}  // namespace

TEST_CASE("config parsing")
{
    auto c = RunConfig::parse(R"({
        // comments are allowed
        "seed": 9,
        "noise": {"chi_s": 0.3, "overlap_penalty": 0.01},
        "experiment": {"duration_s": 0.05}
    })");
    CHECK(c.seed == 9);
    CHECK(c.noise.chi_s == doctest::Approx(0.3));
    CHECK(c.overlap_penalty == doctest::Approx(0.01));
    CHECK(c.experiment.duration_s == doctest::Approx(0.05));
    CHECK(c.hash() == RunConfig::parse(c.dump()).hash());
    CHECK(c.hash() != RunConfig{}.hash());

    CHECK_THROWS_AS(RunConfig::parse(R"({"sed": 1})"), ConfigError);
    CHECK_THROWS_AS(RunConfig::parse(R"({"noise": {"chi": 1}})"), ConfigError);
    CHECK_THROWS_AS(RunConfig::parse("{"), ConfigError);
    CHECK_THROWS_AS(RunConfig::parse(R"({"noise": {"outcomes": "other"}})"), ConfigError);
    CHECK_THROWS_AS(RunConfig::load("/nonexistent/cfg.json"), ConfigError);
}

TEST_CASE("ideal pipeline reconstructs phi-plus")
{
    auto c = RunConfig::parse(R"({"noise": {"outcomes": "ideal"},
                                  "experiment": {"duration_s": 0.05},
                                  "tomography": {"bootstrap": 100}})");
    auto dir = scratch("ideal");
    auto r = run_pipeline(c, dir, TagFormat::Records);
    CHECK(r.tomography.fidelity >= 0.99);
    CHECK(r.predicted_fidelity == 1.0);
    for (auto f : {"tags.bin", "tags.bin.json", "coincidences.csv", "rho.txt", "metrics.txt",
                   "pipeline.txt"})
        CHECK(fs::exists(dir / f));
    CHECK(slurp(dir / "pipeline.txt").rfind("# dfs ", 0) == 0);
}

TEST_CASE("count files")
{
    auto dir = scratch("counts");
    std::ofstream(dir / "bad.csv") << "setting,m,n,count\nHH,H,H,abc\n";
    CHECK_THROWS_AS(read_counts(dir / "bad.csv"), DataError);
    CHECK_THROWS_AS(read_counts(dir / "none.csv"), DataError);
    std::ofstream(dir / "few.csv") << "# header\nm,n,count\nH,H,10\nV,V,12\n";
    CHECK_THROWS_AS(read_counts(dir / "few.csv"), DataError);
    {
        std::ofstream f(dir / "ok.csv");
        f << "# header\nm,n,count\n";
        for (auto s : minimal_settings())
            f << to_char(s.m) << "," << to_char(s.n) << ",10\n";
    }
    auto d = read_counts(dir / "ok.csv");
    CHECK(d.entries.size() == 16);
    CHECK(d.total() == doctest::Approx(160));
}

TEST_CASE("command-line exit codes")
{
    auto dir = scratch("cli");
    std::ofstream(dir / "bad.json") << R"({"unknown": 1})";
    std::ofstream(dir / "short.json") << R"({"experiment": {"duration_s": 0.01},
                                           "tomography": {"bootstrap": 100}})";
    std::string out = " --out " + dir.string();
    CHECK(cli("predict" + out) == 0);
    CHECK(fs::exists(dir / "predict.txt"));
    CHECK(cli("predict --config " + (dir / "bad.json").string() + out) == 2);
    CHECK(cli("nosuchcommand") == 2);
    CHECK(cli("tomography --input " + (dir / "missing.csv").string() + out) == 3);
    CHECK(cli("protocol" + out) == 0);
    CHECK(cli("scaling" + out) == 0);
    CHECK(cli("simulate --format text --config " + (dir / "short.json").string() + out) == 0);
    CHECK(cli("coincide --input " + (dir / "tags.txt").string() + " --config "
              + (dir / "short.json").string() + out)
          == 0);
    CHECK(cli("tomography --config " + (dir / "short.json").string() + out) == 0);
    CHECK(fs::exists(dir / "rho.txt"));
    CHECK(cli("--version") == 0);
}
