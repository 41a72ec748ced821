#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "spde/errors.hpp"

namespace fs = std::filesystem;
using spde::cli::run;

namespace {

struct Outcome {
    int code;
    std::string out, err;
};

Outcome invoke(const std::vector<std::string>& args)
{
    std::ostringstream out, err;
    const int code = run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// Fresh scratch directory removed on scope exit.
struct Scratch {
    fs::path dir;
    explicit Scratch(const std::string& name) : dir(fs::temp_directory_path() / name)
    {
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    ~Scratch() { fs::remove_all(dir); }
    std::string operator/(const std::string& f) const { return (dir / f).string(); }
};

struct SeedEnv {
    explicit SeedEnv(const char* v) { v ? setenv("SPDE_SEED", v, 1) : unsetenv("SPDE_SEED"); }
    ~SeedEnv() { unsetenv("SPDE_SEED"); }
};

const std::vector<std::string> kSmallAdditive{"additive-convergence", "--beta", "1",
                                              "--samples", "3", "--modes", "4",
                                              "--ladder", "3,4", "--fine-power", "6",
                                              "--jobs", "1"};

std::vector<std::string> with(std::vector<std::string> base, const std::vector<std::string>& more)
{
    base.insert(base.end(), more.begin(), more.end());
    return base;
}

} // namespace

TEST_SUITE("cli") {

TEST_CASE("help and usage errors")
{
    const auto help = invoke({"--help"});
    CHECK(help.code == 0);
    for (const char* sub : {"additive-convergence", "multiplicative-convergence", "lemma-lab", "ou-check"})
        CHECK(help.out.find(sub) != std::string::npos);
    CHECK(invoke({"lemma-lab", "--help"}).code == 0);

    const auto none = invoke({});
    CHECK(none.code == 2);
    const auto missing = invoke({"additive-convergence"});
    CHECK(missing.code == 2);
    CHECK(missing.err.find("--beta") != std::string::npos);
    CHECK(invoke({"lemma-lab", "--lemma", "5"}).code == 2);
    CHECK(invoke({"lemma-lab", "--bogus"}).code == 2);
    CHECK(invoke({"ou-check", "--samples", "1"}).code == 2);
    CHECK(invoke({"additive-convergence", "--beta", "-1"}).code == 2);
    CHECK(invoke({"additive-convergence", "--beta", "1", "--out", "/nonexistent/dir"}).code == 2);
}

TEST_CASE("config text")
{
    const auto kv = spde::cli::parse_config_text("# header\nbeta = 1.5\n\nt_final=0.5 # trailing\n");
    REQUIRE(kv.size() == 2);
    CHECK(kv.at("beta") == "1.5");
    CHECK(kv.at("t-final") == "0.5");
    CHECK_THROWS_AS(spde::cli::parse_config_text("beta 1\n"), spde::ConfigError);
    CHECK_THROWS_AS(spde::cli::parse_config_text("beta=1\nbeta=2\n"), spde::ConfigError);
    CHECK_THROWS_AS(spde::cli::parse_config_text("beta=\n"), spde::ConfigError);
}

TEST_CASE("config file precedence")
{
    Scratch s("spde_cli_config");
    {
        std::ofstream f(s / "run.cfg");
        f << "beta = 1.5\nsamples = 5\nmodes = 4\nladder = 3,4\nfine_power = 6\n";
    }
    const auto r = invoke({"additive-convergence", "--config", s / "run.cfg", "--samples", "2",
                           "--out", s.dir.string()});
    CHECK(r.code == 0);
    CHECK(fs::exists(s / "additive_linear_1.5_2.csv"));
    CHECK(fs::exists(s / "additive_linear_1.5_2.json"));
    CHECK(r.out.find("fitted rate") != std::string::npos);

    {
        std::ofstream f(s / "bad.cfg");
        f << "beta = 1\ncolour = blue\n";
    }
    const auto bad = invoke({"additive-convergence", "--config", s / "bad.cfg"});
    CHECK(bad.code == 2);
    CHECK(bad.err.find("colour") != std::string::npos);
    CHECK(invoke({"additive-convergence", "--config", s / "absent.cfg"}).code == 2);
}

TEST_CASE("seed resolution")
{
    Scratch s("spde_cli_seed");
    auto csv_for = [&](const std::vector<std::string>& extra) {
        fs::remove(s / "additive_linear_1_3.csv");
        const auto r = invoke(with(with(kSmallAdditive, {"--out", s.dir.string()}), extra));
        REQUIRE(r.code == 0);
        return slurp(s / "additive_linear_1_3.csv");
    };
    std::string env7, flag7, flag0, fallback;
    {
        SeedEnv e("7");
        env7 = csv_for({});
        flag0 = csv_for({"--seed", "0"});
    }
    flag7 = csv_for({"--seed", "7"});
    fallback = csv_for({});
    CHECK(env7 == flag7);
    CHECK(fallback == flag0);
    CHECK(env7 != fallback);

    SeedEnv e("seven");
    CHECK(invoke(with(kSmallAdditive, {"--out", s.dir.string()})).code == 2);
    CHECK(invoke(with(kSmallAdditive, {"--out", s.dir.string(), "--seed", "-3"})).code == 2);
}

TEST_CASE("repeated runs are byte identical")
{
    Scratch s("spde_cli_repeat");
    SeedEnv e(nullptr);
    const auto args = with(kSmallAdditive, {"--seed", "11", "--out", s.dir.string()});
    const auto a = invoke(args);
    const auto csv = slurp(s / "additive_linear_1_3.csv");
    const auto json = slurp(s / "additive_linear_1_3.json");
    const auto b = invoke(args);
    CHECK(a.code == 0);
    CHECK(a.out == b.out);
    CHECK(csv == slurp(s / "additive_linear_1_3.csv"));
    CHECK(json == slurp(s / "additive_linear_1_3.json"));

    const std::vector<std::string> ou{"ou-check", "--samples", "200", "--steps", "8", "--seed", "3",
                                      "--out", s / "ou.csv"};
    const auto o1 = invoke(ou);
    const auto row = slurp(s / "ou.csv");
    const auto o2 = invoke(ou);
    CHECK(o1.code == 0);
    CHECK(o1.out == o2.out);
    CHECK(row == slurp(s / "ou.csv"));
    CHECK(row.rfind("mode_i,mode_j,lambda,q,samples,", 0) == 0);
}

TEST_CASE("lemma lab output")
{
    Scratch s("spde_cli_lemma");
    const auto r = invoke({"lemma-lab", "--lemma", "9", "--dim", "1", "--out", s / "l9.csv"});
    CHECK(r.code == 0);
    CHECK(r.out.rfind("lemma,parameters,min,max,ratio\n", 0) == 0);
    CHECK(r.out.find("m=256") != std::string::npos);
    CHECK(slurp(s / "l9.csv").rfind("lemma,parameters,dt,value\n", 0) == 0);

    // Output path is an existing directory: an IO failure, not a usage error.
    const auto io = invoke({"lemma-lab", "--lemma", "9", "--dim", "1", "--out", s.dir.string()});
    CHECK(io.code == 1);
    CHECK(invoke({"lemma-lab", "--dim", "0"}).code == 2);
}

} // TEST_SUITE
