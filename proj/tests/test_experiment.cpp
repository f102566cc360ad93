#include "doctest.h"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "berglab/experiment.hpp"

using namespace berglab;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("berglab_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

int run_cli(const std::string& args) {
    int status = std::system((std::string(BERGLAB_BIN) + " " + args + " > /dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("config round trip and hashing") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    ExperimentConfig c;
    auto j = config_to_json(c);
    auto back = config_from_json(j);
    CHECK(config_to_json(back) == j);
    CHECK(config_hash(back) == config_hash(c));
    back.out_dir = "elsewhere";
    CHECK(config_hash(back) == config_hash(c));
    back.construct.x1 = 9;
    CHECK(config_hash(back) != config_hash(c));
    auto partial = config_from_json(json::parse(R"({"levels": {"count": 1}, "weight": {"family": "single_exp"}})"));
    CHECK(partial.construct.levels == 1);
    CHECK(partial.weight_family == "single_exp");
    CHECK(partial.construct.x1 == c.construct.x1);
    CHECK_THROWS_AS(config_from_json(json::parse(R"({"levles": {}})")), ConfigError);
    CHECK_THROWS_AS(config_from_json(json::parse(R"({"levels": {"count": "two"}})")), ConfigError);
    CHECK_THROWS_AS(config_from_json(json::parse(R"({"weight": {"family": "gaussian"}})")), ConfigError);
    CHECK_THROWS_AS(config_from_json(json::parse(R"({"epsilon0": 1.5})")), ConfigError);
    CHECK_THROWS_AS(config_from_json(json::parse("[]")), ConfigError);
    CHECK(number(1.5) == json(1.5));
    CHECK(number(kNegInf) == json("-inf"));
    CHECK(number(std::nan("")) == json("nan"));
}

TEST_CASE("moments and regularize subcommands") {
    ExperimentConfig c;
    c.weight_family = "unit";
    c.moments_max_n = 8;
    std::ostringstream log;
    auto out = scratch("moments");
    auto r = run_subcommand("moments", c, out, log);
    CHECK(r.exit_code == 0);
    std::istringstream csv(slurp(out / "moments.csv"));
    std::string header, row;
    std::getline(csv, header);
    std::getline(csv, row);
    CHECK(header == "n,log_omega,omega");
    CHECK(row.rfind("0,", 0) == 0);
    CHECK(std::stod(row.substr(row.rfind(',') + 1)) == doctest::Approx(1.0).epsilon(1e-12));
    auto rep = json::parse(slurp(out / "moments.json"));
    CHECK(rep["config_hash"] == config_hash(c));
    CHECK(rep["status"] == "pass");

    ExperimentConfig d;
    auto out2 = scratch("regularize");
    CHECK(run_subcommand("regularize", d, out2, log).exit_code == 0);
    auto reg = json::parse(slurp(out2 / "regularize.json"));
    CHECK(reg["reports"][0]["status"] == "pass");
    CHECK(reg["reports"][0]["checks"].size() == 6);
    auto out3 = scratch("regularize2");
    run_subcommand("regularize", d, out3, log);
    CHECK(slurp(out2 / "minorant.json") == slurp(out3 / "minorant.json"));
    CHECK(slurp(out2 / "regularize.json") == slurp(out3 / "regularize.json"));
    CHECK_THROWS_AS(run_subcommand("bogus", d, out3, log), ConfigError);
}

TEST_CASE("lattice subcommand") {
    ExperimentConfig c;
    std::ostringstream log;
    auto out = scratch("lattice");
    auto r = run_subcommand("lattice-verify", c, out, log);
    CHECK(r.exit_code == 0);
    CHECK(r.failures.empty());
    auto rep = json::parse(slurp(out / "lattice.json"));
    CHECK(rep["reports"].size() == 4);
}

TEST_CASE("command line exit codes") {
    auto dir = scratch("cli");
    std::ofstream(dir / "unit.json") << R"({"weight": {"family": "unit"}, "moments": {"max_n": 4}})";
    std::ofstream(dir / "typo.json") << R"({"wieght": {}})";
    std::ofstream(dir / "broken.json") << R"({"weight": )";
    auto out = (dir / "out").string();
    CHECK(run_cli("moments --config " + (dir / "unit.json").string() + " --out " + out) == 0);
    CHECK(fs::exists(dir / "out" / "moments.csv"));
    CHECK(run_cli("moments --config " + (dir / "typo.json").string() + " --out " + out) == 2);
    CHECK(run_cli("moments --config " + (dir / "broken.json").string() + " --out " + out) == 2);
    CHECK(run_cli("moments --config " + (dir / "missing.json").string()) == 2);
    CHECK(run_cli("frobnicate") == 2);
    CHECK(run_cli("") == 2);
    CHECK(run_cli("construct --config " + (dir / "unit.json").string() + " --out " + out) == 2);
    CHECK(std::system(("BERGLAB_THREADS=0 " + std::string(BERGLAB_BIN) + " moments --out " + out +
                       " > /dev/null 2>&1").c_str()) != 0);
}
