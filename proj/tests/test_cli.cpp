#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
    const std::string cmd = std::string(QVLAT_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

fs::path write_config(const std::string& name, const std::string& body) {
    const fs::path dir = fs::temp_directory_path() / "qvlat_cli_test";
    fs::create_directories(dir);
    const fs::path p = dir / name;
    std::ofstream(p) << body;
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("classify command produces the expected triple and passes --check") {
    const auto cfg = write_config("classify.json", R"({
        "command": "classify",
        "seed": 1,
        "model": {"kind": "redistribution", "family": "poisson", "rho": 2.0}
    })");
    const fs::path out = fs::temp_directory_path() / "qvlat_cli_test" / "out1";
    CHECK(run_cli("--config " + cfg.string() + " --out " + out.string() + " --check") == 0);
    const auto body = nlohmann::json::parse(slurp(out / "classify_redistribution-poisson.json"));
    CHECK(std::abs(body.at("v2").get<double>()) < 1e-8);
    CHECK(std::abs(body.at("v1").get<double>() - 1.0) < 1e-8);
    CHECK(std::abs(body.at("v0").get<double>()) < 1e-8);
    CHECK(std::abs(body.at("D").get<double>() - 0.5) < 1e-8);
}

TEST_CASE("verify command checks the harmonic fiber") {
    const auto cfg = write_config("verify.json", R"({
        "command": "verify",
        "seed": 1,
        "N": 3,
        "M": 3,
        "model": {"kind": "harmonic", "shape2s": 1.0, "rho": 1.0}
    })");
    const fs::path out = fs::temp_directory_path() / "qvlat_cli_test" / "out2";
    CHECK(run_cli("--config " + cfg.string() + " --out " + out.string() + " --check") == 0);
    const auto body = slurp(out / "verify_harmonic1.000000.json");
    CHECK(body.find("\"pass\": true") != std::string::npos);
}

TEST_CASE("missing seed is a validation error (exit 1)") {
    const auto cfg = write_config("noseed.json", R"({
        "command": "classify",
        "model": {"kind": "irw", "rho": 1.0}
    })");
    CHECK(run_cli("--config " + cfg.string()) == 1);
}

TEST_CASE("malformed model is a validation error") {
    const auto cfg = write_config("badmodel.json", R"({
        "command": "classify",
        "seed": 3,
        "model": {"kind": "pep", "kappa": 1, "rho": 0.5}
    })");
    CHECK(run_cli("--config " + cfg.string()) == 1);
}

TEST_CASE("walk command writes a deterministic artifact") {
    const auto cfg = write_config("walk.json", R"({
        "command": "walk",
        "seed": 7,
        "T": 1.0,
        "Ns": [8, 16, 32, 64],
        "model": {"kind": "redistribution", "family": "poisson", "rho": 2.0}
    })");
    const fs::path out1 = fs::temp_directory_path() / "qvlat_cli_test" / "out3";
    const fs::path out2 = fs::temp_directory_path() / "qvlat_cli_test" / "out4";
    CHECK(run_cli("--config " + cfg.string() + " --out " + out1.string() + " --check") == 0);
    CHECK(run_cli("--config " + cfg.string() + " --out " + out2.string() + " --check") == 0);
    const auto a = slurp(out1 / "walk.csv");
    CHECK(a == slurp(out2 / "walk.csv"));
    CHECK(a.rfind("# config_hash=", 0) == 0);
    CHECK(a.find("occupation_time") != std::string::npos);
}

TEST_CASE("hydro command writes profile and martingale tables") {
    const auto cfg = write_config("hydro.json", R"({
        "command": "hydro",
        "seed": 21,
        "Ns": [8, 16],
        "times": [0.05],
        "replicas": 40,
        "profile": {"type": "cosine", "mean": 2.0, "amplitude": 0.5},
        "model": {"kind": "irw", "rho": 2.0}
    })");
    const fs::path out = fs::temp_directory_path() / "qvlat_cli_test" / "out7";
    CHECK(run_cli("--config " + cfg.string() + " --out " + out.string()) == 0);
    const auto prof = slurp(out / "profile.csv");
    CHECK(prof.find("model,N,t,x,mean,se,reference") != std::string::npos);
    const auto mart = slurp(out / "martingale.csv");
    CHECK(mart.find("var_M") != std::string::npos);
    CHECK(mart.find("irw,16,") != std::string::npos);
}

TEST_CASE("simulate snapshots and determinism across thread counts") {
    const auto cfg = write_config("corr.json", R"({
        "command": "correlations",
        "seed": 11,
        "Ns": [8],
        "times": [0.02, 0.05],
        "replicas": 60,
        "profile": {"type": "constant", "mean": 2.0},
        "model": {"kind": "redistribution", "family": "poisson", "rho": 2.0}
    })");
    const fs::path out1 = fs::temp_directory_path() / "qvlat_cli_test" / "out5";
    const fs::path out2 = fs::temp_directory_path() / "qvlat_cli_test" / "out6";
    CHECK(run_cli("--config " + cfg.string() + " --out " + out1.string() +
                  " --threads 1") == 0);
    CHECK(run_cli("--config " + cfg.string() + " --out " + out2.string() +
                  " --threads 4") == 0);
    CHECK(slurp(out1 / "phi.csv") == slurp(out2 / "phi.csv"));
    CHECK(slurp(out1 / "phi_ode.csv") == slurp(out2 / "phi_ode.csv"));
}
