// Runs the cdds executable end to end and checks the exit-code contract.

#include <json.hpp>

#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Run {
    int code = -1;
    std::string out;
};

Run run(const std::string& args) {
    const std::string cmd = std::string(CDDS_CLI) + " " + args + " 2>/dev/null";
    Run r;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (pipe == nullptr) return r;
    std::array<char, 4096> buf{};
    std::size_t got = 0;
    while ((got = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), got);
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string system_file(const std::string& name) { return std::string(CDDS_SYSTEMS) + "/" + name; }

fs::path scratch_dir() {
    const fs::path dir = fs::temp_directory_path() / ("cdds_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    return dir;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string write_file(const fs::path& p, const std::string& text) {
    std::ofstream(p) << text;
    return p.string();
}

}  // namespace

TEST(Cli, AnalyzeFeasibleBoth) {
    const auto r = run("analyze --system " + system_file("scalar_delay_r0.5.json") + " --theorem both");
    ASSERT_EQ(r.code, 0);
    const auto j = nlohmann::json::parse(r.out);
    EXPECT_EQ(j["verdict"], "feasible");
    ASSERT_EQ(j["theorems"].size(), 2u);
    EXPECT_EQ(j["theorems"][0]["verdict"], "feasible");
    EXPECT_EQ(j["theorems"][1]["verdict"], "feasible");
    EXPECT_LE(j["congruence_residual"].get<double>(), 1e-10);
}

TEST(Cli, AnalyzeUnstableIsInfeasibleWithinBound) {
    const auto r = run("analyze --system " + system_file("scalar_delay_r2.0.json"));
    EXPECT_EQ(r.code, 2);
    const auto j = nlohmann::json::parse(r.out);
    EXPECT_EQ(j["theorems"][0]["verdict"], "infeasible-within-bound");
    EXPECT_EQ(j["theorems"][1]["verdict"], "infeasible-within-bound");
}

TEST(Cli, AnalyzeSingleTheoremAndGammaOverride) {
    EXPECT_EQ(run("analyze --system " + system_file("scalar_delay_r1.0.json") + " --theorem 1").code, 0);
    EXPECT_EQ(run("analyze --system " + system_file("affine_kernel.json") + " --theorem 2").code, 0);
    // gamma below the true L2 gain of the loop
    EXPECT_EQ(run("analyze --system " + system_file("scalar_delay_r0.5.json") + " --theorem 1 --gamma 0.5").code, 2);
}

TEST(Cli, AnalyzeCustomSupply) {
    const auto r = run("analyze --system " + system_file("passive_custom_supply.json") + " --supply custom");
    ASSERT_EQ(r.code, 0);
    EXPECT_EQ(nlohmann::json::parse(r.out)["verdict"], "feasible");
}

TEST(Cli, ReportIsDeterministicApartFromTimings) {
    auto strip = [](nlohmann::json j) {
        j.erase("timings");
        for (auto& t : j["theorems"]) t.erase("seconds");
        return j;
    };
    const std::string args = "analyze --system " + system_file("affine_kernel.json");
    const auto a = run(args);
    const auto b = run(args);
    EXPECT_EQ(strip(nlohmann::json::parse(a.out)), strip(nlohmann::json::parse(b.out)));
}

TEST(Cli, InputErrors) {
    const fs::path dir = scratch_dir();
    EXPECT_EQ(run("analyze --system " + (dir / "missing.json").string()).code, 1);
    const auto broken = write_file(dir / "broken.json", "{ \"dimensions\": ");
    EXPECT_EQ(run("analyze --system " + broken).code, 1);
    const auto no_a4 = write_file(dir / "no_a4.json", R"({"dimensions": {"n": 1, "nu": 1, "m": 1, "q": 1},
        "delay": 1, "matrices": {"a1": [[0]], "a2": [[-1]], "a3": [[0]], "a5": [[0]], "c1": [[1]], "c2": [[0]],
        "c3": [[0]], "d1": [[1]], "d2": [[0]]}, "supply": {"preset": "hinf", "gamma": 2}})");
    EXPECT_EQ(run("analyze --system " + no_a4).code, 1);
    EXPECT_EQ(run("bogus").code, 1);
    EXPECT_EQ(run("analyze --system " + system_file("scalar_delay_r0.5.json") + " --theorem 3").code, 1);
}

TEST(Cli, MissingFieldIsNamed) {
    const fs::path dir = scratch_dir();
    const auto no_a4 = write_file(dir / "no_a4_named.json", R"({"dimensions": {"n": 1, "nu": 1, "m": 1, "q": 1},
        "delay": 1, "matrices": {"a1": [[0]], "a2": [[-1]], "a3": [[0]], "a5": [[0]], "c1": [[1]], "c2": [[0]],
        "c3": [[0]], "d1": [[1]], "d2": [[0]]}, "supply": {"preset": "hinf", "gamma": 2}})");
    const std::string cmd = std::string(CDDS_CLI) + " analyze --system " + no_a4 + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    ASSERT_NE(pipe, nullptr);
    std::string text;
    std::array<char, 1024> buf{};
    std::size_t got = 0;
    while ((got = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) text.append(buf.data(), got);
    pclose(pipe);
    EXPECT_NE(text.find("matrices.a4"), std::string::npos) << text;
}

TEST(Cli, SimulateClassicExample) {
    const fs::path dir = scratch_dir();
    const auto classic = write_file(dir / "classic.json", R"({"dimensions": {"n": 1, "nu": 1, "m": 1, "q": 0},
        "delay": 1, "matrices": {"a1": [[0]], "a2": [[-1]], "a3": [[0]], "a4": [[1]], "a5": [[0]],
        "c1": [[1]], "c2": [[0]], "c3": [[0]]},
        "simulation": {"x0": [1], "phi": [1]}})");
    const auto r = run("simulate --system " + classic + " --tfinal 2 --steps-per-delay 64");
    ASSERT_EQ(r.code, 0);
    std::istringstream in(r.out);
    std::string line;
    std::string last;
    std::getline(in, line);
    EXPECT_EQ(line, "t,x_1,y_1,z_1,V,supply_integral");
    while (std::getline(in, line)) last = line;
    const auto comma = last.find(',');
    EXPECT_NEAR(std::stod(last.substr(0, comma)), 2.0, 1e-12);
    EXPECT_NEAR(std::stod(last.substr(comma + 1)), -0.5, 1e-4);
}

TEST(Cli, SimulateZeroDataGivesZeroColumns) {
    const fs::path dir = scratch_dir();
    const auto zero = write_file(dir / "zero.json", R"({"dimensions": {"n": 1, "nu": 1, "m": 1, "q": 0},
        "delay": 1, "matrices": {"a1": [[0]], "a2": [[-1]], "a3": [[0]], "a4": [[1]], "a5": [[0]],
        "c1": [[1]], "c2": [[0]], "c3": [[0]]}})");
    const auto csv = dir / "zero.csv";
    const auto r = run("simulate --system " + zero + " --tfinal 1 --out " + csv.string());
    ASSERT_EQ(r.code, 0);
    std::istringstream in(read_file(csv));
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        std::istringstream cells(line);
        std::string cell;
        std::getline(cells, cell, ',');  // t
        while (std::getline(cells, cell, ',')) EXPECT_EQ(std::stod(cell), 0.0);
    }
}

TEST(Cli, SimulateDivergenceExitCode) {
    const auto r = run("simulate --system " + system_file("scalar_delay_r2.0.json") + " --tfinal 2000 --out " +
                       (scratch_dir() / "div.csv").string());
    EXPECT_EQ(r.code, 4);
}

TEST(Cli, SimulateWithCertificateReportsDissipation) {
    const fs::path dir = scratch_dir();
    const auto cert = (dir / "cert.json").string();
    ASSERT_EQ(run("analyze --system " + system_file("scalar_delay_r0.5.json") + " --theorem 1 --certificate " + cert)
                  .code,
              0);
    const auto r = run("simulate --system " + system_file("scalar_delay_r0.5.json") + " --certificate " + cert +
                       " --seed 3 --tfinal 5 --out " + (dir / "traj.csv").string());
    ASSERT_EQ(r.code, 0);
    const auto j = nlohmann::json::parse(r.out);
    ASSERT_TRUE(j.contains("dissipation"));
    EXPECT_TRUE(j["dissipation"]["pass"].get<bool>());
}

TEST(Cli, ExportIsByteStable) {
    const fs::path dir = scratch_dir();
    const auto a = dir / "a.dat-s";
    const auto b = dir / "b.dat-s";
    const std::string base = "export --system " + system_file("affine_kernel.json") + " --theorem 2 --out ";
    ASSERT_EQ(run(base + a.string()).code, 0);
    ASSERT_EQ(run(base + b.string()).code, 0);
    const auto text = read_file(a);
    EXPECT_FALSE(text.empty());
    EXPECT_EQ(text, read_file(b));
    EXPECT_EQ(text[0], '*');
    EXPECT_EQ(run("export --system " + system_file("affine_kernel.json") + " --theorem both").code, 1);
    EXPECT_EQ(run("export --system " + system_file("affine_kernel.json")).code, 1);
}
