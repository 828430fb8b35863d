#include <gtest/gtest.h>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "kerrflow_cli_test";

int run(const std::string& sub, const json& cfg, const std::string& out, const std::string& extra = "") {
    fs::create_directories(kRoot);
    const fs::path c = kRoot / (out + ".json");
    std::ofstream(c) << cfg.dump();
    fs::remove_all(kRoot / out);
    const std::string cmd = std::string(KERRFLOW_CLI) + " " + sub + " --config " + c.string() + " --out " +
                            (kRoot / out).string() + " " + extra + " > /dev/null 2>&1";
    const int st = std::system(cmd.c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json manifest(const std::string& out) { return json::parse(slurp(kRoot / out / "manifest.json")); }

} // namespace

TEST(Cli, SingleCellPhaseDiagram) {
    const json cfg = {{"grid", {{"delta_min", 0.0}, {"delta_max", 1.4}, {"n_delta", 1}, {"f_min", 0.0}, {"f_max", 1.0}, {"n_f", 1}}}};
    ASSERT_EQ(run("phase-diagram", cfg, "pd1"), 0);
    EXPECT_EQ(slurp(kRoot / "pd1" / "phase_diagram.csv"),
              "delta,f,region_label,n_attractors,n_saddles,chiralities\n0.7,0.5,3a,2,1,CW|CW\n");
    const json m = manifest("pd1");
    EXPECT_EQ(m["status"], "complete");
    EXPECT_EQ(m["resolved"]["grid"]["n_delta"], 1);
}

TEST(Cli, RerunIsByteIdentical) {
    const json cfg = {{"model", {{"delta", 1.0}, {"f", 0.5}, {"aleph", 1.0}}},
                      {"sweep", {{"delta", {1.0, 2.5}}}},
                      {"spectrum", {{"n_omega", 51}, {"max_lag", 40.0}, {"route", "both"}}},
                      {"ensemble", {{"n_traj", 3}, {"t_burn", 20.0}, {"t_total", 120.0}}}};
    ASSERT_EQ(run("chirality", cfg, "c1", "--workers 1 --seed 5"), 0);
    ASSERT_EQ(run("chirality", cfg, "c2", "--workers 1 --seed 5"), 0);
    ASSERT_EQ(run("chirality", cfg, "c3", "--workers 2 --seed 5"), 0);
    for (const char* f : {"chirality_trajectory.csv", "chirality_liouvillian.csv", "peaks.json"}) {
        EXPECT_EQ(slurp(kRoot / "c1" / f), slurp(kRoot / "c2" / f)) << f;
        EXPECT_EQ(slurp(kRoot / "c1" / f), slurp(kRoot / "c3" / f)) << f;
    }
    const json m = manifest("c1");
    EXPECT_EQ(m["seed"], 5);
    EXPECT_EQ(m["resolved"]["ensemble"]["initial"], "attractors");
}

TEST(Cli, SteadyStateSweepRows) {
    const json cfg = {{"model", {{"f", 0.5}}}, {"sweep", {{"delta", {{"min", 0.0}, {"max", 2.0}, {"n", 3}}}, {"aleph", {1.0, 2.0}}}}};
    ASSERT_EQ(run("steady-state", cfg, "ss"), 0);
    const std::string csv = slurp(kRoot / "ss" / "rssp.csv");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 7);
    EXPECT_TRUE(fs::exists(kRoot / "ss" / "steady_state.bin"));
}

TEST(Cli, TrajectoriesSaveRecords) {
    const json cfg = {{"ensemble", {{"n_traj", 2}, {"t_burn", 0.0}, {"t_total", 10.0}}}};
    ASSERT_EQ(run("trajectories", cfg, "tr", "--save-trajectories"), 0);
    EXPECT_TRUE(fs::exists(kRoot / "tr" / "trajectories.bin"));
    EXPECT_TRUE(fs::exists(kRoot / "tr" / "ensemble.csv"));
}

TEST(Cli, UnknownKeyIsConfigError) {
    EXPECT_EQ(run("wigner", {{"model", {{"detuning", 1.0}}}}, "bad1"), 2);
    EXPECT_EQ(run("wigner", {{"colour", 1}}, "bad2"), 2);
    EXPECT_EQ(run("phase-diagram", {{"grid", {{"n_delta", 0}}}}, "bad3"), 2);
}

TEST(Cli, ResourceCapExitCode) {
    const json cfg = {{"model", {{"delta", 4.0}, {"f", 1.5}, {"aleph", 20.0}}}, {"truncation", {{"hard_cap", 20}}}};
    EXPECT_EQ(run("wigner", cfg, "cap"), 4);
    const json m = manifest("cap");
    EXPECT_EQ(m["status"], "failed");
    EXPECT_FALSE(m["error"].get<std::string>().empty());
}

TEST(Cli, SweepRecordsPerPointFailures) {
    const json cfg = {{"model", {{"f", 1.5}}},
                      {"sweep", {{"delta", {0.0, 4.0}}, {"aleph", {1.0, 20.0}}}},
                      {"truncation", {{"hard_cap", 30}}}};
    ASSERT_EQ(run("steady-state", cfg, "partial"), 0);
    const std::string csv = slurp(kRoot / "partial" / "rssp.csv");
    EXPECT_NE(csv.find(",ok\n"), std::string::npos);
    EXPECT_NE(csv.find("cap"), std::string::npos);
}
