#include <ptreg/driver.hpp>

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

using namespace ptreg;
namespace fs = std::filesystem;

namespace {

fs::path scratch_root()
{
    return fs::temp_directory_path() / ("ptreg_test_" + std::to_string(::getpid()));
}

class ScratchCleanup : public ::testing::Environment {
public:
    void TearDown() override { fs::remove_all(scratch_root()); }
};

const auto* const cleanup = ::testing::AddGlobalTestEnvironment(new ScratchCleanup);

fs::path scratch_dir(const std::string& name)
{
    const fs::path dir = scratch_root() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p)
{
    std::ifstream is(p, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

int count_lines(const std::string& s)
{
    return static_cast<int>(std::count(s.begin(), s.end(), '\n'));
}

RunConfig linear_config(int levels)
{
    RunConfig c;
    c.problem_name = "linear";
    c.max_levels = levels;
    c.initial_gamma10 = 1.0;
    c.initial_delta = 1.0;
    return c;
}

int run_cli(const std::string& args)
{
    const char* cli = std::getenv("PTREG_CLI");
    if (cli == nullptr)
        return -1;
    const std::string cmd = std::string(cli) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

} // namespace

TEST(RunConfig, ValidationRejectsBadValues)
{
    RunConfig c;
    EXPECT_NO_THROW(c.validate());
    c.q = 1.0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = RunConfig{};
    c.theta = 0.0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = RunConfig{};
    c.tol = -1.0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = RunConfig{};
    c.max_levels = -1;
    EXPECT_THROW(c.validate(), ConfigError);
    c = RunConfig{};
    c.gamma_max_override = 0.5;
    EXPECT_THROW(c.validate(), ConfigError);
    c = RunConfig{};
    c.quad_degree = 9;
    EXPECT_THROW(c.validate(), ConfigError);
    c = RunConfig{};
    c.problem_name = "nope";
    EXPECT_THROW(run(c), ConfigError);
    c = RunConfig{};
    c.initial_delta = 2.0;
    EXPECT_THROW(run(c), ConfigError);
}

TEST(Run, EmptyRunWritesHeaderOnly)
{
    RunConfig c = linear_config(0);
    const RunSummary s = run(c);
    EXPECT_TRUE(s.levels.empty());
    const fs::path dir = scratch_dir("empty");
    write_outputs(c, s, dir);
    EXPECT_EQ(slurp(dir / "levels.csv"), std::string(levels_csv_header()) + "\n");
    EXPECT_EQ(slurp(dir / "iterations.csv"), std::string(iterations_csv_header()) + "\n");
    EXPECT_TRUE(fs::exists(dir / "config.echo"));
}

TEST(Run, LinearProblemConvergesOnEveryLevel)
{
    const RunSummary s = run(linear_config(8));
    ASSERT_EQ(s.levels.size(), 8u);
    EXPECT_FALSE(s.aborted);
    for (const auto& row : s.levels) {
        EXPECT_EQ(row.exit, ExitReason::Converged) << "level " << row.level;
        EXPECT_GE(row.iterations, 1);
        EXPECT_LE(row.iterations, 2);
        EXPECT_LE(row.r_norm, 1e-10);
        EXPECT_DOUBLE_EQ(row.delta, 1.0);
    }
    for (std::size_t k = 1; k < s.levels.size(); ++k) {
        EXPECT_GT(s.levels[k].dof, s.levels[k - 1].dof);
        EXPECT_LT(s.levels[k].h1_error, s.levels[k - 1].h1_error);
    }
}

TEST(Run, LinearProblemWithDefaultsReachesFullSource)
{
    RunConfig c;
    c.problem_name = "linear";
    c.max_levels = 12;
    const RunSummary s = run(c);
    ASSERT_FALSE(s.levels.empty());
    EXPECT_DOUBLE_EQ(s.levels.front().delta, 0.5);
    for (std::size_t k = 1; k < s.levels.size(); ++k)
        EXPECT_GE(s.levels[k].delta, s.levels[k - 1].delta);
    EXPECT_DOUBLE_EQ(s.levels.back().delta, 1.0);
    EXPECT_EQ(s.levels.back().exit, ExitReason::Converged);
}

TEST(Run, Example1ShortRunKeepsParameterBounds)
{
    RunConfig c;
    c.problem_name = "ex1";
    c.max_levels = 8;
    const RunSummary s = run(c);
    ASSERT_EQ(s.levels.size(), 8u);
    EXPECT_DOUBLE_EQ(s.levels.front().delta, 0.2);
    for (std::size_t k = 0; k < s.levels.size(); ++k) {
        const auto& r = s.levels[k];
        EXPECT_GE(r.gamma01, r.gamma10);
        EXPECT_GE(r.gamma10, 1.0);
        EXPECT_LE(r.gamma10, 5.0);
        EXPECT_GE(r.sigma01, 0.0);
        EXPECT_GE(r.alpha, 0.0);
        EXPECT_GT(r.delta, 0.0);
        EXPECT_LE(r.delta, 1.0);
        if (k > 0) {
            EXPECT_GE(r.delta, s.levels[k - 1].delta);
        }
        EXPECT_TRUE(std::isnan(r.h1_error));
    }
    std::size_t level_iterations = 0;
    for (const auto& r : s.levels)
        level_iterations += static_cast<std::size_t>(r.iterations);
    EXPECT_EQ(level_iterations, s.iterations.size());
}

TEST(Run, ExportSelectsLevels)
{
    RunConfig c = linear_config(11);
    c.export_levels = {10};
    const RunSummary s = run(c);
    const fs::path dir = scratch_dir("export");
    write_outputs(c, s, dir);
    int vtk = 0;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.path().extension() == ".vtk")
            ++vtk;
    EXPECT_EQ(vtk, 1);
    const std::string body = slurp(dir / "level_10.vtk");
    EXPECT_EQ(body.rfind("# vtk DataFile Version 3.0\n", 0), 0u);
    const auto& snap = s.snapshots.front();
    EXPECT_NE(body.find("POINTS " + std::to_string(snap.mesh.vertex_count()) + " double"), std::string::npos);
    EXPECT_NE(body.find("CELL_DATA " + std::to_string(snap.mesh.triangle_count())), std::string::npos);
    EXPECT_NE(body.find("SCALARS u double 1"), std::string::npos);
    EXPECT_NE(body.find("SCALARS eta_sq double 1"), std::string::npos);
}

TEST(Run, CsvShape)
{
    RunConfig c;
    c.problem_name = "ex1";
    c.max_levels = 3;
    const RunSummary s = run(c);
    const std::string levels = levels_csv(s);
    const std::string iterations = iterations_csv(s);
    EXPECT_EQ(count_lines(levels), 4);
    EXPECT_EQ(count_lines(iterations), 1 + static_cast<int>(s.iterations.size()));
    std::istringstream is(iterations);
    std::string line;
    std::getline(is, line);
    int terminal = 0;
    while (std::getline(is, line)) {
        EXPECT_EQ(std::count(line.begin(), line.end(), ','), 13);
        if (line.substr(line.rfind(',') + 1) != "none")
            ++terminal;
    }
    EXPECT_EQ(terminal, 3);
}

TEST(Run, Deterministic)
{
    for (const char* name : {"ex2", "ex1"}) {
        RunConfig c;
        c.problem_name = name;
        c.max_levels = 10;
        const RunSummary a = run(c);
        const RunSummary b = run(c);
        EXPECT_EQ(levels_csv(a), levels_csv(b)) << name;
        EXPECT_EQ(iterations_csv(a), iterations_csv(b)) << name;
    }
}

TEST(Run, ConfigEchoRoundTripsThroughCli)
{
    if (std::getenv("PTREG_CLI") == nullptr)
        GTEST_SKIP() << "PTREG_CLI not set";
    const fs::path a = scratch_dir("echo_a");
    const fs::path b = scratch_dir("echo_b");
    ASSERT_EQ(run_cli("solve --quiet --problem linear --max-levels 3 --theta 0.4 --out " + a.string()), 0);
    ASSERT_EQ(run_cli("solve --quiet --config " + (a / "config.echo").string() + " --out " + b.string()), 0);
    EXPECT_EQ(slurp(a / "levels.csv"), slurp(b / "levels.csv"));
    EXPECT_EQ(slurp(a / "config.echo"), slurp(b / "config.echo"));
}

TEST(Cli, ExitCodes)
{
    if (std::getenv("PTREG_CLI") == nullptr)
        GTEST_SKIP() << "PTREG_CLI not set";
    const fs::path out = scratch_dir("cli");
    EXPECT_EQ(run_cli("--help"), 0);
    EXPECT_EQ(run_cli(""), 1);
    EXPECT_EQ(run_cli("solve --problem ex3"), 1);
    EXPECT_EQ(run_cli("solve --q 1.5 --out " + out.string()), 1);
    EXPECT_EQ(run_cli("solve --quad-degree 8 --out " + out.string()), 1);
    EXPECT_EQ(run_cli("solve --gamma-init 0.5 --out " + out.string()), 1);
    EXPECT_EQ(run_cli("solve --config /nonexistent/file.toml"), 1);
    std::ofstream(out / "flat.toml") << "problem = linear\n";
    EXPECT_EQ(run_cli("solve --config " + (out / "flat.toml").string()), 1);
    EXPECT_EQ(run_cli("solve --quiet --problem linear --max-levels 2 --out " + out.string()), 0);
    EXPECT_TRUE(fs::exists(out / "levels.csv"));
    EXPECT_EQ(count_lines(slurp(out / "levels.csv")), 3);
}
