#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace {

const std::string kBin = MCOPLAN_BIN;
const std::string kDir = MCO_SCENARIO_DIR;

struct Run {
    int code = -1;
    std::string out;
};

Run run(const std::string& args)
{
    auto log = std::filesystem::temp_directory_path() / ("mcoplan_test_" + std::to_string(::getpid()) + ".out");
    std::string cmd = kBin + " " + args + " > " + log.string() + " 2>&1";
    int status = std::system(cmd.c_str());
    Run r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream in(log);
    std::stringstream ss;
    ss << in.rdbuf();
    r.out = ss.str();
    std::filesystem::remove(log);
    return r;
}

std::string read_file(const std::filesystem::path& p)
{
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

TEST(Cli, PlanSoft)
{
    auto r = run("plan " + kDir + "/set1.cfg --mode soft --eps 0.03 -Y 20");
    EXPECT_EQ(r.code, 0) << r.out;
    EXPECT_NE(r.out.find("GCASD"), std::string::npos);
    EXPECT_NE(r.out.find("power_W"), std::string::npos);
}

TEST(Cli, PlanHardWritesCsv)
{
    auto csv = std::filesystem::temp_directory_path() / "mcoplan_plan.csv";
    auto r = run("plan " + kDir + "/set1.cfg --mode hard -Y 10 --lambda-steps 10 --csv " + csv.string());
    EXPECT_EQ(r.code, 0) << r.out;
    auto text = read_file(csv);
    EXPECT_EQ(text.rfind("param,value,mode,method,power_W,cost,y,x_1,x_2,x_3,violation_rate,seed\n", 0), 0u);
    EXPECT_NE(text.find("plan,,hard,GCAHD,"), std::string::npos);
    std::filesystem::remove(csv);
}

TEST(Cli, AllLocalAtTightEpsilon)
{
    auto r = run("plan " + kDir + "/set1.cfg --eps 0.01 --budget 120 -Y 10");
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("power_W         29.25"), std::string::npos) << r.out;
}

TEST(Cli, MissingFileIsUsageError)
{
    auto r = run("plan " + kDir + "/nope.cfg");
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.out.find("error"), std::string::npos);
}

TEST(Cli, BadFlagsAreUsageErrors)
{
    EXPECT_EQ(run("plan " + kDir + "/set1.cfg --mode firm").code, 2);
    EXPECT_EQ(run("").code, 2);
    EXPECT_EQ(run("sweep " + kDir + "/set1.cfg --param speed --values 1").code, 2);
    EXPECT_EQ(run("sweep " + kDir + "/set1.cfg --param budget --values 1,x").code, 2);
}

TEST(Cli, ValidateRejectsOversizedAllocation)
{
    auto r = run("validate " + kDir + "/set1.cfg --x 16,0,0 --y 0.5");
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.out.find("outside"), std::string::npos) << r.out;
}

TEST(Cli, ValidateAllLocal)
{
    auto r = run("validate " + kDir + "/set1.cfg --x 0,0,0 --y 0 --tasks 20000");
    EXPECT_EQ(r.code, 0) << r.out;
    EXPECT_NE(r.out.find("overall pass"), std::string::npos) << r.out;
}

TEST(Cli, SweepIsReproducible)
{
    auto a = std::filesystem::temp_directory_path() / "mcoplan_sweep_a.csv";
    auto b = std::filesystem::temp_directory_path() / "mcoplan_sweep_b.csv";
    std::string args = "sweep " + kDir + "/set1.cfg --param budget --values 0,60,120 --seeds 1 --tasks 5000 -Y 10";
    EXPECT_EQ(run(args + " --csv " + a.string()).code, 0);
    EXPECT_EQ(run(args + " --workers 3 --csv " + b.string()).code, 0);
    auto ta = read_file(a);
    EXPECT_EQ(ta, read_file(b));
    EXPECT_EQ(std::count(ta.begin(), ta.end(), '\n'), 7);
    EXPECT_NE(ta.find("GCASD+DES"), std::string::npos);
    std::filesystem::remove(a);
    std::filesystem::remove(b);
}

TEST(Cli, OptRefusesFullInstance)
{
    auto r = run("opt " + kDir + "/set1.cfg --max-combinations 100");
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.out.find("reduced instance"), std::string::npos) << r.out;
}

}  // namespace
