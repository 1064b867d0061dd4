#include "relcap/manifest.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <sys/wait.h>
#include <unistd.h>

using namespace relcap;
namespace fs = std::filesystem;

namespace {

struct CliRun {
    int code = -1;
    std::string output;
};

fs::path temp_dir(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("relcap_cli_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

CliRun run_cli(const std::string& args, const fs::path& dir) {
    const auto log = dir / "stdout.txt";
    const std::string cmd = std::string(RELCAP_CLI) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    CliRun r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.output = read_file(log);
    return r;
}

fs::path write_config(const fs::path& dir, const std::string& text) {
    const auto path = dir / "run.cfg";
    std::ofstream(path) << text;
    return path;
}

std::string config(const std::string& name) { return std::string(RELCAP_CONFIGS) + "/" + name; }

}  // namespace

TEST(Cli, CapacityWritesReportsAndManifest) {
    const auto dir = temp_dir("capacity");
    const auto out = dir / "out";
    const auto r = run_cli("capacity --config " + config("square_capacity.cfg") + " --out " + out.string(), dir);
    ASSERT_EQ(r.code, 0) << r.output;
    const auto rep = Json::parse(read_file(out / "capacity-p2.json"));
    EXPECT_TRUE(rep.at("converged").get<bool>());
    EXPECT_GT(rep.at("value").get<double>(), 0.0);
    EXPECT_TRUE(fs::exists(out / "extremal-p1.5.csv"));
    const auto man = Json::parse(read_file(out / "manifest.json"));
    EXPECT_TRUE(man.at("header").contains("created"));
    ASSERT_EQ(man.at("artifacts").size(), 6u);
    for (const auto& a : man.at("artifacts"))
        EXPECT_EQ(a.at("sha256").get<std::string>(), sha256_hex(read_file(out / a.at("file").get<std::string>())));
    EXPECT_EQ(man.at("solves").size(), 3u);
    fs::remove_all(dir);
}

TEST(Cli, EmptySetHasZeroCapacity) {
    const auto dir = temp_dir("empty");
    const auto r = run_cli("capacity --config " + config("empty_set.cfg") + " --out " + (dir / "out").string(), dir);
    ASSERT_EQ(r.code, 0) << r.output;
    EXPECT_EQ(Json::parse(read_file(dir / "out" / "capacity-p2.json")).at("value").get<double>(), 0.0);
    fs::remove_all(dir);
}

TEST(Cli, BadExponentIsConfigError) {
    const auto dir = temp_dir("badp");
    const auto r = run_cli("capacity --config " + config("bad_exponent.cfg") + " --out " + (dir / "out").string(), dir);
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.output.find("[1.1, 10]"), std::string::npos) << r.output;
    fs::remove_all(dir);
}

TEST(Cli, UnknownKeyAndMissingFile) {
    const auto dir = temp_dir("badkey");
    const auto cfg = write_config(dir, "domain.h = 0.25\nset.A = omega\ndomain.colour = red\n");
    EXPECT_EQ(run_cli("capacity --config " + cfg.string() + " --out " + (dir / "out").string(), dir).code, 2);
    EXPECT_EQ(run_cli("capacity --config " + (dir / "nope.cfg").string(), dir).code, 2);
    EXPECT_EQ(run_cli("frobnicate", dir).code, 2);
    fs::remove_all(dir);
}

TEST(Cli, NonConvergenceExitCode) {
    const auto dir = temp_dir("noconv");
    const auto cfg = write_config(dir, "domain.h = 0.125\nset.A = nearest 0.5 0.5\np = 3\nsolver.max_iterations = 0\n");
    EXPECT_EQ(run_cli("capacity --config " + cfg.string() + " --out " + (dir / "out").string(), dir).code, 3);
    fs::remove_all(dir);
}

TEST(Cli, ViolationExitCode) {
    const auto dir = temp_dir("violation");
    const auto cfg = write_config(dir,
                                  "domain.h = 0.25\ndomain.box = 0 0 1 1\nouter.h = 0.25\nouter.box = -1 -1 2 2\n"
                                  "p = 2\nseed = 1\ncheck.trials = 3\ncheck.calibrated_constant = 1000\n");
    const auto r = run_cli("check extension_comparison --config " + cfg.string() + " --out " + (dir / "out").string(), dir);
    EXPECT_EQ(r.code, 1) << r.output;
    fs::remove_all(dir);
}

TEST(Cli, RerunIsByteIdentical) {
    const auto dir = temp_dir("rerun");
    const auto cfg = write_config(dir, "domain.h = 0.125\np = 1.5 3\nseed = 17\ncheck.trials = 6\n");
    for (const char* sub : {"a", "b"}) {
        const auto r = run_cli("check strong_subadditivity --config " + cfg.string() + " --jobs 3 --out " +
                                   (dir / sub).string(),
                               dir);
        ASSERT_EQ(r.code, 0) << r.output;
    }
    std::size_t compared = 0;
    for (const auto& e : fs::directory_iterator(dir / "a")) {
        const auto name = e.path().filename();
        auto a = read_file(e.path()), b = read_file(dir / "b" / name);
        if (name == "manifest.json") {
            auto ja = Json::parse(a), jb = Json::parse(b);
            ja.erase("header");
            jb.erase("header");
            a = ja.dump();
            b = jb.dump();
        }
        EXPECT_EQ(a, b) << name;
        ++compared;
    }
    EXPECT_GE(compared, 3u);
    fs::remove_all(dir);
}

TEST(Cli, RefineAndEmit) {
    const auto dir = temp_dir("refine");
    const auto r = run_cli("refine --config " + config("tanh_refine.cfg") + " --out " + (dir / "out").string(), dir);
    ASSERT_EQ(r.code, 0) << r.output;
    const auto cfg = write_config(dir, "domain.h = 0.125\nset.A = ball 0.5 0.5 0.2\np = 2\nemit.source = extremal\n");
    const auto e = run_cli("emit --config " + cfg.string() + " --out " + (dir / "emit").string(), dir);
    EXPECT_EQ(e.code, 0) << e.output;
    EXPECT_GE(std::distance(fs::directory_iterator(dir / "emit"), fs::directory_iterator{}), 2);
    fs::remove_all(dir);
}
