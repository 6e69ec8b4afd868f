#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "splatgeo_cli_tests";

int run(const std::string& args) {
    const std::string cmd = std::string(SPLATGEO_CLI) + " --threads 1 " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string dir(const std::string& name) { return (kWork / name).string(); }

class Cli : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        fs::remove_all(kWork);
        fs::create_directories(kWork);
        ASSERT_EQ(run("--set synth.width=32 --set synth.height=32 --set synth.focal=32 synth --views 2 --out " +
                      dir("data")),
                  0);
    }
};

} // namespace

TEST_F(Cli, PrintDefaultsIsValidJson) {
    const std::string out = dir("defaults.json");
    const int status = std::system((std::string(SPLATGEO_CLI) + " --print-defaults > " + out).c_str());
    ASSERT_EQ(WEXITSTATUS(status), 0);
    std::ifstream in(out);
    const auto j = nlohmann::json::parse(in);
    EXPECT_EQ(j.at("depth").at("window").get<double>(), 0.003);
}

TEST_F(Cli, ExitCodes) {
    EXPECT_EQ(run("no-such-command"), 1);
    EXPECT_EQ(run("synth"), 1);
    EXPECT_EQ(run("--set depth.t_end=0.95 extract-depth --scene " + dir("data/scene_gt.sgs") + " --camera " +
                  dir("data/cameras/view_000.json") + " --out " + dir("x.pfm")),
              2);
    EXPECT_EQ(run("--set nope=1 --print-defaults"), 2);
    EXPECT_EQ(run("render --scene " + dir("missing.sgs") + " --camera " + dir("data/cameras/view_000.json") +
                  " --out " + dir("r")),
              3);
}

TEST_F(Cli, EveryCommandReplaysFromItsManifest) {
    const std::string data = dir("data");
    const std::string cam = data + "/cameras/view_000.json";
    const std::vector<std::pair<std::string, std::string>> commands = {
        {"render --scene " + data + "/scene_gt.sgs --camera " + cam + " --out " + dir("render"),
         dir("render/manifest.json")},
        {"extract-depth --scene " + data + "/scene_gt.sgs --camera " + cam + " --mode first --out " + dir("d.pfm"),
         dir("d.pfm.manifest.json")},
        {"dilemma-report --data " + data + " --out " + dir("dilemma.csv"), dir("dilemma.csv.manifest.json")},
        {"loss-report --scene " + data + "/scene_gt.sgs --view " + cam + " --priors " + data + " --out " +
             dir("loss.csv"),
         dir("loss.csv.manifest.json")},
        {"--set train.iters_stage1=2 --set train.iters_stage2=2 train --scene-init " + data +
             "/scene_init.sgs --views " + data + " --out " + dir("train"),
         dir("train/manifest.json")},
        {"fuse --depths " + data + "/depth --cameras " + data + "/cameras --voxel 0.01 --roi-from " + data +
             " --out " + dir("mesh.ply"),
         dir("mesh.ply.manifest.json")},
        {"eval --pred " + dir("mesh.ply") + " --gt " + data + "/gt_mesh.ply --out " + dir("eval.csv"),
         dir("eval.csv.manifest.json")},
        {"eval-img --pred " + data + "/images/view_000.png --gt " + data + "/delighted/view_000.png --out " +
             dir("img.csv"),
         dir("img.csv.manifest.json")},
        {"synth --scenario sphere --views 2 --set synth.width=24 --set synth.height=24 --out " + dir("sphere"),
         dir("sphere/manifest.json")},
    };
    for (const auto& [args, manifest] : commands) {
        ASSERT_EQ(run(args), 0) << args;
        ASSERT_TRUE(fs::exists(manifest)) << manifest;
        EXPECT_EQ(run("--from-manifest " + manifest), 0) << args;
    }
    EXPECT_EQ(run("--from-manifest " + dir("data/manifest.json")), 0);
}

TEST_F(Cli, ReplayDetectsChangedOutputs) {
    const std::string data = dir("data");
    ASSERT_EQ(run("eval-img --pred " + data + "/images/view_001.png --gt " + data + "/delighted/view_001.png --out " +
                  dir("tamper.csv")),
              0);
    std::ofstream(dir("tamper.csv"), std::ios::app) << "x\n";
    // The replay rewrites the file, so a second replay agrees again.
    EXPECT_EQ(run("--from-manifest " + dir("tamper.csv.manifest.json")), 0);
    auto m = nlohmann::json::parse(std::ifstream(dir("tamper.csv.manifest.json")));
    m["outputs"].begin().value() = std::string(64, '0');
    std::ofstream(dir("tamper.csv.manifest.json")) << m.dump();
    EXPECT_EQ(run("--from-manifest " + dir("tamper.csv.manifest.json")), 4);
}
