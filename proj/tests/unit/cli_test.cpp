#include <cstdlib>
#include <filesystem>
#include <string>

#include <sys/wait.h>

#include <gtest/gtest.h>

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string command = std::string(READMIT_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(command.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path scratch() {
  const auto dir = fs::temp_directory_path() / "readmit_cli_test";
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST(Cli, SynthSucceeds) {
  const auto dir = scratch();
  EXPECT_EQ(run("synth --out " + dir.string() + " --set input.synthetic.n=300"), 0);
  EXPECT_TRUE(fs::exists(dir / "synth" / "cohort.csv"));
  fs::remove_all(dir);
}

TEST(Cli, ConfigErrorsExitTwo) {
  const auto dir = scratch();
  EXPECT_EQ(run("synth --out " + dir.string() + " --set model.mlp.l2=[0.03,0.03,0.04]"), 2);
  EXPECT_EQ(run("synth --out " + dir.string() + " --set nonsense.key=1"), 2);
  EXPECT_EQ(run("synth --config " + (dir / "absent.json").string()), 2);
  fs::remove_all(dir);
}

TEST(Cli, MissingArtifactExitsThree) {
  const auto dir = scratch();
  EXPECT_EQ(run("evaluate --out " + dir.string()), 3);
  fs::remove_all(dir);
}

TEST(Cli, UnknownSubcommandIsUsageError) {
  EXPECT_NE(run("frobnicate"), 0);
}
