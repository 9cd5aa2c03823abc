#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

namespace {

struct Outcome {
  int status = -1;
  std::string out;
};

Outcome vbt_cli(const std::string& args) {
  const std::string cmd = std::string(VBT_CLI_PATH) + " " + args + " 2>/dev/null";
  Outcome o;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return o;
  char buf[4096];
  std::size_t n = 0;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) o.out.append(buf, n);
  const int raw = pclose(pipe);
  o.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return o;
}

std::string without_timing(const std::string& report) { return report.substr(0, report.find("timing\n")); }

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("vbt-cli-test-" + std::to_string(::getpid()) + "-" + name);
}

TEST(Cli, ExploreFig3FindsBug) {
  const auto r = vbt_cli("explore fig3 --c 2 --v 1 --t 2 --seed 7");
  EXPECT_EQ(r.status, 1);
  EXPECT_EQ(r.out.rfind("vbt-report 1\n", 0), 0u);
  EXPECT_NE(r.out.find("seed 7\n"), std::string::npos);
  EXPECT_NE(r.out.find("bug assert:t1==t2"), std::string::npos);
  EXPECT_NE(r.out.find("vbt-schedule 1\n"), std::string::npos);
  EXPECT_NE(r.out.find("timing\nelapsed_ms "), std::string::npos);
}

TEST(Cli, ExploreWithoutBugIsStatusZero) {
  EXPECT_EQ(vbt_cli("explore fig3 --c 1 --v 1 --t 2").status, 0);
  EXPECT_EQ(vbt_cli("explore locked-counter --c 1 --v 1 --t 2").status, 0);
}

TEST(Cli, ClassifyFig8) {
  const auto r = vbt_cli("classify fig8 --limits 3,3,4");
  EXPECT_EQ(r.status, 1);
  EXPECT_NE(r.out.find("(1,1,3)"), std::string::npos);
}

TEST(Cli, ReplayRecordedReport) {
  const auto path = temp_file("fig3.txt");
  const auto rec = vbt_cli("explore fig3 --c 2 --v 1 --t 2 --seed 7 --out " + path.string());
  ASSERT_EQ(rec.status, 1);
  const auto a = vbt_cli("replay " + path.string());
  const auto b = vbt_cli("replay " + path.string());
  EXPECT_EQ(a.status, 1);
  EXPECT_NE(a.out.find("outcome assert:t1==t2"), std::string::npos);
  EXPECT_EQ(without_timing(a.out), without_timing(b.out));
  std::filesystem::remove(path);
}

TEST(Cli, ReplayAgainstOtherProgramIsUsageError) {
  const auto path = temp_file("div.txt");
  ASSERT_EQ(vbt_cli("explore fig3 --c 2 --v 1 --t 2 --out " + path.string()).status, 1);
  EXPECT_EQ(vbt_cli("replay " + path.string() + " --program fig1").status, 2);
  std::filesystem::remove(path);
}

TEST(Cli, SameSeedSameReport) {
  for (const std::string args : {"explore allocation-vector --c 2 --v 1 --t 2 --seed 3",
                                 "random fig2 --strategy pctvb --d 2 --v 1 --trials 5 --max-runs 200 --seed 3",
                                 "permcover --n 20 --t 3 --trials 2 --seed 3", "profile pctf-pair --runs 3"}) {
    const auto a = vbt_cli(args);
    const auto b = vbt_cli(args);
    EXPECT_EQ(a.status, b.status) << args;
    EXPECT_FALSE(a.out.empty()) << args;
    EXPECT_EQ(without_timing(a.out), without_timing(b.out)) << args;
  }
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(vbt_cli("").status, 2);
  EXPECT_EQ(vbt_cli("bogus").status, 2);
  EXPECT_EQ(vbt_cli("explore no-such-program").status, 2);
  EXPECT_EQ(vbt_cli("classify fig1 --limits 1,2").status, 2);
  EXPECT_EQ(vbt_cli("replay /nonexistent/schedule.txt").status, 2);
  EXPECT_EQ(vbt_cli("explore fig1 --t 1").status, 2);
}

TEST(Cli, PlantedAndParameterizedPrograms) {
  EXPECT_EQ(vbt_cli("explore planted:0,0,2 --c 0 --v 0").status, 1);
  EXPECT_EQ(vbt_cli("explore pctf-pair:0.5 --c 1 --v 1").status, 1);
  EXPECT_EQ(vbt_cli("explore planted:9,9,9").status, 2);
}

TEST(Cli, CatalogListsCorpus) {
  const auto r = vbt_cli("catalog");
  EXPECT_EQ(r.status, 0);
  EXPECT_NE(r.out.find("fig1 (0,0,2)"), std::string::npos);
  EXPECT_NE(r.out.find("allocation-vector (2,1,2)"), std::string::npos);
  EXPECT_NE(r.out.find("locked-counter bug-free"), std::string::npos);
}

TEST(Cli, OutFileMatchesStdout) {
  const auto path = temp_file("out.txt");
  const auto direct = vbt_cli("explore fig1 --c 0 --v 0 --seed 2");
  ASSERT_EQ(vbt_cli("explore fig1 --c 0 --v 0 --seed 2 --out " + path.string()).status, 1);
  std::ifstream f(path);
  const std::string written((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  EXPECT_EQ(without_timing(written), without_timing(direct.out));
  std::filesystem::remove(path);
}

}  // namespace
