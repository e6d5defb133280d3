#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cstdlib>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

const std::string kCli = KSENGINE_CLI_PATH;
const std::string kData = KSENGINE_DATA_DIR;

struct Result {
  int code;
  std::string out;
};

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("ksengine_cli_" + std::to_string(::getpid()) + "_" +
                                        ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string state() const { return (dir_ / "state.ksif").string(); }

  Result run(const std::string& args, bool with_state = true) const {
    std::string cmd = kCli + (with_state ? " --state '" + state() + "'" : "") + " " + args + " 2>/dev/null";
    FILE* pipe = ::popen(cmd.c_str(), "r");
    std::string out;
    std::array<char, 4096> buf{};
    while (std::size_t n = std::fread(buf.data(), 1, buf.size(), pipe)) out.append(buf.data(), n);
    const int status = ::pclose(pipe);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
  }

  std::string slurp(const fs::path& p) const {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  std::string data(const std::string& name) const { return "'" + kData + "/" + name + "'"; }

  std::string increments() const {
    return data("increments/1-citations.ksif") + " " + data("increments/2-equalities.ksif") + " " +
           data("increments/3-memex.ksif");
  }

  fs::path dir_;
};

TEST_F(Cli, CapacityAtE) {
  auto r = run("capacity 2.718281828 3", false);
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "true\n");
  EXPECT_EQ(run("capacity 3 2", false).out, "false\n");
  EXPECT_EQ(run("capacity 0 2", false).code, 2);
  EXPECT_EQ(run("capacity two 2", false).code, 1);
}

TEST_F(Cli, QueryOnEmptyState) {
  auto r = run("query \"(A, ?, C)\"");
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "");
}

TEST_F(Cli, UsageErrors) {
  EXPECT_EQ(run("").code, 1);
  EXPECT_EQ(run("no-such-command").code, 1);
  EXPECT_EQ(run("export", false).code, 1);
  EXPECT_EQ(run("verify").code, 1);
  EXPECT_EQ(run("locate d1:x").code, 1);
}

TEST_F(Cli, StateFromEnvironment) {
  const std::string cmd = "KSENGINE_STATE='" + state() + "' " + kCli + " import " + data("tables.ksif");
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  EXPECT_EQ(slurp(state()), slurp(kData + "/tables.ksif"));
  EXPECT_FALSE(fs::exists(state() + ".tmp"));
}

TEST_F(Cli, DataErrors) {
  EXPECT_EQ(run("import /nonexistent/file.ksif").code, 2);
  std::ofstream(dir_ / "bad.ksif") << "KSIF 9\n";
  EXPECT_EQ(run("import '" + (dir_ / "bad.ksif").string() + "'").code, 2);
  EXPECT_EQ(run("query \"(a, ?)\"").code, 2);
  EXPECT_EQ(run("explain e0").code, 2);
  EXPECT_FALSE(fs::exists(state()));
}

TEST_F(Cli, ImportExportRoundTrip) {
  ASSERT_EQ(run("import " + data("tables.ksif")).code, 0);
  const auto exported = run("export");
  EXPECT_EQ(exported.code, 0);
  EXPECT_EQ(exported.out, slurp(kData + "/tables.ksif"));
  EXPECT_EQ(exported.out, slurp(state()));
  EXPECT_EQ(exported.out.find("LINKTYPE\tL_1"), std::string("KSIF 1\n").size());
  EXPECT_LT(exported.out.rfind("LINKTYPE"), exported.out.find("NODE\tN_1"));
}

TEST_F(Cli, DeriveIsIdempotent) {
  ASSERT_EQ(run("import " + data("tables.ksif")).code, 0);
  for (const auto& f : {"1-citations", "2-equalities", "3-memex"}) {
    ASSERT_EQ(run("import " + data(std::string("increments/") + f + ".ksif")).code, 0);
  }
  const auto first = run("derive");
  EXPECT_EQ(first.code, 0);
  EXPECT_NE(first.out, "0\n");
  const auto bytes = slurp(state());
  const auto second = run("derive");
  EXPECT_EQ(second.out, "0\n");
  EXPECT_EQ(slurp(state()), bytes);
  EXPECT_EQ(run("query \"(N_1, SameTopic, ?)\"").out, "N_1\nN_3\nN_7\n");
  EXPECT_EQ(run("query \"(N_1, L_2, ?)\"").out, "N_2\nN_3\n");
}

TEST_F(Cli, ExplainDerivedLink) {
  ASSERT_EQ(run("import " + data("tables.ksif")).code, 0);
  ASSERT_EQ(run("import " + data("increments/2-equalities.ksif")).code, 0);
  ASSERT_EQ(run("derive").out, "3\n");
  const auto exported = run("export").out;
  const auto at = exported.find("\tN_1\tL_2\tN_3\t");
  ASSERT_NE(at, std::string::npos);
  const auto start = exported.rfind("LINK\t", at) + 5;
  const auto id = exported.substr(start, at - start);
  const auto r = run("explain " + id);
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("N_1 L_2 N_3\tby R_2"), std::string::npos);
  EXPECT_NE(r.out.find("  e"), std::string::npos);
}

TEST_F(Cli, VerifyExitCodes) {
  ASSERT_EQ(run("import " + data("tables.ksif")).code, 0);
  ASSERT_EQ(run("import " + data("increments/2-equalities.ksif")).code, 0);
  const auto r = run("verify " + data("candidates.ksif"));
  EXPECT_EQ(r.code, 3);
  EXPECT_EQ(r.out, "c1\taccepted\tliteral\tderivable\nc2\trejected\tliteral\tnot derivable\n");
}

TEST_F(Cli, SpacePlaceLocateSplitJoin) {
  std::ofstream(dir_ / "space.ksif") << "KSIF 1\nDIM\teconomy\teconomy.root\nDIM\tenvironment\tenvironment.root\n"
                                        "CAT\teconomy.root\teconomy\t\teconomy\n"
                                        "CAT\tmarket\teconomy\teconomy.root\tmarket\n"
                                        "CAT\tproduction\teconomy\teconomy.root\tproduction\n"
                                        "CAT\tenvironment.root\tenvironment\t\tenvironment\n"
                                        "CAT\tair\tenvironment\tenvironment.root\tair\n"
                                        "CAT\twater\tenvironment\tenvironment.root\twater\n";
  ASSERT_EQ(run("import '" + (dir_ / "space.ksif").string() + "'").code, 0);
  EXPECT_EQ(run("place r1 economy=market environment=air").code, 0);
  EXPECT_EQ(run("place r2 economy=production environment=air").code, 0);
  EXPECT_EQ(run("place r2 economy=market environment=water").code, 2);
  EXPECT_EQ(run("place r3 economy=market").code, 2);
  EXPECT_EQ(run("place r3 economy=market environment=water").code, 0);
  EXPECT_EQ(run("locate environment=air").out, "r1\nr2\n");
  EXPECT_EQ(run("locate economy=economy.root --mode subtree").out, "r1\nr2\nr3\n");
  EXPECT_EQ(run("locate economy=economy.root").out, "");
  EXPECT_EQ(run("nf-check").out, "ok\n");
  const auto before = slurp(state());
  const auto a = (dir_ / "a.ksif").string(), b = (dir_ / "b.ksif").string();
  ASSERT_EQ(run("split economy --first '" + a + "' --second '" + b + "'").code, 0);
  EXPECT_EQ(run("split economy,environment --first '" + a + "' --second '" + b + "'").code, 2);
  fs::copy_file(a, state(), fs::copy_options::overwrite_existing);
  ASSERT_EQ(run("join '" + b + "'").code, 0);
  EXPECT_EQ(slurp(state()), before);
  ASSERT_EQ(run("merge-dims economy environment").code, 0);
  EXPECT_EQ(run("locate economy.environment=market.air").out, "r1\n");
  EXPECT_EQ(run("nf-check").out, "ok\n");
}

TEST_F(Cli, DiagnosisPipeline) {
  ASSERT_EQ(run("import " + data("diagnosis.ksif")).code, 0);
  EXPECT_EQ(run("find-problem --rules " + data("abnormal-pattern.ksif")).out,
            "anom.abnormal\tanomaly\t2 patients show the diabetes pattern\n");
  EXPECT_EQ(run("co-occur " + data("events.tsv") + " --min-support 3").out,
            "co.frequentUrination.thirst\trelationship\tfrequentUrination co-occurs with thirst in 3 records\n");
  EXPECT_EQ(run("solve anom.abnormal --solution-types Treats").out, "dietPlan\ninsulinTherapy\n");
  EXPECT_EQ(run("recommend --solution-types Treats").out,
            "anom.abnormal\t4\tdietPlan,insulinTherapy\nco.frequentUrination.thirst\t3\tunsolved\n");
  EXPECT_EQ(run("solve nothing --solution-types Treats").code, 2);
}

TEST_F(Cli, Analogy) {
  const auto src = data("analogy-source.ksif"), tgt = data("analogy-target.ksif");
  const auto r = run("analogy --source " + src + " --target " + tgt + " --solution-types mutualBenefit");
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out,
            "ExactMapping\nmap\tnutrientFlow\twasteExchange\nmap\torganismX\tplantP\nmap\torganismY\tplantQ\n"
            "solution\tplantP mutualBenefit plantQ\n");
  const auto none = run("analogy --source " + src + " --target " + data("diagnosis.ksif"));
  EXPECT_EQ(none.code, 3);
  EXPECT_EQ(none.out, "NoMapping\n");
  EXPECT_EQ(run("analogy --source " + src + " --target " + tgt + " --max-nodes 2").code, 2);
}

TEST_F(Cli, ReadText) {
  ASSERT_EQ(run("import " + data("reading.ksif")).code, 0);
  const auto r = run("read 'Bush publish paper' --radius 2");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("relation\t1\tbush\tL_3\tpaper\n"), std::string::npos);
  EXPECT_NE(run("export").out.find("\tbush\tL_3\tpaper\t"), std::string::npos);
  EXPECT_EQ(run("read 'Bush paper' --radius 0").code, 2);
  EXPECT_EQ(run("read 'Bush paper' --goals nobody").code, 2);
}

TEST_F(Cli, AbilityReport) {
  ASSERT_EQ(run("import " + data("tables.ksif")).code, 0);
  const auto r = run("ability --questions " + data("questions.txt") + " --increments " + increments());
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "questions\t9\nstep\tanswered\tproblems\tlinks\nbase\t0\t0\t0\n1\t4\t0\t6\n2\t7\t0\t13\n3\t9\t0\t20\n");
  EXPECT_EQ(run("ability --questions " + data("questions.txt") + " --increments " + increments()).out, r.out);
}

}  // namespace
