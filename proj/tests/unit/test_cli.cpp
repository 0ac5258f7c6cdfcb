#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <sys/wait.h>

#include "fixtures.hpp"

namespace {

struct Run {
    int exit_code = -1;
    std::string output;
};

Run run_cli(const std::string &args, const std::string &env = "") {
    const auto command = env + " " + std::string(RESUMEVC_CLI) + " " + args + " 2>&1";
    Run r;
    FILE *pipe = ::popen(command.c_str(), "r");
    if (!pipe) {
        return r;
    }
    std::array<char, 4096> buf{};
    while (std::fgets(buf.data(), static_cast<int>(buf.size()), pipe)) {
        r.output += buf.data();
    }
    const int status = ::pclose(pipe);
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

} // namespace

TEST(Cli, WalletInitIsStable) {
    fixtures::TempDir dir;
    const auto wallet = (dir / "w.json").string();
    const auto first = run_cli("wallet init --wallet " + wallet);
    ASSERT_EQ(first.exit_code, 0) << first.output;
    const auto second = run_cli("wallet init --wallet " + wallet);
    ASSERT_EQ(second.exit_code, 0) << second.output;
    EXPECT_NE(first.output.find("did:key:z"), std::string::npos);
    EXPECT_EQ(first.output, second.output);
}

TEST(Cli, IssuerServeWithoutKeyIsConfigError) {
    const auto r = run_cli("issuer serve --port 0");
    EXPECT_EQ(r.exit_code, 2);
    EXPECT_NE(r.output.find("config-missing"), std::string::npos) << r.output;
}

TEST(Cli, VerifierServeWithoutRegistryIsConfigError) {
    fixtures::TempDir dir;
    const auto r = run_cli("verifier serve --port 0 --data-dir " + dir.path().string());
    EXPECT_EQ(r.exit_code, 2);
    EXPECT_NE(r.output.find("config-missing"), std::string::npos) << r.output;
}

TEST(Cli, ScenarioMissingFileIsParseError) {
    const auto r = run_cli("scenario run /nonexistent/missing.scenario");
    EXPECT_EQ(r.exit_code, 2);
    EXPECT_NE(r.output.find("parse-error"), std::string::npos) << r.output;
}

TEST(Cli, ScenarioRunsBundledHappyPath) {
    const auto r = run_cli("scenario run happy_path");
    EXPECT_EQ(r.exit_code, 0) << r.output;
}

TEST(Cli, InsecureSeedRequiresTestMode) {
    const auto refused = run_cli("--insecure-seed 7 scenario run happy_path", "RESUMEVC_TEST_MODE=");
    EXPECT_EQ(refused.exit_code, 2);
    EXPECT_NE(refused.output.find("insecure-seed"), std::string::npos) << refused.output;
    const auto allowed = run_cli("--insecure-seed 7 scenario run happy_path", "RESUMEVC_TEST_MODE=1");
    EXPECT_EQ(allowed.exit_code, 0) << allowed.output;
}

TEST(Cli, UnknownSubcommandIsUsageError) {
    EXPECT_EQ(run_cli("teleport").exit_code, 2);
}
