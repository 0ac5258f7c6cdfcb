#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "resumevc/clock.hpp"
#include "resumevc/encoding.hpp"
#include "resumevc/http.hpp"
#include "resumevc/verification.hpp"

namespace resumevc::scenario {

inline constexpr int kExitOk = 0;
inline constexpr int kExitAssertion = 1;
inline constexpr int kExitUsage = 2;

/// Virtual start time of every scenario run.
inline constexpr Timestamp kScenarioEpoch = 1'700'000'000;

/// One line of a script: `op positional... key=value...`. Tokens may be
/// double-quoted.
struct Step {
    std::size_t line = 0;
    std::string op;
    std::vector<std::string> args;
    std::map<std::string, std::string> options;

    std::string option(const std::string &key, const std::string &fallback = {}) const;
};

/// Script grammar, one step per line, `#` starts a comment:
///
///   start-service registry|issuer|verifier|broker [name=ID] [validity=DUR]
///   register-issuer ISSUER [types=A,B]        (alias: tir-register)
///   revoke-issuer ISSUER
///   create-wallet WALLET [full-name=TEXT]
///   add-position WALLET kind=K title=T organization=O start=DATE [end=DATE]
///   acquire WALLET from=ISSUER [type=T]
///   request-presentation REQUEST [holder=WALLET] [type=T]
///   answer WALLET REQUEST [mode=M] [nonce-from=REQUEST]
///   verify REQUEST [envelope-from=REQUEST] [as=REPORT]
///   advance-clock DUR                          (e.g. 90s, 15m, 2h, 400d)
///   assert-outcome REPORT accepted|rejected
///   assert-check REPORT CHECK pass|fail|skipped
///
/// Answer modes: honest, tamper-credential, tamper-vp, non-subject-key,
/// stale-nonce, any-credential. Any step may carry expect-error=CODE, which
/// makes the step pass only if it fails with that code.
struct Script {
    std::vector<Step> steps;

    /// Throws Error("parse-error") naming the line.
    static Script parse(std::string_view text);
    /// Throws Error("parse-error") if the file cannot be read or parsed.
    static Script load(const std::filesystem::path &path);
};

/// Parses "90", "90s", "15m", "2h" or "400d" into seconds. Throws
/// Error("parse-error").
std::int64_t parse_duration(std::string_view text);

struct ScenarioOptions {
    /// Wallet stores and service data; a fresh temporary directory if unset.
    std::optional<std::filesystem::path> work_dir;
    /// Called with every transcript line as it is produced.
    http::TranscriptSink transcript;
};

struct ScenarioResult {
    int exit_code = kExitOk;
    /// 1-based index of the step that failed.
    std::optional<std::size_t> failed_step;
    std::string message;
    std::vector<Json> transcript;
    std::map<std::string, verification::VerificationReport> reports;
};

/// Runs every service in-process over loopback HTTP and sockets, driven by a
/// virtual clock that starts at kScenarioEpoch. Step failures and failed
/// assertions give kExitAssertion.
ScenarioResult run_scenario(const Script &script, const ScenarioOptions &options = {});

/// Parse errors give kExitUsage.
ScenarioResult run_scenario_file(const std::filesystem::path &path, const ScenarioOptions &options = {});

} // namespace resumevc::scenario
