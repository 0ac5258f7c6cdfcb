// One PASS/FAIL line per primary acceptance criterion. Exit status is
// non-zero if any criterion fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "properties.hpp"
#include "resumevc/error.hpp"
#include "resumevc/scenario.hpp"

using namespace resumevc;
using properties::Outcome;

namespace {

constexpr auto kHappyPathBudget = std::chrono::seconds(10);
constexpr std::size_t kCryptoCases = 1000;
constexpr std::size_t kDidCases = 1000;
constexpr std::size_t kRegistrySequences = 500;
constexpr std::size_t kBrokerMessages = 1000;
constexpr double kCrashRate = 0.10;
constexpr std::size_t kRealtimeMessages = 300;
constexpr std::size_t kIssuanceCases = 500;
constexpr std::uint64_t kSeed = 20240601;

std::filesystem::path bundled(const std::string &name) {
    return std::filesystem::path(RESUMEVC_SCENARIO_DIR) / (name + ".scenario");
}

Outcome all_of(std::initializer_list<std::pair<const char *, std::function<Outcome()>>> parts) {
    Outcome total;
    for (const auto &[label, run] : parts) {
        Outcome o;
        try {
            o = run();
        } catch (const std::exception &e) {
            o.ok = false;
            o.detail = std::string("threw ") + e.what();
        }
        total.cases += o.cases;
        if (!total.detail.empty()) {
            total.detail += "; ";
        }
        total.detail += std::string(label) + " " + std::to_string(o.cases);
        if (!o.detail.empty()) {
            total.detail += " (" + o.detail + ")";
        }
        if (!o.ok) {
            total.ok = false;
            total.detail += " FAILED";
        }
    }
    return total;
}

Outcome happy_path() {
    Outcome o;
    const auto start = std::chrono::steady_clock::now();
    const auto result = scenario::run_scenario_file(bundled("happy_path"));
    const auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start);
    o.cases = result.reports.size();
    char timing[64];
    std::snprintf(timing, sizeof timing, "%.3f s", elapsed.count());
    o.detail = timing;
    if (result.exit_code != scenario::kExitOk) {
        o.ok = false;
        o.detail += ", " + result.message;
        return o;
    }
    if (result.reports.empty()) {
        o.ok = false;
        o.detail += ", no report";
    }
    for (const auto &[label, report] : result.reports) {
        const bool all_passed =
            report.checks.size() == 11 && std::all_of(report.checks.begin(), report.checks.end(), [](const auto &c) {
                return c.status == verification::CheckStatus::passed;
            });
        if (report.outcome != verification::Outcome::accepted || !all_passed) {
            o.ok = false;
            o.detail += ", " + label + " not accepted with 11 passing checks";
        }
    }
    if (elapsed >= kHappyPathBudget) {
        o.ok = false;
        o.detail += ", over the 10 s budget";
    }
    return o;
}

Outcome adversarial_suite() {
    const std::pair<const char *, const char *> cases[] = {
        {"tampered_credential", "issuer-signature"}, {"tampered_presentation", "holder-signature"},
        {"non_subject_key", "holder-binding"},       {"stale_nonce", "nonce-binding"},
        {"replay_attack", "nonce-binding"},          {"expired_credential", "validity-window"},
        {"untrusted_issuer", "issuer-trusted"},      {"revoked_issuer", "issuer-trusted"},
    };
    Outcome o;
    std::size_t rejected = 0;
    std::size_t false_accepts = 0;
    for (const auto &[name, check] : cases) {
        ++o.cases;
        const auto result = scenario::run_scenario_file(bundled(name));
        bool hit = false;
        for (const auto &[label, report] : result.reports) {
            if (report.outcome == verification::Outcome::rejected) {
                hit = hit || report.failed_check() == check;
            }
        }
        // The replay scenario's first submission is legitimately accepted;
        // every other accepted report is a false accept.
        for (const auto &[label, report] : result.reports) {
            if (report.outcome == verification::Outcome::accepted && std::string(name) != "replay_attack") {
                ++false_accepts;
            }
        }
        if (result.exit_code == scenario::kExitOk && hit) {
            ++rejected;
        } else {
            o.ok = false;
            o.detail += std::string(o.detail.empty() ? "" : ", ") + name + " not rejected at " + check;
        }
    }
    if (false_accepts != 0) {
        o.ok = false;
    }
    o.detail = std::to_string(rejected) + "/" + std::to_string(o.cases) + " rejected, " +
               std::to_string(false_accepts) + " false accepts" + (o.detail.empty() ? "" : "; " + o.detail);
    return o;
}

struct Criterion {
    const char *name;
    std::function<Outcome()> run;
};

} // namespace

int main() {
    const std::vector<Criterion> criteria = {
        {"happy-path", happy_path},
        {"adversarial-suite", adversarial_suite},
        {"crypto-properties",
         [] {
             return all_of({
                 {"sign/verify", [] { return properties::sign_verify_roundtrip(kCryptoCases, kSeed); }},
                 {"ecdh", [] { return properties::ecdh_roundtrip(kCryptoCases, kSeed + 1); }},
                 {"token-mutations", properties::token_mutations},
                 {"envelope-mutations", properties::envelope_mutations},
                 {"pinned-vectors", properties::pinned_vectors},
                 {"gmp-reference", [] { return properties::oracle_agreement(200, kSeed + 2); }},
             });
         }},
        {"did-key-bijection", [] { return properties::did_key_bijection(kDidCases, kSeed + 3); }},
        {"registry-event-sourcing",
         [] { return properties::registry_replay(kRegistrySequences, kSeed + 4, 10); }},
        {"messaging-resilience",
         [] {
             return all_of({
                 {"broker", [] { return properties::broker_resilience(kBrokerMessages, kCrashRate, kSeed + 5); }},
                 {"realtime-fifo", [] { return properties::realtime_fifo_reconnect(kRealtimeMessages); }},
             });
         }},
        {"issuance-proof-of-possession",
         [] {
             return all_of({
                 {"adversarial", [] { return properties::issuance_adversarial(kIssuanceCases, kSeed + 6); }},
                 {"honest", [] { return properties::issuance_honest(kIssuanceCases, kSeed + 7); }},
             });
         }},
    };

    int failures = 0;
    for (const auto &c : criteria) {
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception &e) {
            o.ok = false;
            o.detail = std::string("threw ") + e.what();
        }
        if (o.detail.empty()) {
            o.detail = std::to_string(o.cases) + " cases";
        }
        failures += o.ok ? 0 : 1;
        std::printf("%s %s: %s\n", o.ok ? "PASS" : "FAIL", c.name, o.detail.c_str());
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
