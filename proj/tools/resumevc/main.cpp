#include <CLI11.hpp>

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <pthread.h>
#include <sstream>

#include "resumevc/broker.hpp"
#include "resumevc/crypto.hpp"
#include "resumevc/did.hpp"
#include "resumevc/error.hpp"
#include "resumevc/http.hpp"
#include "resumevc/issuance.hpp"
#include "resumevc/random.hpp"
#include "resumevc/realtime.hpp"
#include "resumevc/registry.hpp"
#include "resumevc/scenario.hpp"
#include "resumevc/verification.hpp"
#include "resumevc/wallet.hpp"

namespace fs = std::filesystem;
using namespace resumevc;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;
constexpr const char *kEnvPrefix = "RESUMEVC_";

/// Error codes that mean the command line or configuration is wrong.
bool is_usage_error(const std::string &code) {
    return code == "config-missing" || code == "parse-error" || code == "bad-address" || code == "insecure-seed";
}

std::string env_name(const std::string &suffix) { return kEnvPrefix + suffix; }

/// Blocks SIGINT/SIGTERM in every thread so that serve commands can wait for
/// them synchronously.
sigset_t block_stop_signals() {
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);
    return set;
}

void wait_for_stop_signal(const sigset_t &set) {
    int sig = 0;
    sigwait(&set, &sig);
}

void print_json(const Json &json) { std::cout << json.dump(2) << std::endl; }

Json read_json_file(const fs::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("config-missing", "cannot read " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return Json::parse(buf.str());
    } catch (const Json::exception &e) {
        throw Error("config-missing", path.string() + " is not valid JSON: " + e.what());
    }
}

void write_private_json(const fs::path &path, const Json &json) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw Error("io-failure", "cannot write " + path.string());
        }
    }
    fs::permissions(path, fs::perms::owner_read | fs::perms::owner_write, fs::perm_options::replace);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << json.dump(2) << '\n';
    if (!out.flush()) {
        throw Error("io-failure", "cannot write " + path.string());
    }
}

/// Key file: {"did","keyId","key":{"curve","d","x"}}.
struct KeyFile {
    did::Did did;
    std::string key_id;
    crypto::KeyPair key;
};

KeyFile load_key_file(const fs::path &path) {
    const auto json = read_json_file(path);
    try {
        return KeyFile{did::Did::parse(json.at("did").get<std::string>()), json.value("keyId", std::string("key-1")),
                       crypto::key_pair_from_json(json.at("key"))};
    } catch (const Json::exception &e) {
        throw Error("config-missing", path.string() + ": " + e.what());
    } catch (const Error &e) {
        throw Error("config-missing", path.string() + ": " + e.what());
    }
}

KeyFile create_key_file(const fs::path &path, const std::string &key_id) {
    KeyFile kf{did::new_ebsi_did(), key_id, crypto::generate_key_pair()};
    write_private_json(path, Json{{"did", kf.did.str()}, {"keyId", kf.key_id}, {"key", crypto::key_pair_to_json(kf.key)}});
    return kf;
}

/// Registers the service's DID document unless the registry already has it.
void ensure_registered(http::HttpRegistryClient &registry, const KeyFile &kf) {
    try {
        registry.register_did_document(did::build_did_document(kf.did, {{kf.key_id, kf.key.public_key()}}, system_now()));
    } catch (const Error &e) {
        if (e.code() != "already-registered") {
            throw;
        }
    }
}

struct Common {
    std::uint16_t registry_port = 8081;
    std::uint16_t issuer_port = 8082;
    std::uint16_t verifier_port = 8083;
    std::uint16_t broker_port = 7070;
    std::uint16_t wallet_port = 8084;
    std::string host = "127.0.0.1";
    std::string data_dir;
    std::string registry_url;
    std::string broker_addr;
};

void add_port(CLI::App *cmd, std::uint16_t &port, std::string &host) {
    cmd->add_option("--port", port, "Listen port")->envname(env_name("PORT"))->capture_default_str();
    cmd->add_option("--host", host, "Listen address")->envname(env_name("HOST"))->capture_default_str();
}

/// Accepts a path or the name of a bundled scenario ("happy_path").
fs::path resolve_scenario(const std::string &name) {
    if (fs::exists(name)) {
        return name;
    }
    std::stringstream dirs(RESUMEVC_SCENARIO_DIRS);
    for (std::string dir; std::getline(dirs, dir, ':');) {
        for (const auto &candidate : {fs::path(dir) / name, fs::path(dir) / (name + ".scenario")}) {
            if (fs::exists(candidate)) {
                return candidate;
            }
        }
    }
    return name;
}

int serve_until_signal(const sigset_t &signals, http::HttpService &service, const std::string &what) {
    std::cerr << what << " listening on " << service.url() << std::endl;
    wait_for_stop_signal(signals);
    service.stop();
    return 0;
}

} // namespace

int main(int argc, char **argv) {
    const auto signals = block_stop_signals();

    CLI::App app{"Decentralized resume credential tools"};
    app.require_subcommand(1);
    std::optional<std::uint64_t> insecure_seed;
    app.add_option("--insecure-seed", insecure_seed,
                   "Deterministic randomness for reproducible test runs; needs RESUMEVC_TEST_MODE=1")
        ->envname(env_name("INSECURE_SEED"));

    Common c;

    // registry -----------------------------------------------------------
    auto *registry_cmd = app.add_subcommand("registry", "DID registry and Trusted Issuer Registry");
    registry_cmd->require_subcommand(1);
    auto *registry_serve = registry_cmd->add_subcommand("serve", "Serve the registry over HTTP");
    add_port(registry_serve, c.registry_port, c.host);
    registry_serve->add_option("--data-dir", c.data_dir, "Event log and snapshot directory")
        ->envname(env_name("DATA_DIR"));

    // issuer -------------------------------------------------------------
    auto *issuer_cmd = app.add_subcommand("issuer", "Credential issuer");
    issuer_cmd->require_subcommand(1);
    std::string key_file;
    std::string key_id = "key-1";
    auto *issuer_keygen = issuer_cmd->add_subcommand("keygen", "Create an issuer DID and signing key file");
    issuer_keygen->add_option("--key-file", key_file, "Output path")->required()->envname(env_name("KEY_FILE"));
    issuer_keygen->add_option("--key-id", key_id, "Verification method fragment")->capture_default_str();
    auto *issuer_serve = issuer_cmd->add_subcommand("serve", "Serve the issuance endpoints over HTTP");
    add_port(issuer_serve, c.issuer_port, c.host);
    issuer_serve->add_option("--key-file", key_file, "Issuer key file (see issuer keygen)")
        ->envname(env_name("KEY_FILE"));
    issuer_serve->add_option("--registry-url", c.registry_url, "Register the issuer DID document here on start")
        ->envname(env_name("REGISTRY_URL"));
    std::string validity = "365d";
    issuer_serve->add_option("--validity", validity, "Credential validity (e.g. 30d)")->capture_default_str();

    // verifier -----------------------------------------------------------
    auto *verifier_cmd = app.add_subcommand("verifier", "Presentation verifier");
    verifier_cmd->require_subcommand(1);
    auto *verifier_serve = verifier_cmd->add_subcommand("serve", "Serve the verification endpoints over HTTP");
    add_port(verifier_serve, c.verifier_port, c.host);
    verifier_serve->add_option("--data-dir", c.data_dir, "Key file and journal directory")
        ->envname(env_name("DATA_DIR"));
    verifier_serve->add_option("--registry-url", c.registry_url, "Registry used for issuer resolution and TIR")
        ->envname(env_name("REGISTRY_URL"));
    verifier_serve->add_option("--broker-addr", c.broker_addr, "host:port of the broker for request notifications")
        ->envname(env_name("BROKER_ADDR"));

    // broker -------------------------------------------------------------
    auto *broker_cmd = app.add_subcommand("broker", "Message broker and realtime channel");
    broker_cmd->require_subcommand(1);
    auto *broker_serve = broker_cmd->add_subcommand("serve", "Serve the broker socket and the realtime channel");
    add_port(broker_serve, c.broker_port, c.host);
    std::optional<std::uint16_t> realtime_port;
    broker_serve->add_option("--realtime-port", realtime_port, "Realtime channel port (default: port + 1)")
        ->envname(env_name("REALTIME_PORT"));
    broker_serve->add_option("--data-dir", c.data_dir, "Journal directory")->envname(env_name("DATA_DIR"));

    // wallet -------------------------------------------------------------
    auto *wallet_cmd = app.add_subcommand("wallet", "Holder wallet");
    wallet_cmd->require_subcommand(1);
    std::string wallet_path;
    std::string full_name = "Holder";
    std::string resume_id = "resume-1";
    std::string credential_type(credential::kResumeCredentialType);
    std::string issuer_url, verifier_url, request_id, realtime_addr;
    credential::Position position;
    std::string kind = "work", end;
    std::string organization_did;

    auto wallet_option = [&](CLI::App *cmd) {
        cmd->add_option("--wallet", wallet_path, "Wallet store file")->required()->envname(env_name("WALLET"));
    };
    auto *wallet_init = wallet_cmd->add_subcommand("init", "Create or reload a wallet and print its DID");
    wallet_option(wallet_init);
    wallet_init->add_option("--full-name", full_name, "Name on the first resume")->capture_default_str();

    auto *wallet_add = wallet_cmd->add_subcommand("add-position", "Add a position to a resume");
    wallet_option(wallet_add);
    wallet_add->add_option("--resume", resume_id, "Resume id")->capture_default_str();
    wallet_add->add_option("--kind", kind, "education, work or certificate")->capture_default_str();
    wallet_add->add_option("--title", position.title)->required();
    wallet_add->add_option("--organization", position.organization)->required();
    wallet_add->add_option("--organization-did", organization_did);
    wallet_add->add_option("--start", position.start, "YYYY-MM-DD")->required();
    wallet_add->add_option("--end", end, "YYYY-MM-DD");
    wallet_add->add_option("--description", position.description);

    auto *wallet_acquire = wallet_cmd->add_subcommand("acquire", "Obtain a credential for a resume");
    wallet_option(wallet_acquire);
    wallet_acquire->add_option("--issuer-url", issuer_url)->required()->envname(env_name("ISSUER_URL"));
    wallet_acquire->add_option("--registry-url", c.registry_url)->required()->envname(env_name("REGISTRY_URL"));
    wallet_acquire->add_option("--resume", resume_id)->capture_default_str();
    wallet_acquire->add_option("--type", credential_type)->capture_default_str();

    auto *wallet_respond = wallet_cmd->add_subcommand("respond", "Answer a presentation request");
    wallet_option(wallet_respond);
    wallet_respond->add_option("--verifier-url", verifier_url)->required()->envname(env_name("VERIFIER_URL"));
    wallet_respond->add_option("--request-id", request_id)->required();

    auto *wallet_list = wallet_cmd->add_subcommand("list", "Print resumes, credentials and pending requests");
    wallet_option(wallet_list);

    auto *wallet_serve = wallet_cmd->add_subcommand("serve", "Serve the holder endpoints used by the UI");
    wallet_option(wallet_serve);
    add_port(wallet_serve, c.wallet_port, c.host);
    wallet_serve->add_option("--issuer-url", issuer_url)->envname(env_name("ISSUER_URL"));
    wallet_serve->add_option("--registry-url", c.registry_url)->envname(env_name("REGISTRY_URL"));
    wallet_serve->add_option("--verifier-url", verifier_url)->envname(env_name("VERIFIER_URL"));
    wallet_serve->add_option("--realtime-addr", realtime_addr, "host:port of the realtime channel")
        ->envname(env_name("REALTIME_ADDR"));

    // scenario -----------------------------------------------------------
    auto *scenario_cmd = app.add_subcommand("scenario", "Scripted end-to-end runs");
    scenario_cmd->require_subcommand(1);
    auto *scenario_run = scenario_cmd->add_subcommand("run", "Run a scenario script");
    std::string script_path, transcript_path, work_dir;
    scenario_run->add_option("file", script_path, "Scenario file")->required();
    scenario_run->add_option("--transcript", transcript_path, "Write the JSON-lines transcript here");
    scenario_run->add_option("--work-dir", work_dir, "Keep wallet stores and journals here")
        ->envname(env_name("DATA_DIR"));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitUsage;
    }

    try {
        if (insecure_seed) {
            const char *mode = std::getenv("RESUMEVC_TEST_MODE");
            if (!mode || std::string(mode) != "1") {
                throw Error("insecure-seed", "--insecure-seed is refused unless RESUMEVC_TEST_MODE=1");
            }
            rng::use_insecure_seed(*insecure_seed);
            std::cerr << "warning: deterministic randomness enabled; keys and nonces are predictable" << std::endl;
        }

        if (*registry_serve) {
            std::unique_ptr<registry::TrustRegistry> reg =
                c.data_dir.empty() ? std::make_unique<registry::TrustRegistry>()
                                   : std::make_unique<registry::TrustRegistry>(system_clock(), c.data_dir);
            auto service = http::registry_service(*reg);
            service->start(c.registry_port, c.host);
            return serve_until_signal(signals, *service, "registry");
        }

        if (*issuer_keygen) {
            const auto kf = create_key_file(key_file, key_id);
            print_json(Json{{"did", kf.did.str()}, {"keyId", kf.key_id}, {"keyFile", key_file}});
            return 0;
        }

        if (*issuer_serve) {
            if (key_file.empty()) {
                throw Error("config-missing", "issuer serve needs --key-file (create one with issuer keygen)");
            }
            const auto kf = load_key_file(key_file);
            issuance::IssuerConfig config{.issuer_did = kf.did, .signing_key = kf.key, .key_id = kf.key_id};
            config.credential_validity_seconds = scenario::parse_duration(validity);
            if (!c.registry_url.empty()) {
                http::HttpRegistryClient registry(c.registry_url);
                ensure_registered(registry, kf);
            }
            issuance::IssuerService issuer(config);
            auto service = http::issuer_service(issuer);
            service->start(c.issuer_port, c.host);
            std::cerr << "issuer " << kf.did.str() << std::endl;
            return serve_until_signal(signals, *service, "issuer");
        }

        if (*verifier_serve) {
            if (c.registry_url.empty()) {
                throw Error("config-missing", "verifier serve needs --registry-url");
            }
            const fs::path dir = c.data_dir.empty() ? fs::path(".") : fs::path(c.data_dir);
            const auto key_path = dir / "verifier-key.json";
            const auto kf = fs::exists(key_path)
                                ? load_key_file(key_path)
                                : create_key_file(key_path, std::string(verification::kEncryptionKeyId));
            http::HttpRegistryClient registry(c.registry_url);
            ensure_registered(registry, kf);

            std::unique_ptr<messaging::BrokerClient> broker;
            if (!c.broker_addr.empty()) {
                const auto [host, port] = net::parse_address(c.broker_addr);
                broker = std::make_unique<messaging::BrokerClient>(host, port);
            }
            verification::VerifierService verifier(
                verification::VerifierConfig{.verifier_did = kf.did, .encryption_key = kf.key}, registry,
                system_clock(), c.data_dir.empty() ? std::nullopt : std::optional<fs::path>(dir));
            verifier.set_notifier([&broker](const verification::PresentationRequest &request,
                                            const std::optional<did::Did> &holder) {
                if (broker && holder) {
                    try {
                        broker->publish(messaging::RequestBridge::kTopic,
                                        messaging::request_notification(*holder, request.to_frame()));
                    } catch (const Error &e) {
                        std::cerr << "warning: request notification not published: " << e.what() << std::endl;
                    }
                }
            });
            auto service = http::verifier_service(verifier);
            service->start(c.verifier_port, c.host);
            std::cerr << "verifier " << kf.did.str() << std::endl;
            return serve_until_signal(signals, *service, "verifier");
        }

        if (*broker_serve) {
            messaging::BrokerOptions options;
            if (!c.data_dir.empty()) {
                fs::create_directories(c.data_dir);
                options.log_path = fs::path(c.data_dir) / "broker.log";
            }
            messaging::Broker broker(options);
            messaging::BrokerServer server(broker, c.broker_port);
            messaging::RealtimeHub hub;
            messaging::RealtimeServer realtime(hub, realtime_port.value_or(static_cast<std::uint16_t>(c.broker_port + 1)));
            messaging::RequestBridge bridge(broker, hub);
            bridge.start();
            std::cerr << "broker listening on " << c.host << ":" << server.port() << ", realtime on "
                      << realtime.port() << std::endl;
            wait_for_stop_signal(signals);
            bridge.stop();
            realtime.stop();
            server.stop();
            return 0;
        }

        if (*wallet_init) {
            auto w = wallet::Wallet::init(wallet_path);
            if (w.resumes().empty()) {
                w.create_resume(full_name);
            }
            print_json(Json{{"holderDid", w.holder_did().str()}, {"wallet", wallet_path}});
            return 0;
        }

        if (*wallet_add) {
            auto w = wallet::Wallet::init(wallet_path);
            position.kind = credential::position_kind_from_name(kind);
            if (!end.empty()) {
                position.end = end;
            }
            if (!organization_did.empty()) {
                position.organization_did = did::Did::parse(organization_did);
            }
            print_json(w.add_position(resume_id, position).to_json());
            return 0;
        }

        if (*wallet_acquire) {
            auto w = wallet::Wallet::init(wallet_path);
            http::HttpIssuerClient issuer(issuer_url);
            http::HttpRegistryClient registry(c.registry_url);
            print_json(http::credential_summary(w.acquire_credential(issuer, registry, resume_id, credential_type)));
            return 0;
        }

        if (*wallet_respond) {
            auto w = wallet::Wallet::init(wallet_path);
            http::HttpVerifierClient verifier(verifier_url);
            const auto request = verifier.request(request_id);
            w.receive_request(request);
            const auto envelope = w.handle_presentation_request(request);
            print_json(verifier.verify(request.request_id, envelope).to_json());
            return 0;
        }

        if (*wallet_list) {
            auto w = wallet::Wallet::init(wallet_path);
            Json resumes = Json::array();
            for (const auto &r : w.resumes()) {
                resumes.push_back({{"id", r.id}, {"resume", r.resume.to_json()}});
            }
            Json creds = Json::array();
            for (const auto &vc : w.credentials()) {
                Json summary = http::credential_summary(vc);
                summary.erase("token");
                creds.push_back(summary);
            }
            Json pending = Json::array();
            for (const auto &p : w.pending_requests()) {
                pending.push_back(p.to_frame());
            }
            print_json(Json{{"holderDid", w.holder_did().str()},
                            {"resumes", resumes},
                            {"credentials", creds},
                            {"pendingRequests", pending}});
            return 0;
        }

        if (*wallet_serve) {
            auto w = wallet::Wallet::init(wallet_path);
            if (w.resumes().empty()) {
                w.create_resume(full_name);
            }
            std::unique_ptr<http::HttpIssuerClient> issuer;
            std::unique_ptr<http::HttpRegistryClient> registry;
            std::unique_ptr<http::HttpVerifierClient> verifier;
            http::WalletServiceOptions options;
            if (!issuer_url.empty()) {
                issuer = std::make_unique<http::HttpIssuerClient>(issuer_url);
                options.issuer = issuer.get();
            }
            if (!c.registry_url.empty()) {
                registry = std::make_unique<http::HttpRegistryClient>(c.registry_url);
                options.registry = registry.get();
            }
            if (!verifier_url.empty()) {
                verifier = std::make_unique<http::HttpVerifierClient>(verifier_url);
                options.verifier = verifier.get();
            }
            std::unique_ptr<messaging::RealtimeClient> channel;
            if (!realtime_addr.empty()) {
                const auto [host, port] = net::parse_address(realtime_addr);
                channel = std::make_unique<messaging::RealtimeClient>(
                    host, port, w.holder_did(), [&w](const messaging::Frame &frame) {
                        if (frame.type == messaging::FrameType::request) {
                            w.receive_request(
                                verification::PresentationRequest::from_frame(Json::parse(to_string(frame.payload))));
                        }
                    });
            }
            auto service = http::wallet_service(w, options);
            service->start(c.wallet_port, c.host);
            std::cerr << "wallet " << w.holder_did().str() << std::endl;
            return serve_until_signal(signals, *service, "wallet");
        }

        if (*scenario_run) {
            scenario::ScenarioOptions options;
            if (!work_dir.empty()) {
                options.work_dir = fs::path(work_dir);
            }
            std::ofstream transcript;
            if (!transcript_path.empty()) {
                transcript.open(transcript_path, std::ios::trunc);
                if (!transcript) {
                    throw Error("io-failure", "cannot write " + transcript_path);
                }
                options.transcript = [&transcript](const Json &entry) { transcript << entry.dump() << '\n'; };
            }
            const auto result = scenario::run_scenario_file(resolve_scenario(script_path), options);
            if (result.exit_code == scenario::kExitOk) {
                std::cout << "scenario " << script_path << ": ok (" << result.reports.size() << " report(s))"
                          << std::endl;
                for (const auto &[label, report] : result.reports) {
                    const auto failed = report.failed_check();
                    std::cout << "  " << label << ": "
                              << (report.outcome == verification::Outcome::accepted ? "accepted" : "rejected")
                              << (failed ? " at " + *failed : "") << std::endl;
                }
            } else {
                std::cerr << "scenario " << script_path << ": " << result.message << std::endl;
            }
            return result.exit_code;
        }
    } catch (const Error &e) {
        std::cerr << "error: " << e.what() << std::endl;
        return is_usage_error(e.code()) ? kExitUsage : kExitFailure;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << std::endl;
        return kExitFailure;
    }
    return 0;
}
