#include "resumevc/scenario.hpp"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "resumevc/broker.hpp"
#include "resumevc/crypto.hpp"
#include "resumevc/error.hpp"
#include "resumevc/issuance.hpp"
#include "resumevc/realtime.hpp"
#include "resumevc/registry.hpp"
#include "resumevc/wallet.hpp"

namespace resumevc::scenario {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void parse_error(std::size_t line, const std::string &message) {
    throw Error("parse-error", "line " + std::to_string(line) + ": " + message);
}

std::vector<std::string> tokenize(std::string_view text, std::size_t line) {
    std::vector<std::string> tokens;
    std::string current;
    bool in_token = false;
    bool quoted = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '\\' && i + 1 < text.size()) {
                current += text[++i];
            } else if (c == '"') {
                quoted = false;
            } else {
                current += c;
            }
            continue;
        }
        if (c == '#' && !in_token) {
            break;
        }
        if (c == ' ' || c == '\t' || c == '\r') {
            if (in_token) {
                tokens.push_back(std::move(current));
                current.clear();
                in_token = false;
            }
            continue;
        }
        in_token = true;
        if (c == '"') {
            quoted = true;
        } else {
            current += c;
        }
    }
    if (quoted) {
        parse_error(line, "unterminated quote");
    }
    if (in_token) {
        tokens.push_back(std::move(current));
    }
    return tokens;
}

const std::set<std::string> kAnswerModes = {"honest",     "tamper-credential", "tamper-vp",
                                            "non-subject-key", "stale-nonce", "any-credential"};

/// Checks arity, options and that every step names only entities created by
/// an earlier step.
void validate(const std::vector<Step> &steps) {
    std::set<std::string> services, issuers, wallets, requests, envelopes, reports;
    auto need = [](const Step &s, std::size_t count) {
        if (s.args.size() != count) {
            parse_error(s.line, s.op + " takes " + std::to_string(count) + " argument(s)");
        }
    };
    auto known = [](const Step &s, const std::set<std::string> &set, const std::string &name, const char *what) {
        if (!set.contains(name)) {
            parse_error(s.line, std::string("unknown ") + what + " '" + name + "'");
        }
    };
    auto require_option = [](const Step &s, const char *key) {
        if (!s.options.contains(key)) {
            parse_error(s.line, s.op + " requires " + key + "=");
        }
    };
    auto duration = [](const Step &s, const std::string &text) {
        try {
            parse_duration(text);
        } catch (const Error &e) {
            parse_error(s.line, e.message());
        }
    };
    for (const auto &s : steps) {
        if (s.op == "start-service") {
            need(s, 1);
            const auto &kind = s.args[0];
            if (kind != "registry" && kind != "issuer" && kind != "verifier" && kind != "broker") {
                parse_error(s.line, "unknown service '" + kind + "'");
            }
            if ((kind == "issuer" || kind == "verifier") && !services.contains("registry")) {
                parse_error(s.line, kind + " needs a registry started first");
            }
            if (kind == "issuer") {
                const auto name = s.option("name", "issuer");
                if (!issuers.insert(name).second) {
                    parse_error(s.line, "issuer '" + name + "' already started");
                }
                if (s.options.contains("validity")) {
                    duration(s, s.options.at("validity"));
                }
            } else if (!services.insert(kind).second) {
                parse_error(s.line, kind + " already started");
            }
        } else if (s.op == "register-issuer" || s.op == "tir-register" || s.op == "revoke-issuer") {
            need(s, 1);
            known(s, issuers, s.args[0], "issuer");
        } else if (s.op == "create-wallet") {
            need(s, 1);
            if (!wallets.insert(s.args[0]).second) {
                parse_error(s.line, "wallet '" + s.args[0] + "' already exists");
            }
        } else if (s.op == "add-position") {
            need(s, 1);
            known(s, wallets, s.args[0], "wallet");
            for (const char *key : {"kind", "title", "organization", "start"}) {
                require_option(s, key);
            }
        } else if (s.op == "acquire") {
            need(s, 1);
            known(s, wallets, s.args[0], "wallet");
            require_option(s, "from");
            known(s, issuers, s.options.at("from"), "issuer");
        } else if (s.op == "request-presentation") {
            need(s, 1);
            if (!services.contains("verifier")) {
                parse_error(s.line, "request-presentation needs a verifier");
            }
            if (s.options.contains("holder")) {
                known(s, wallets, s.options.at("holder"), "wallet");
            }
            if (!requests.insert(s.args[0]).second) {
                parse_error(s.line, "request '" + s.args[0] + "' already exists");
            }
        } else if (s.op == "answer") {
            need(s, 2);
            known(s, wallets, s.args[0], "wallet");
            known(s, requests, s.args[1], "request");
            if (!kAnswerModes.contains(s.option("mode", "honest"))) {
                parse_error(s.line, "unknown answer mode '" + s.option("mode") + "'");
            }
            if (s.options.contains("nonce-from")) {
                known(s, requests, s.options.at("nonce-from"), "request");
            }
            envelopes.insert(s.args[1]);
        } else if (s.op == "verify") {
            need(s, 1);
            known(s, requests, s.args[0], "request");
            known(s, envelopes, s.option("envelope-from", s.args[0]), "answered request");
            reports.insert(s.option("as", s.args[0]));
        } else if (s.op == "advance-clock") {
            need(s, 1);
            duration(s, s.args[0]);
        } else if (s.op == "assert-outcome") {
            need(s, 2);
            known(s, reports, s.args[0], "report");
            if (s.args[1] != "accepted" && s.args[1] != "rejected") {
                parse_error(s.line, "outcome must be accepted or rejected");
            }
        } else if (s.op == "assert-check") {
            need(s, 3);
            known(s, reports, s.args[0], "report");
            if (std::find(verification::kCheckOrder.begin(), verification::kCheckOrder.end(), s.args[1]) ==
                verification::kCheckOrder.end()) {
                parse_error(s.line, "unknown check '" + s.args[1] + "'");
            }
            if (s.args[2] != "pass" && s.args[2] != "fail" && s.args[2] != "skipped") {
                parse_error(s.line, "check status must be pass, fail or skipped");
            }
        } else {
            parse_error(s.line, "unknown step '" + s.op + "'");
        }
    }
}

std::string check_status_word(verification::CheckStatus status) {
    switch (status) {
    case verification::CheckStatus::passed:
        return "pass";
    case verification::CheckStatus::failed:
        return "fail";
    case verification::CheckStatus::skipped:
        return "skipped";
    }
    return "skipped";
}

std::string outcome_word(verification::Outcome outcome) {
    return outcome == verification::Outcome::accepted ? "accepted" : "rejected";
}

struct AssertionFailed : std::runtime_error {
    using std::runtime_error::runtime_error;
};

fs::path fresh_work_dir() {
    static std::atomic<int> counter{0};
    auto dir = fs::temp_directory_path() /
               ("resumevc-scenario-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

class Runner {
  public:
    Runner(fs::path dir, http::TranscriptSink sink) : dir_(std::move(dir)), sink_(std::move(sink)) {}
    ~Runner() { teardown(); }

    void record(Json entry) {
        std::lock_guard lock(transcript_mutex_);
        entry["seq"] = transcript_.size();
        if (sink_) {
            sink_(entry);
        }
        transcript_.push_back(std::move(entry));
    }

    http::TranscriptSink http_sink() {
        return [this](const Json &entry) {
            Json e = entry;
            e["kind"] = "http";
            record(std::move(e));
        };
    }

    void execute(const Step &s);

    std::vector<Json> take_transcript() {
        std::lock_guard lock(transcript_mutex_);
        return std::move(transcript_);
    }
    std::map<std::string, verification::VerificationReport> reports() const { return reports_; }

    void teardown() {
        for (auto &[name, w] : wallets_) {
            w.channel.reset();
        }
        bridge_.reset();
        realtime_server_.reset();
        broker_client_.reset();
        broker_server_.reset();
        verifier_http_.reset();
        for (auto &[name, issuer] : issuers_) {
            issuer.http.reset();
        }
        registry_http_.reset();
    }

  private:
    struct IssuerCtx {
        did::Did did;
        std::unique_ptr<issuance::IssuerService> service;
        std::unique_ptr<http::HttpService> http;
        std::unique_ptr<http::HttpIssuerClient> client;
    };
    struct WalletCtx {
        std::unique_ptr<wallet::Wallet> wallet;
        std::string resume_id;
        std::unique_ptr<messaging::RealtimeClient> channel;
    };

    void start_service(const Step &s);
    void create_wallet(const Step &s);
    void request_presentation(const Step &s);
    void answer(const Step &s);
    void verify(const Step &s);
    const verification::VerificationReport &report(const std::string &label) const {
        return reports_.at(label);
    }

    fs::path dir_;
    http::TranscriptSink sink_;
    std::mutex transcript_mutex_;
    std::vector<Json> transcript_;

    ManualClock clock_{kScenarioEpoch};

    std::unique_ptr<registry::TrustRegistry> registry_;
    std::unique_ptr<http::HttpService> registry_http_;
    std::unique_ptr<http::HttpRegistryClient> registry_admin_;
    std::unique_ptr<http::HttpRegistryClient> registry_reader_;

    std::map<std::string, IssuerCtx> issuers_;

    std::optional<did::Did> verifier_did_;
    std::unique_ptr<verification::VerifierService> verifier_;
    std::unique_ptr<http::HttpService> verifier_http_;
    std::unique_ptr<http::HttpVerifierClient> verifier_client_;

    std::unique_ptr<messaging::Broker> broker_;
    std::unique_ptr<messaging::BrokerServer> broker_server_;
    std::unique_ptr<messaging::BrokerClient> broker_client_;
    std::unique_ptr<messaging::RealtimeHub> hub_;
    std::unique_ptr<messaging::RealtimeServer> realtime_server_;
    std::unique_ptr<messaging::RequestBridge> bridge_;

    std::map<std::string, WalletCtx> wallets_;
    std::map<std::string, verification::PresentationRequest> requests_;
    std::map<std::string, crypto::EncryptedEnvelope> envelopes_;
    std::map<std::string, verification::VerificationReport> reports_;
};

void Runner::start_service(const Step &s) {
    const auto &kind = s.args[0];
    if (kind == "registry") {
        registry_ = std::make_unique<registry::TrustRegistry>(clock_.clock());
        registry_http_ = http::registry_service(*registry_);
        registry_http_->start(0);
        registry_admin_ = std::make_unique<http::HttpRegistryClient>(registry_http_->url(), http_sink());
        registry_reader_ = std::make_unique<http::HttpRegistryClient>(registry_http_->url(), http_sink());
        record({{"kind", "service"}, {"service", "registry"}, {"url", registry_http_->url()}});
    } else if (kind == "issuer") {
        const auto name = s.option("name", "issuer");
        auto did = did::new_ebsi_did();
        auto key = crypto::generate_key_pair();
        issuance::IssuerConfig config{.issuer_did = did, .signing_key = key};
        if (s.options.contains("validity")) {
            config.credential_validity_seconds = parse_duration(s.options.at("validity"));
        }
        registry_admin_->register_did_document(
            did::build_did_document(did, {{config.key_id, key.public_key()}}, clock_.now()));
        IssuerCtx ctx{did, std::make_unique<issuance::IssuerService>(config, clock_.clock()), nullptr, nullptr};
        ctx.http = http::issuer_service(*ctx.service);
        ctx.http->start(0);
        ctx.client = std::make_unique<http::HttpIssuerClient>(ctx.http->url(), http_sink());
        record({{"kind", "service"}, {"service", "issuer"}, {"name", name}, {"did", did.str()},
                {"url", ctx.http->url()}});
        issuers_.emplace(name, std::move(ctx));
    } else if (kind == "verifier") {
        verifier_did_ = did::new_ebsi_did();
        auto enc_key = crypto::generate_key_pair();
        registry_admin_->register_did_document(did::build_did_document(
            *verifier_did_, {{std::string(verification::kEncryptionKeyId), enc_key.public_key()}}, clock_.now()));
        verifier_ = std::make_unique<verification::VerifierService>(
            verification::VerifierConfig{.verifier_did = *verifier_did_, .encryption_key = enc_key},
            *registry_reader_, clock_.clock());
        verifier_->set_notifier([this](const verification::PresentationRequest &request,
                                       const std::optional<did::Did> &holder) {
            if (!holder || !broker_client_) {
                return;
            }
            const auto payload = messaging::request_notification(*holder, request.to_frame());
            const auto id = broker_client_->publish(messaging::RequestBridge::kTopic, payload);
            record({{"kind", "broker"},
                    {"verb", "PUB"},
                    {"topic", messaging::RequestBridge::kTopic},
                    {"messageId", id},
                    {"payload", Json::parse(to_string(payload))}});
        });
        verifier_http_ = http::verifier_service(*verifier_);
        verifier_http_->start(0);
        verifier_client_ = std::make_unique<http::HttpVerifierClient>(verifier_http_->url(), http_sink());
        record({{"kind", "service"}, {"service", "verifier"}, {"did", verifier_did_->str()},
                {"url", verifier_http_->url()}});
    } else {
        broker_ = std::make_unique<messaging::Broker>(
            messaging::BrokerOptions{.log_path = dir_ / "broker.log", .clock = clock_.clock()});
        broker_server_ = std::make_unique<messaging::BrokerServer>(*broker_, 0);
        broker_client_ = std::make_unique<messaging::BrokerClient>("127.0.0.1", broker_server_->port());
        hub_ = std::make_unique<messaging::RealtimeHub>(clock_.clock());
        realtime_server_ = std::make_unique<messaging::RealtimeServer>(*hub_, 0);
        bridge_ = std::make_unique<messaging::RequestBridge>(*broker_client_, *hub_);
        record({{"kind", "service"},
                {"service", "broker"},
                {"port", broker_server_->port()},
                {"realtimePort", realtime_server_->port()}});
    }
}

void Runner::create_wallet(const Step &s) {
    const auto &name = s.args[0];
    WalletCtx ctx;
    ctx.wallet = std::make_unique<wallet::Wallet>(wallet::Wallet::init(dir_ / (name + ".wallet.json"), clock_.clock()));
    ctx.resume_id = ctx.wallet->create_resume(s.option("full-name", name));
    auto *w = ctx.wallet.get();
    if (realtime_server_) {
        ctx.channel = std::make_unique<messaging::RealtimeClient>(
            "127.0.0.1", realtime_server_->port(), w->holder_did(), [this, w, name](const messaging::Frame &frame) {
                const auto body = Json::parse(to_string(frame.payload));
                record({{"kind", "realtime"},
                        {"to", name},
                        {"frameType", std::string(messaging::frame_type_name(frame.type))},
                        {"payload", body}});
                if (frame.type == messaging::FrameType::request) {
                    w->receive_request(verification::PresentationRequest::from_frame(body));
                }
            });
    }
    record({{"kind", "wallet"}, {"wallet", name}, {"holderDid", w->holder_did().str()}, {"resumeId", ctx.resume_id}});
    wallets_.emplace(name, std::move(ctx));
}

void Runner::request_presentation(const Step &s) {
    std::optional<did::Did> holder;
    WalletCtx *target = nullptr;
    if (s.options.contains("holder")) {
        target = &wallets_.at(s.options.at("holder"));
        holder = target->wallet->holder_did();
    }
    auto request =
        verifier_client_->create_request(s.option("type", std::string(credential::kResumeCredentialType)), holder);
    if (bridge_ && holder) {
        bridge_->drain();
    }
    requests_.insert_or_assign(s.args[0], request);
}

void Runner::answer(const Step &s) {
    auto &ctx = wallets_.at(s.args[0]);
    auto &w = *ctx.wallet;
    const auto &request = requests_.at(s.args[1]);
    const auto pending = w.pending_requests();
    const bool queued = std::any_of(pending.begin(), pending.end(),
                                    [&](const auto &p) { return p.request_id == request.request_id; });
    if (!queued && !w.answered(request.request_id)) {
        record({{"kind", "out-of-band"}, {"to", s.args[0]}, {"payload", request.to_frame()}});
        w.receive_request(request);
    }

    const auto mode = s.option("mode", "honest");
    crypto::EncryptedEnvelope envelope = [&] {
        if (mode == "honest") {
            return w.handle_presentation_request(request);
        }
        const auto now = clock_.now();
        std::optional<credential::VerifiableCredential> vc;
        if (mode == "any-credential") {
            for (const auto &c : w.credentials()) {
                if (c.type == request.credential_type && (!vc || c.issued_at >= vc->issued_at)) {
                    vc = c;
                }
            }
        } else {
            vc = w.find_credential(request.credential_type);
        }
        if (!vc) {
            throw Error("no-matching-credential", "no " + request.credential_type + " in the wallet");
        }

        const crypto::KeyPair *signer = &w.holder_key();
        std::optional<crypto::KeyPair> intruder;
        auto credential_token = vc->token;
        auto nonce = request.nonce.value();

        if (mode == "tamper-credential") {
            auto payload = credential_token.payload();
            auto &name = payload["vc"]["credentialSubject"]["fullName"];
            name = name.get<std::string>() + " PhD";
            credential_token = crypto::CompactToken(credential_token.header(), payload, credential_token.signature());
        } else if (mode == "non-subject-key") {
            intruder = crypto::generate_key_pair();
            signer = &*intruder;
        } else if (mode == "stale-nonce") {
            nonce = s.options.contains("nonce-from") ? requests_.at(s.options.at("nonce-from")).nonce.value()
                                                      : crypto::generate_nonce(now).value();
        }

        const auto presenter = did::did_key_from_public_key(signer->public_key());
        auto vp = crypto::sign_token(
            credential::presentation_claims(presenter, credential_token, request.verifier_did, nonce, now),
            Json{{"kid", did::did_key_kid(presenter)}, {"typ", "JWT"}}, *signer);
        if (mode == "tamper-vp") {
            auto payload = vp.payload();
            payload["iat"] = payload["iat"].get<Timestamp>() + 1;
            vp = crypto::CompactToken(vp.header(), payload, vp.signature());
        }
        return crypto::ecdh_encrypt(to_bytes(vp.serialize()), request.response_encryption_key,
                                    request.response_key_id());
    }();
    record({{"kind", "envelope"}, {"request", s.args[1]}, {"mode", mode}, {"envelope", envelope.to_json()}});
    envelopes_.insert_or_assign(s.args[1], envelope);
}

void Runner::verify(const Step &s) {
    const auto &request = requests_.at(s.args[0]);
    const auto &envelope = envelopes_.at(s.option("envelope-from", s.args[0]));
    auto report = verifier_client_->verify(request.request_id, envelope);
    record({{"kind", "report"},
            {"label", s.option("as", s.args[0])},
            {"outcome", outcome_word(report.outcome)},
            {"failedCheck", report.failed_check() ? Json(*report.failed_check()) : Json(nullptr)}});
    reports_.insert_or_assign(s.option("as", s.args[0]), std::move(report));
}

void Runner::execute(const Step &s) {
    if (s.op == "start-service") {
        start_service(s);
    } else if (s.op == "register-issuer" || s.op == "tir-register") {
        std::vector<std::string> types;
        std::stringstream list(s.option("types", std::string(credential::kResumeCredentialType)));
        for (std::string t; std::getline(list, t, ',');) {
            if (!t.empty()) {
                types.push_back(t);
            }
        }
        registry_admin_->tir_register(issuers_.at(s.args[0]).did, types);
    } else if (s.op == "revoke-issuer") {
        registry_admin_->tir_revoke(issuers_.at(s.args[0]).did);
    } else if (s.op == "create-wallet") {
        create_wallet(s);
    } else if (s.op == "add-position") {
        auto &ctx = wallets_.at(s.args[0]);
        credential::Position p;
        p.kind = credential::position_kind_from_name(s.options.at("kind"));
        p.title = s.options.at("title");
        p.organization = s.options.at("organization");
        p.start = s.options.at("start");
        p.description = s.option("description");
        if (s.options.contains("end")) {
            p.end = s.options.at("end");
        }
        if (s.options.contains("organization-did")) {
            p.organization_did = did::Did::parse(s.options.at("organization-did"));
        }
        ctx.wallet->add_position(ctx.resume_id, p);
    } else if (s.op == "acquire") {
        auto &ctx = wallets_.at(s.args[0]);
        const auto vc =
            ctx.wallet->acquire_credential(*issuers_.at(s.options.at("from")).client, *registry_reader_,
                                           ctx.resume_id, s.option("type", std::string(credential::kResumeCredentialType)));
        record({{"kind", "credential"}, {"wallet", s.args[0]}, {"credential", http::credential_summary(vc)}});
    } else if (s.op == "request-presentation") {
        request_presentation(s);
    } else if (s.op == "answer") {
        answer(s);
    } else if (s.op == "verify") {
        verify(s);
    } else if (s.op == "advance-clock") {
        clock_.advance(parse_duration(s.args[0]));
        record({{"kind", "clock"}, {"now", clock_.now()}});
    } else if (s.op == "assert-outcome") {
        const auto actual = outcome_word(report(s.args[0]).outcome);
        if (actual != s.args[1]) {
            const auto failed = report(s.args[0]).failed_check();
            throw AssertionFailed("report '" + s.args[0] + "' is " + actual + (failed ? " at " + *failed : "") +
                                  ", expected " + s.args[1]);
        }
    } else if (s.op == "assert-check") {
        const auto &r = report(s.args[0]);
        auto it = std::find_if(r.checks.begin(), r.checks.end(), [&](const auto &c) { return c.name == s.args[1]; });
        const auto actual = it == r.checks.end() ? std::string("missing") : check_status_word(it->status);
        if (actual != s.args[2]) {
            throw AssertionFailed("check " + s.args[1] + " is " + actual + ", expected " + s.args[2] +
                                  (it != r.checks.end() && !it->detail.empty() ? " (" + it->detail + ")" : ""));
        }
    }
}

} // namespace

std::string Step::option(const std::string &key, const std::string &fallback) const {
    auto it = options.find(key);
    return it == options.end() ? fallback : it->second;
}

std::int64_t parse_duration(std::string_view text) {
    if (text.empty()) {
        throw Error("parse-error", "empty duration");
    }
    std::int64_t unit = 1;
    switch (text.back()) {
    case 's':
        text.remove_suffix(1);
        break;
    case 'm':
        unit = 60;
        text.remove_suffix(1);
        break;
    case 'h':
        unit = 3600;
        text.remove_suffix(1);
        break;
    case 'd':
        unit = 86400;
        text.remove_suffix(1);
        break;
    default:
        break;
    }
    std::int64_t value = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty() || value < 0) {
        throw Error("parse-error", "bad duration '" + std::string(text) + "'");
    }
    return value * unit;
}

Script Script::parse(std::string_view text) {
    Script script;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto end = std::min(text.find('\n', pos), text.size());
        const auto line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        auto tokens = tokenize(line, line_no);
        if (tokens.empty()) {
            if (end == text.size()) {
                break;
            }
            continue;
        }
        Step step;
        step.line = line_no;
        step.op = tokens.front();
        for (std::size_t i = 1; i < tokens.size(); ++i) {
            const auto eq = tokens[i].find('=');
            if (eq == std::string::npos) {
                if (!step.options.empty()) {
                    parse_error(line_no, "positional argument after options");
                }
                step.args.push_back(tokens[i]);
            } else if (eq == 0) {
                parse_error(line_no, "empty option name");
            } else if (!step.options.emplace(tokens[i].substr(0, eq), tokens[i].substr(eq + 1)).second) {
                parse_error(line_no, "duplicate option " + tokens[i].substr(0, eq));
            }
        }
        script.steps.push_back(std::move(step));
        if (end == text.size()) {
            break;
        }
    }
    try {
        validate(script.steps);
    } catch (const Error &e) {
        if (e.code() == "parse-error") {
            throw;
        }
        throw Error("parse-error", e.what());
    }
    return script;
}

Script Script::load(const fs::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("parse-error", "cannot read scenario " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

ScenarioResult run_scenario(const Script &script, const ScenarioOptions &options) {
    const bool own_dir = !options.work_dir;
    const auto dir = own_dir ? fresh_work_dir() : *options.work_dir;
    fs::create_directories(dir);

    ScenarioResult result;
    {
        Runner runner(dir, options.transcript);
        for (std::size_t i = 0; i < script.steps.size(); ++i) {
            const auto &step = script.steps[i];
            const auto expected = step.option("expect-error");
            Json entry{{"kind", "step"}, {"index", i + 1}, {"line", step.line}, {"op", step.op}, {"args", step.args}};
            if (!step.options.empty()) {
                entry["options"] = step.options;
            }
            runner.record(std::move(entry));

            auto fail = [&](const std::string &message) {
                result.exit_code = kExitAssertion;
                result.failed_step = i + 1;
                result.message = "step " + std::to_string(i + 1) + " (line " + std::to_string(step.line) + ", " +
                                 step.op + "): " + message;
                runner.record({{"kind", "failure"}, {"index", i + 1}, {"message", result.message}});
            };
            try {
                runner.execute(step);
                if (!expected.empty()) {
                    fail("expected error " + expected + " but the step succeeded");
                    break;
                }
            } catch (const AssertionFailed &e) {
                fail(std::string("assertion failed: ") + e.what());
                break;
            } catch (const Error &e) {
                if (e.code() == expected) {
                    runner.record({{"kind", "expected-error"}, {"index", i + 1}, {"code", e.code()}});
                    continue;
                }
                fail(std::string("step-failure: ") + e.what());
                break;
            } catch (const std::exception &e) {
                fail(std::string("step-failure: ") + e.what());
                break;
            }
        }
        runner.teardown();
        result.transcript = runner.take_transcript();
        result.reports = runner.reports();
    }
    if (own_dir) {
        std::error_code ec;
        fs::remove_all(dir, ec);
    }
    return result;
}

ScenarioResult run_scenario_file(const fs::path &path, const ScenarioOptions &options) {
    Script script;
    try {
        script = Script::load(path);
    } catch (const Error &e) {
        ScenarioResult result;
        result.exit_code = kExitUsage;
        result.message = e.what();
        return result;
    }
    return run_scenario(script, options);
}

} // namespace resumevc::scenario
