#include <gtest/gtest.h>

#include <httplib.h>

#include "fixtures.hpp"
#include "resumevc/error.hpp"
#include "resumevc/http.hpp"

using namespace resumevc;
using verification::Outcome;

namespace {

std::string code_of(auto &&fn) {
    try {
        fn();
    } catch (const Error &e) {
        return e.code();
    }
    return "";
}

const std::string kType(credential::kResumeCredentialType);

struct Services {
    fixtures::Ecosystem eco;
    std::unique_ptr<http::HttpService> registry = http::registry_service(eco.registry);
    std::unique_ptr<http::HttpService> issuer = http::issuer_service(*eco.issuer);
    std::unique_ptr<http::HttpService> verifier = http::verifier_service(*eco.verifier);

    Services() {
        registry->start(0);
        issuer->start(0);
        verifier->start(0);
    }
};

} // namespace

TEST(HttpStatus, ErrorCodeMapping) {
    EXPECT_EQ(http::status_for_error("not-found"), 404);
    EXPECT_EQ(http::status_for_error("unknown-request"), 404);
    EXPECT_EQ(http::status_for_error("no-document"), 404);
    EXPECT_EQ(http::status_for_error("already-registered"), 409);
    EXPECT_EQ(http::status_for_error("offer-already-used"), 409);
    EXPECT_EQ(http::status_for_error("request-already-answered"), 409);
    EXPECT_EQ(http::status_for_error("issuer-unconfigured"), 503);
    EXPECT_EQ(http::status_for_error("broker-unavailable"), 503);
    EXPECT_EQ(http::status_for_error("bad-signature"), 400);
}

TEST(HttpService, PortInUseAndCors) {
    fixtures::Ecosystem eco;
    auto a = http::registry_service(eco.registry);
    const auto port = a->start(0);
    auto b = http::registry_service(eco.registry);
    EXPECT_EQ(code_of([&] { b->start(port); }), "port-in-use");
    EXPECT_EQ(a->url(), "http://127.0.0.1:" + std::to_string(port));

    httplib::Client raw("127.0.0.1", port);
    const auto options = raw.Options("/did/x");
    ASSERT_TRUE(options);
    EXPECT_EQ(options->status, 204);
    EXPECT_EQ(options->get_header_value("Access-Control-Allow-Origin"), "*");
    const auto missing = raw.Get("/did/" + http::url_encode(did::new_ebsi_did().str()));
    ASSERT_TRUE(missing);
    EXPECT_EQ(missing->status, 404);
    EXPECT_EQ(Json::parse(missing->body).at("code"), "not-found");
    const auto bad = raw.Post("/did", "{not json", "application/json");
    ASSERT_TRUE(bad);
    EXPECT_EQ(bad->status, 400);
    a->stop();
}

TEST(HttpRegistry, ClientCoversEveryEndpoint) {
    Services s;
    std::vector<Json> transcript;
    http::HttpRegistryClient client(s.registry->url(), [&](const Json &e) { transcript.push_back(e); });
    const auto id = did::new_ebsi_did();
    const auto doc = did::build_did_document(id, {{"key-1", crypto::generate_key_pair().public_key()}}, 1);
    const auto seq = client.register_did_document(doc);
    EXPECT_EQ(seq, s.eco.registry.last_sequence());
    EXPECT_EQ(client.resolve_did_document(id), doc);
    EXPECT_EQ(code_of([&] { client.register_did_document(doc); }), "already-registered");

    client.tir_register(id, {kType});
    EXPECT_TRUE(client.tir_is_trusted(id, kType, s.eco.clock.now()));
    EXPECT_FALSE(client.tir_is_trusted(id, kType, s.eco.clock.now() - 1));
    EXPECT_FALSE(client.tir_is_trusted(id, "Other", s.eco.clock.now()));
    s.eco.clock.advance(5);
    EXPECT_TRUE(client.tir_revoke(id).revoked_at);
    EXPECT_FALSE(client.tir_is_trusted(id, kType, s.eco.clock.now()));
    EXPECT_EQ(code_of([&] { client.tir_revoke(id); }), "not-trusted");
    client.deactivate_did_document(id);
    EXPECT_TRUE(client.resolve_did_document(id).deactivated);
    EXPECT_EQ(code_of([&] { client.resolve_did_document(did::new_ebsi_did()); }), "not-found");

    http::JsonClient raw(s.registry->url(), "registry");
    const auto events = raw.get("/events");
    EXPECT_EQ(events.size(), s.eco.registry.events().size());
    ASSERT_FALSE(transcript.empty());
    EXPECT_EQ(transcript.front().at("service"), "registry");
    EXPECT_EQ(transcript.front().at("direction"), "request");
    EXPECT_EQ(transcript.front().at("method"), "POST");
}

TEST(HttpIssuer, FullFlowOverHttp) {
    Services s;
    http::HttpIssuerClient issuer(s.issuer->url());
    http::HttpRegistryClient registry(s.registry->url());
    fixtures::TempDir dir;
    auto w = s.eco.make_wallet(dir / "w.json");
    const auto vc = w.acquire_credential(issuer, registry, "resume-1");
    EXPECT_EQ(vc.issuer, s.eco.issuer_did);
    EXPECT_EQ(s.eco.issuer->issued_count(), 1u);

    const auto offer = issuer.create_offer(w.resume("resume-1"), kType);
    const auto token = issuer.exchange_token(offer.offer_id);
    EXPECT_EQ(code_of([&] { issuer.exchange_token(offer.offer_id); }), "offer-already-used");
    const auto wrong = issuance::build_proof(w.holder_key(), did::new_ebsi_did(), token.c_nonce, s.eco.clock.now());
    EXPECT_EQ(code_of([&] { issuer.issue_credential(token.access_ref, wrong); }), "audience-mismatch");
    EXPECT_EQ(code_of([&] { issuer.exchange_token("missing"); }), "unknown-offer");
}

TEST(HttpVerifier, RequestVerifyReport) {
    Services s;
    http::HttpVerifierClient verifier(s.verifier->url());
    fixtures::TempDir dir;
    auto w = s.eco.make_holder(dir / "w.json");
    const auto req = verifier.create_request(kType, w.holder_did());
    EXPECT_EQ(verifier.request(req.request_id).to_frame(), req.to_frame());
    const auto envelope = w.handle_presentation_request(req);
    const auto report = verifier.verify(req.request_id, envelope);
    EXPECT_EQ(report.outcome, Outcome::accepted);
    EXPECT_EQ(verifier.report(req.request_id), report);
    EXPECT_EQ(*verifier.verify(req.request_id, envelope).failed_check(), "nonce-binding");
    EXPECT_EQ(code_of([&] { verifier.request("missing"); }), "unknown-request");
    EXPECT_EQ(code_of([&] { verifier.verify("missing", envelope); }), "unknown-request");
    EXPECT_EQ(code_of([&] { verifier.report("missing"); }), "not-found");
}

TEST(HttpClient, UnreachableService) {
    std::string url;
    {
        fixtures::Ecosystem eco;
        auto svc = http::registry_service(eco.registry);
        svc->start(0);
        url = svc->url();
    }
    http::HttpRegistryClient client(url);
    EXPECT_EQ(code_of([&] { client.resolve_did_document(did::new_ebsi_did()); }), "service-unreachable");
}

TEST(HttpWallet, EndpointsUsedByTheUi) {
    Services s;
    fixtures::TempDir dir;
    auto w = wallet::Wallet::init(dir / "w.json", s.eco.clock.clock());
    http::HttpIssuerClient issuer(s.issuer->url());
    http::HttpRegistryClient registry(s.registry->url());
    http::HttpVerifierClient verifier(s.verifier->url());
    auto svc = http::wallet_service(w, {.issuer = &issuer, .registry = &registry, .verifier = &verifier});
    svc->start(0);
    http::JsonClient ui(svc->url(), "wallet");

    const auto resume_id = ui.post("/resumes", Json{{"fullName", "Alice Example"}}).at("resumeId").get<std::string>();
    const auto updated = ui.post("/resumes/" + resume_id + "/positions", fixtures::sample_position().to_json());
    EXPECT_EQ(updated.at("positions").size(), 1u);
    const auto summary = ui.post("/credentials", Json{{"resumeId", resume_id}});
    EXPECT_EQ(summary.at("issuer"), s.eco.issuer_did.str());
    EXPECT_EQ(summary.at("subject"), w.holder_did().str());

    const auto state = ui.get("/wallet");
    EXPECT_EQ(state.at("holderDid"), w.holder_did().str());
    EXPECT_EQ(state.at("credentials").size(), 1u);
    EXPECT_FALSE(state.dump().find("\"d\"") != std::string::npos);

    const auto req = verifier.create_request(kType, w.holder_did());
    EXPECT_EQ(ui.post("/requests", req.to_frame()).at("requestId"), req.request_id);
    EXPECT_EQ(ui.get("/requests").size(), 1u);
    const auto approved = ui.post("/requests/" + req.request_id + "/approve", Json::object());
    EXPECT_EQ(approved.at("report").at("outcome"), "accepted");
    EXPECT_TRUE(approved.contains("envelope"));
    EXPECT_EQ(code_of([&] { ui.post("/requests/" + req.request_id + "/approve", Json::object()); }),
              "request-already-answered");

    const auto declined = verifier.create_request(kType, w.holder_did());
    ui.post("/requests", declined.to_frame());
    EXPECT_EQ(ui.post("/requests/" + declined.request_id + "/decline", Json::object()).at("declined"), true);
    EXPECT_EQ(code_of([&] { ui.post("/requests/missing/decline", Json::object()); }), "unknown-request");
    EXPECT_EQ(code_of([&] { ui.post("/resumes/resume-9/positions", fixtures::sample_position().to_json()); }),
              "unknown-resume");
}

TEST(HttpWallet, UnconfiguredAcquireIsRefused) {
    fixtures::TempDir dir;
    auto w = wallet::Wallet::init(dir / "w.json");
    auto svc = http::wallet_service(w, {});
    svc->start(0);
    http::JsonClient ui(svc->url(), "wallet");
    EXPECT_EQ(code_of([&] { ui.post("/credentials", Json{{"resumeId", "resume-1"}}); }), "wallet-unconfigured");
    const auto approve = ui.post("/resumes", Json{{"fullName", "A"}});
    EXPECT_EQ(approve.at("resumeId"), "resume-1");
}
